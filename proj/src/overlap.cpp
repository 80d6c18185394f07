#include "corpusforge/overlap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "corpusforge/io.hpp"
#include "corpusforge/parallel.hpp"
#include "corpusforge/text.hpp"

namespace corpusforge {

namespace {

constexpr std::string_view kBinaryMagic = "CFEMB1";

}  // namespace

EmbeddingSet make_embedding_set(std::vector<std::string> ids, const std::vector<std::vector<double>>& rows,
                                std::string source) {
  if (ids.size() != rows.size()) throw std::invalid_argument("ids and rows differ in length");
  EmbeddingSet set;
  set.source = std::move(source);
  set.dim = rows.empty() ? 0 : rows.front().size();
  set.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(set.dim));
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != set.dim) {
      throw InputFormatError(fmt::format("embedding '{}' has dimension {}, expected {}", ids[i], rows[i].size(), set.dim));
    }
    for (std::size_t k = 0; k < set.dim; ++k) {
      if (!std::isfinite(rows[i][k])) {
        throw InputFormatError(fmt::format("embedding '{}' has a non-finite component at index {}", ids[i], k));
      }
      set.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    if (!seen.insert(ids[i]).second) throw InputFormatError(fmt::format("embedding id '{}' appears twice", ids[i]));
  }
  set.ids = std::move(ids);
  return set;
}

namespace {

// Python's json module writes NaN and Infinity as bare words. Turn them into
// null so the line still parses and validation can name the record.
std::string sanitize_nonfinite(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < line.size()) {
        out.push_back(line[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    bool replaced = false;
    for (std::string_view word : {"-Infinity", "Infinity", "NaN"}) {
      if (line.substr(i, word.size()) == word) {
        out += "null";
        i += word.size() - 1;
        replaced = true;
        break;
      }
    }
    if (!replaced) out.push_back(c);
  }
  return out;
}

}  // namespace

EmbeddingSet parse_embeddings_jsonl(std::string_view data, std::string_view source_name) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::string source;
  std::optional<std::size_t> declared_dim;
  const auto lines = split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    json j;
    try {
      j = json::parse(sanitize_nonfinite(lines[i]));
    } catch (const json::parse_error& e) {
      throw InputFormatError(fmt::format("{}:{}: {}", source_name, i + 1, e.what()));
    }
    if (!j.is_object()) throw InputFormatError(fmt::format("{}:{}: expected a JSON object", source_name, i + 1));
    if (!j.contains("id")) {
      if (!ids.empty() || declared_dim) {
        throw InputFormatError(fmt::format("{}:{}: record without id", source_name, i + 1));
      }
      if (!j.contains("dim") || !j["dim"].is_number_unsigned()) {
        throw InputFormatError(fmt::format("{}:{}: header must declare an unsigned dim", source_name, i + 1));
      }
      declared_dim = j["dim"].get<std::size_t>();
      source = j.value("source", std::string{});
      continue;
    }
    const auto& idv = j["id"];
    std::string id = idv.is_string() ? idv.get<std::string>() : idv.dump();
    const auto it = j.find("vector");
    if (it == j.end() || !it->is_array()) {
      throw InputFormatError(fmt::format("{}:{}: embedding '{}' has no vector array", source_name, i + 1, id));
    }
    std::vector<double> row;
    row.reserve(it->size());
    for (const auto& v : *it) {
      if (v.is_number()) {
        row.push_back(v.get<double>());
      } else if (v.is_null()) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        throw InputFormatError(fmt::format("{}:{}: embedding '{}' holds a non-numeric component", source_name, i + 1, id));
      }
    }
    if (declared_dim && row.size() != *declared_dim) {
      throw InputFormatError(
          fmt::format("embedding '{}' has dimension {}, header declares {}", id, row.size(), *declared_dim));
    }
    ids.push_back(std::move(id));
    rows.push_back(std::move(row));
  }
  auto set = make_embedding_set(std::move(ids), rows, std::move(source));
  if (declared_dim) set.dim = *declared_dim;
  if (set.size() == 0) set.vectors.resize(0, static_cast<Eigen::Index>(set.dim));
  return set;
}

namespace {

template <class T>
T read_le(std::string_view data, std::size_t& pos, std::string_view source_name) {
  if (pos + sizeof(T) > data.size()) throw InputFormatError(fmt::format("{}: truncated binary embeddings", source_name));
  T value;
  std::memcpy(&value, data.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<unsigned char*>(&value);
    std::reverse(bytes, bytes + sizeof(T));
  }
  pos += sizeof(T);
  return value;
}

template <class T>
void write_le(std::string& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<unsigned char*>(&value);
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

EmbeddingSet parse_embeddings_binary(std::string_view data, std::string_view source_name) {
  if (data.substr(0, kBinaryMagic.size()) != kBinaryMagic) {
    throw InputFormatError(fmt::format("{}: missing CFEMB1 magic", source_name));
  }
  std::size_t pos = kBinaryMagic.size();
  const auto dim = read_le<std::uint32_t>(data, pos, source_name);
  const auto count = read_le<std::uint64_t>(data, pos, source_name);
  // Each record needs at least 4 + 8*dim bytes; reject absurd counts before
  // reserving memory for them.
  if (count > (data.size() - pos) / (4 + 8 * std::uint64_t{dim})) {
    throw InputFormatError(fmt::format("{}: record count {} exceeds file size", source_name, count));
  }
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  ids.reserve(count);
  rows.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto len = read_le<std::uint32_t>(data, pos, source_name);
    if (pos + len > data.size()) throw InputFormatError(fmt::format("{}: truncated binary embeddings", source_name));
    ids.emplace_back(data.substr(pos, len));
    pos += len;
    std::vector<double> row(dim);
    for (auto& v : row) v = read_le<double>(data, pos, source_name);
    rows.push_back(std::move(row));
  }
  if (pos != data.size()) throw InputFormatError(fmt::format("{}: trailing bytes after {} records", source_name, count));
  auto set = make_embedding_set(std::move(ids), rows);
  set.dim = dim;
  if (set.size() == 0) set.vectors.resize(0, dim);
  return set;
}

std::string embeddings_to_binary(const EmbeddingSet& set) {
  std::string out(kBinaryMagic);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim));
  write_le<std::uint64_t>(out, set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.ids[i].size()));
    out += set.ids[i];
    for (std::size_t k = 0; k < set.dim; ++k) {
      write_le<double>(out, set.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
    }
  }
  return out;
}

EmbeddingSet load_embeddings(const fs::path& path) {
  const auto data = read_file(path);
  const auto name = path.filename().string();
  if (std::string_view(data).substr(0, kBinaryMagic.size()) == kBinaryMagic) return parse_embeddings_binary(data, name);
  return parse_embeddings_jsonl(data, name);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  // Cosine is scale-invariant; dividing by the largest magnitude first keeps
  // the squares away from overflow and underflow.
  double su = 0.0, sv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    su = std::max(su, std::abs(u[k]));
    sv = std::max(sv, std::abs(v[k]));
  }
  if (su == 0.0 || sv == 0.0) return 0.0;
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double a = u[k] / su, b = v[k] / sv;
    dot += a * b;
    uu += a * a;
    vv += b * b;
  }
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

namespace {

std::span<const double> row(const EmbeddingSet& set, std::size_t i) {
  return {set.vectors.data() + i * set.dim, set.dim};
}

// Slack applied to the fast screens so that rounding in the blocked product
// or in acos never excludes a pair the scalar cosine would accept.
constexpr double kScreenSlack = 1e-9;

}  // namespace

std::vector<SimilarityPair> pairs_above(const EmbeddingSet& bench, const EmbeddingSet& corpus, double threshold,
                                        const PairOptions& options) {
  if (bench.dim != corpus.dim && bench.size() > 0 && corpus.size() > 0) {
    throw InputFormatError(fmt::format("dimension mismatch: benchmark d={}, corpus d={}", bench.dim, corpus.dim));
  }
  if (bench.size() == 0 || corpus.size() == 0) return {};

  const auto unit = [](const EmbeddingMatrix& m) {
    EmbeddingMatrix out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double n = out.row(i).stableNorm();
      if (n > 0.0) out.row(i) /= n;
    }
    return out;
  };
  const EmbeddingMatrix bench_unit = unit(bench.vectors);
  const EmbeddingMatrix corpus_unit = unit(corpus.vectors);

  // Angle of each corpus row to a fixed reference axis. The triangle
  // inequality on the sphere bounds angle(u, v) below by |a_u - a_v|, so
  // only a window of sorted corpus angles can reach the threshold.
  const bool prefilter = options.angular_prefilter && threshold > 0.0;
  Eigen::VectorXd reference;
  std::vector<std::pair<double, std::size_t>> corpus_angles;
  double window = 0.0;
  if (prefilter) {
    reference = corpus_unit.colwise().sum().transpose();
    if (reference.norm() == 0.0) reference = Eigen::VectorXd::Unit(static_cast<Eigen::Index>(corpus.dim), 0);
    reference.normalize();
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      const auto r = corpus_unit.row(static_cast<Eigen::Index>(j));
      if (r.squaredNorm() == 0.0) continue;  // zero rows score 0 < threshold
      corpus_angles.emplace_back(std::acos(std::clamp(r.dot(reference), -1.0, 1.0)), j);
    }
    std::sort(corpus_angles.begin(), corpus_angles.end());
    window = std::acos(std::clamp(threshold, -1.0, 1.0)) + kScreenSlack;
  }

  std::vector<std::size_t> bench_rows;
  for (std::size_t i = 0; i < bench.size(); ++i) {
    if (options.bench_subset.empty() || options.bench_subset.count(bench.ids[i])) bench_rows.push_back(i);
  }

  auto per_bench = parallel_map(bench_rows.size(), options.workers, [&](std::size_t k) {
    const std::size_t i = bench_rows[k];
    const auto u = bench_unit.row(static_cast<Eigen::Index>(i));
    std::vector<SimilarityPair> found;
    auto consider = [&](std::size_t j, double approx) {
      if (approx < threshold - kScreenSlack) return;
      const double score = cosine(row(bench, i), row(corpus, j));
      if (score >= threshold) found.push_back({bench.ids[i], corpus.ids[j], score});
    };
    if (!prefilter) {
      const Eigen::VectorXd scores = corpus_unit * u.transpose();
      for (std::size_t j = 0; j < corpus.size(); ++j) consider(j, scores(static_cast<Eigen::Index>(j)));
      return found;
    }
    if (u.squaredNorm() == 0.0) return found;
    const double a = std::acos(std::clamp(u.dot(reference), -1.0, 1.0));
    auto lo = std::lower_bound(corpus_angles.begin(), corpus_angles.end(), std::make_pair(a - window, std::size_t{0}));
    for (auto it = lo; it != corpus_angles.end() && it->first <= a + window; ++it) {
      consider(it->second, corpus_unit.row(static_cast<Eigen::Index>(it->second)).dot(u));
    }
    return found;
  });

  std::vector<SimilarityPair> pairs;
  for (auto& v : per_bench) pairs.insert(pairs.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  std::sort(pairs.begin(), pairs.end(), [](const SimilarityPair& a, const SimilarityPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.bench_id != b.bench_id) return a.bench_id < b.bench_id;
    return a.corpus_id < b.corpus_id;
  });
  return pairs;
}

std::string format_score(double score) { return fmt::format("{:.4f}", score); }

OverlapReport report(std::span<const SimilarityPair> pairs, std::span<const double> thresholds,
                     const std::unordered_map<std::string, std::string>& bench_texts,
                     const std::unordered_map<std::string, std::string>& corpus_texts) {
  OverlapReport out;
  for (double t : thresholds) {
    std::size_t n = 0;
    for (const auto& p : pairs) n += p.score >= t;
    out.counts[fmt::format("{}", t)] = n;
  }

  for (const auto& p : pairs) {
    json line{{"bench_id", p.bench_id}, {"corpus_id", p.corpus_id}, {"score", std::stod(format_score(p.score))}};
    out.jsonl += line.dump();
    out.jsonl += '\n';
  }

  // pairs are sorted by score, so the first pair seen per benchmark id is its
  // best match.
  std::vector<const SimilarityPair*> best;
  std::unordered_set<std::string> seen;
  for (const auto& p : pairs) {
    if (seen.insert(p.bench_id).second) best.push_back(&p);
  }
  auto text_of = [&](const std::unordered_map<std::string, std::string>& texts, const std::string& id,
                     std::string_view kind) {
    if (texts.empty()) return id;
    const auto it = texts.find(id);
    if (it != texts.end()) return it->second;
    out.warnings.push_back(fmt::format("no text for {} id '{}'", kind, id));
    return fmt::format("<missing {} {}>", kind, id);
  };

  std::string& t = out.table;
  t += "# counts\n";
  for (const auto& [label, n] : out.counts) t += fmt::format("pairs with score >= {}: {}\n", label, n);
  t += fmt::format("benchmark items with a match: {}\n\n", best.size());
  t += "score\tbenchmark\tcorpus\n";
  for (const auto* p : best) {
    t += fmt::format("{}\t{}\t{}\n", format_score(p->score), text_of(bench_texts, p->bench_id, "benchmark"),
                     text_of(corpus_texts, p->corpus_id, "corpus"));
  }
  return out;
}

}  // namespace corpusforge
