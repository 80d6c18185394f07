#include "corpusforge/verbalizer.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_set>

#include <fmt/format.h>

#include "builtin_data.hpp"
#include "corpusforge/io.hpp"
#include "corpusforge/random.hpp"
#include "corpusforge/split.hpp"
#include "corpusforge/text.hpp"

namespace corpusforge {

std::string_view to_string(Source s) { return s == Source::atomic ? "atomic" : "glucose"; }

json to_json(const VerbalizedSample& s) {
  return json{{"id", s.id},
              {"text", s.text},
              {"source", to_string(s.source)},
              {"source_id", s.source_id},
              {"category", s.category},
              {"relation", s.relation},
              {"split", to_string(s.split)}};
}

VerbalizedSample sample_from_json(const json& j) {
  try {
    VerbalizedSample s;
    s.id = j.at("id").get<std::uint64_t>();
    s.text = j.at("text").get<std::string>();
    const auto source = j.at("source").get<std::string>();
    if (source == "atomic") {
      s.source = Source::atomic;
    } else if (source == "glucose") {
      s.source = Source::glucose;
    } else {
      throw InputFormatError(fmt::format("unknown sample source '{}'", source));
    }
    s.source_id = j.at("source_id").get<std::uint64_t>();
    s.category = j.value("category", std::string{});
    s.relation = j.value("relation", std::string{});
    s.split = parse_split(j.value("split", std::string{"train"}));
    return s;
  } catch (const json::exception& e) {
    throw InputFormatError(fmt::format("malformed corpus record: {}", e.what()));
  } catch (const UsageError& e) {
    throw InputFormatError(fmt::format("malformed corpus record: {}", e.what()));
  }
}

bool has_blank(std::string_view text) { return text.find("__") != std::string_view::npos; }

bool is_none_target(std::string_view tail) { return iequals_ascii(trim(tail), "none"); }

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

struct Placeholder {
  std::size_t begin = 0;
  std::size_t end = 0;
  int person = 0;  // 0 = X, 1 = Y, 2 = Z
};

// Finds the next PersonX/PersonY/PersonZ (also "Person X") at or after pos.
std::optional<Placeholder> find_placeholder(std::string_view text, std::size_t pos) {
  constexpr std::string_view kPerson = "person";
  for (std::size_t i = pos; i + kPerson.size() < text.size(); ++i) {
    if (i > 0 && is_word_char(text[i - 1])) continue;
    if (!iequals_ascii(text.substr(i, kPerson.size()), kPerson)) continue;
    std::size_t j = i + kPerson.size();
    if (text[j] == ' ') ++j;
    if (j >= text.size()) continue;
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[j])));
    if (c != 'x' && c != 'y' && c != 'z') continue;
    if (j + 1 < text.size() && is_word_char(text[j + 1])) continue;
    return Placeholder{i, j + 1, c - 'x'};
  }
  return std::nullopt;
}

}  // namespace

bool has_person_placeholder(std::string_view text) { return find_placeholder(text, 0).has_value(); }

json to_json(const FilterReport& r) {
  json by_category = json::object();
  for (auto c : kCategories) {
    const auto it = r.kept_by_category.find(c);
    by_category[std::string(to_string(c))] = it == r.kept_by_category.end() ? 0 : it->second;
  }
  return json{{"input", r.input},
              {"duplicates", r.duplicates},
              {"none_targets", r.none_targets},
              {"blanks", r.blanks},
              {"kept", r.kept},
              {"kept_by_category", by_category}};
}

std::pair<std::vector<Triple>, FilterReport> filter_triples(std::span<const Triple> triples) {
  FilterReport report;
  report.input = triples.size();
  for (auto c : kCategories) report.kept_by_category[c] = 0;

  std::vector<Triple> kept;
  std::unordered_set<std::string> seen;
  seen.reserve(triples.size());
  for (const auto& t : triples) {
    std::string key;
    key.reserve(t.head.size() + t.relation.size() + t.tail.size() + 2);
    key.append(t.head).push_back('\x1f');
    key.append(t.relation).push_back('\x1f');
    key.append(t.tail);
    if (!seen.insert(std::move(key)).second) {
      ++report.duplicates;
    } else if (is_none_target(t.tail)) {
      ++report.none_targets;
    } else if (has_blank(t.head) || has_blank(t.tail)) {
      ++report.blanks;
    } else {
      ++report.kept_by_category[t.category];
      kept.push_back(t);
    }
  }
  report.kept = kept.size();
  return {std::move(kept), report};
}

const std::array<std::string_view, NameAssigner::kNameCount>& NameAssigner::default_names() {
  static constexpr std::array<std::string_view, kNameCount> kNames = {
      "Alex",  "Sam",    "Jordan",  "Taylor", "Casey",   "Riley",  "Morgan", "Jamie",  "Avery",  "Quinn",
      "Charlie", "Drew", "Emerson", "Finley", "Harper", "Jesse", "Kendall", "Logan", "Parker", "Rowan"};
  return kNames;
}

NameAssignment NameAssigner::assign(std::uint64_t sample_id) const {
  const auto& names = default_names();
  const auto base = static_cast<std::size_t>(stream_key(seed_, sample_id) % kNameCount);
  NameAssignment a;
  for (std::size_t k = 0; k < a.persons.size(); ++k) {
    a.persons[k] = std::string(names[(base + k) % kNameCount]);
  }
  return a;
}

std::string substitute_names(std::string_view text, const NameAssignment& names) {
  std::string out;
  out.reserve(text.size() + 16);
  std::size_t pos = 0;
  while (auto ph = find_placeholder(text, pos)) {
    out.append(text.substr(pos, ph->begin - pos));
    out.append(names.persons[static_cast<std::size_t>(ph->person)]);
    pos = ph->end;
  }
  out.append(text.substr(pos));
  return out;
}

std::string verbalize_parts(std::string_view head, const RelationEntry& relation, std::string_view tail,
                            const NameAssignment& names) {
  head = trim(head);
  tail = trim(tail);
  std::string text(head);
  if (relation.new_clause) {
    const bool terminated = !head.empty() && (head.back() == '.' || head.back() == '!' || head.back() == '?');
    if (!terminated) text.push_back('.');
  }
  text.push_back(' ');
  text.append(relation.template_text);
  text.push_back(' ');
  text.append(tail);
  return substitute_names(text, names);
}

VerbalizedSample verbalize_triple(const Triple& t, const RelationTable& table, const NameAssigner& names) {
  const auto* relation = table.find_template(t.relation);
  if (!relation) {
    throw std::logic_error(fmt::format("relation table {} has no template for '{}'", table.version(), t.relation));
  }
  VerbalizedSample s;
  s.id = t.id;
  s.text = verbalize_parts(t.head, *relation, t.tail, names.assign(t.id));
  s.source = Source::atomic;
  s.source_id = t.id;
  s.category = std::string(to_string(t.category));
  s.relation = t.relation;
  s.split = t.split;
  return s;
}

// ---------------------------------------------------------------------------

ConnectiveTable ConnectiveTable::from_json(const json& doc) {
  if (!doc.is_object() || doc.value("schema", "") != "corpusforge.connective-table") {
    throw InputFormatError("connective table: schema must be 'corpusforge.connective-table'");
  }
  if (!doc.contains("version") || !doc["version"].is_string() || !doc.contains("connectives") ||
      !doc["connectives"].is_array()) {
    throw InputFormatError("connective table: missing version or connectives");
  }
  ConnectiveTable table;
  table.version_ = doc["version"].get<std::string>();
  for (const auto& j : doc["connectives"]) {
    if (!j.is_object() || !j.contains("marker") || !j.contains("phrase") || !j["marker"].is_string() ||
        !j["phrase"].is_string()) {
      throw InputFormatError("connective table: entries need string 'marker' and 'phrase'");
    }
    table.entries_.emplace_back(j["marker"].get<std::string>(), j["phrase"].get<std::string>());
  }
  for (auto marker : kGlucoseConnectives) {
    const auto n = std::count_if(table.entries_.begin(), table.entries_.end(),
                                 [&](const auto& e) { return e.first == marker; });
    if (n != 1) throw InputFormatError(fmt::format("connective table: need exactly one entry for '{}'", marker));
  }
  if (table.entries_.size() != kGlucoseConnectives.size()) {
    throw InputFormatError("connective table: unexpected extra connective");
  }
  std::unordered_set<std::string> phrases;
  for (const auto& [marker, phrase] : table.entries_) {
    if (trim(phrase).empty()) throw InputFormatError(fmt::format("connective table: empty phrase for '{}'", marker));
    if (!phrases.insert(phrase).second) {
      throw InputFormatError(fmt::format("connective table: phrase '{}' is used twice", phrase));
    }
  }
  return table;
}

const ConnectiveTable& ConnectiveTable::builtin() {
  static const ConnectiveTable table = from_json(json::parse(builtin::kConnectiveTable));
  return table;
}

ConnectiveTable ConnectiveTable::load(const fs::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw InputFormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

const std::string& ConnectiveTable::phrase(std::string_view marker) const {
  for (const auto& [m, p] : entries_) {
    if (m == marker) return p;
  }
  throw std::logic_error(fmt::format("connective table {} has no phrase for '{}'", version_, marker));
}

VerbalizedSample verbalize_glucose(const GlucoseRecord& r, const ConnectiveTable& table) {
  VerbalizedSample s;
  s.id = r.id;
  s.text = fmt::format("{} {} {}", trim(r.antecedent), table.phrase(r.connective), trim(r.consequent));
  s.source = Source::glucose;
  s.source_id = r.id;
  s.category = fmt::format("dimension_{}", r.dimension);
  s.relation = r.connective;
  s.split = Split::train;
  return s;
}

GlucoseSplit split_glucose(std::vector<VerbalizedSample> samples, std::uint64_t seed) {
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<std::uint64_t> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.id);
  auto plan = plan_split(ids, seed);

  GlucoseSplit out;
  out.warnings = std::move(plan.warnings);
  out.train.reserve(plan.train_count);
  out.dev.reserve(plan.dev_count);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (plan.is_dev[i]) {
      samples[i].split = Split::dev;
      out.dev.push_back(std::move(samples[i]));
    } else {
      samples[i].split = Split::train;
      out.train.push_back(std::move(samples[i]));
    }
  }
  return out;
}

}  // namespace corpusforge
