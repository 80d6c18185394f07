#include "corpusforge/pipeline.hpp"

#include <algorithm>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "corpusforge/bench_convert.hpp"
#include "corpusforge/io.hpp"
#include "corpusforge/mlm_prep.hpp"
#include "corpusforge/overlap.hpp"
#include "corpusforge/parallel.hpp"
#include "corpusforge/text.hpp"

namespace corpusforge {

namespace {

// Collects the files of one stage directory and writes its manifest last, so
// a directory with a manifest is always complete.
class StageWriter {
 public:
  StageWriter(const PipelineConfig& config, std::string stage, fs::path dir)
      : config_(config), stage_(std::move(stage)), dir_(std::move(dir)) {
    ensure_directory(dir_);
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& rel, std::string_view content) {
    write_file_atomic(dir_ / rel, content);
    files_[rel] = json{{"sha256", sha256_hex(content)}, {"bytes", content.size()}};
  }

  template <class Fn>
  void write_lines(const std::string& rel, std::size_t n, Fn&& line) {
    AtomicWriter writer(dir_ / rel);
    Sha256 hash;
    std::size_t bytes = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::string s = line(i);
      s.push_back('\n');
      writer.write(s);
      hash.update(s);
      bytes += s.size();
    }
    writer.commit();
    files_[rel] = json{{"sha256", hash.hex_digest()}, {"bytes", bytes}, {"lines", n}};
  }

  void add_input(std::string role, const fs::path& path, std::string sha) {
    inputs_.push_back(json{{"role", std::move(role)}, {"path", path.generic_string()}, {"sha256", std::move(sha)}});
  }

  void warn(std::string w) {
    spdlog::warn("{}: {}", stage_, w);
    warnings_.push_back(std::move(w));
  }

  StageResult finish(json counts, json extra = json::object()) {
    write_file_atomic(dir_ / "config.resolved.json", to_json(config_).dump(2) + "\n");
    json manifest{
        {"tool", kToolName},
        {"version", kToolVersion},
        {"stage", stage_},
        {"seed", config_.seed},
        {"config", "config.resolved.json"},
        {"config_sha256", config_digest(config_)},
        {"inputs", inputs_},
        {"counts", std::move(counts)},
        {"files", files_},
        {"warnings", warnings_},
    };
    manifest.update(extra);
    write_file_atomic(dir_ / "manifest.json", manifest.dump(2) + "\n");
    spdlog::info("{}: wrote {}", stage_, dir_.string());
    return StageResult{stage_, dir_, std::move(manifest), false, {}};
  }

 private:
  const PipelineConfig& config_;
  std::string stage_;
  fs::path dir_;
  json files_ = json::object();
  json inputs_ = json::array();
  json warnings_ = json::array();
};

StageResult skipped(std::string stage, std::string reason) {
  spdlog::info("{}: skipped ({})", stage, reason);
  return StageResult{std::move(stage), {}, json::object(), true, std::move(reason)};
}

// The files load_atomic reads for this config, for input hashing.
std::vector<fs::path> atomic_files(const PipelineConfig& c) {
  if (!fs::is_directory(c.atomic_path)) return {c.atomic_path};
  std::vector<fs::path> files;
  for (auto split : c.atomic_splits) {
    const auto tsv = c.atomic_path / fmt::format("{}.tsv", to_string(split));
    files.push_back(fs::exists(tsv) ? tsv : c.atomic_path / fmt::format("{}.jsonl", to_string(split)));
  }
  return files;
}

std::string id_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

// JSONL of {"id", "text"} (or "premise" for converted choice instances).
std::unordered_map<std::string, std::string> load_texts(const fs::path& path) {
  std::unordered_map<std::string, std::string> texts;
  if (path.empty()) return texts;
  const auto data = read_file(path);
  const auto lines = split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      const auto j = json::parse(lines[i]);
      const auto& text = j.contains("text") ? j.at("text") : j.at("premise");
      texts[id_string(j.at("id"))] = text.get<std::string>();
    } catch (const json::exception& e) {
      throw InputFormatError(fmt::format("{}:{}: expected {{\"id\", \"text\"}}: {}", path.filename().string(), i + 1, e.what()));
    }
  }
  return texts;
}

std::unique_ptr<GrammarChecker> make_checker(const CheckerConfig& c) {
  if (c.kind == "subprocess") return std::make_unique<SubprocessChecker>(c.command);
  if (c.kind == "http") {
    return std::make_unique<HttpChecker>(c.url, c.language, c.max_in_flight, std::chrono::seconds(c.timeout_s));
  }
  return nullptr;
}

}  // namespace

LengthStats length_stats(std::span<const VerbalizedSample> samples, std::size_t max_tokens) {
  LengthStats s;
  for (const auto& sample : samples) {
    const auto n = whitespace_token_count(sample.text);
    ++s.samples;
    s.within += n <= max_tokens;
    ++s.histogram[n];
  }
  return s;
}

struct Pipeline::State {
  std::optional<RelationTable> relations;
  std::optional<ConnectiveTable> connectives;
  std::optional<AtomicLoad> atomic;
  std::optional<GlucoseLoad> glucose;
  std::optional<std::vector<Corpus>> verbalized;
  std::optional<FilterReport> filter_report;
  json verbalize_counts = json::object();
  std::vector<std::string> verbalize_warnings;

  std::optional<std::vector<Corpus>> normalized;
  json grammar_counts = json::object();
  json checker_info = json::object();
  std::vector<std::string> grammar_warnings;
  // Per corpus: one JSON line per sentence with issues.
  std::map<std::string, std::vector<std::string>> issue_lines;

  std::shared_ptr<const SubwordVocab> vocab;
  std::map<fs::path, std::string> hashes;

  const std::string& hash(const fs::path& p) {
    auto it = hashes.find(p);
    if (it == hashes.end()) it = hashes.emplace(p, sha256_file(p)).first;
    return it->second;
  }
};

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)), state_(std::make_unique<State>()) {}
Pipeline::~Pipeline() = default;

bool Pipeline::has_corpus_inputs() const { return !config_.atomic_path.empty() || !config_.glucose_path.empty(); }

const RelationTable& Pipeline::relations() {
  if (!state_->relations) {
    state_->relations = config_.relation_table.empty() ? RelationTable::builtin() : RelationTable::load(config_.relation_table);
  }
  return *state_->relations;
}

const ConnectiveTable& Pipeline::connectives() {
  if (!state_->connectives) {
    state_->connectives =
        config_.connective_table.empty() ? ConnectiveTable::builtin() : ConnectiveTable::load(config_.connective_table);
  }
  return *state_->connectives;
}

std::shared_ptr<const SubwordVocab> Pipeline::vocab() {
  if (!state_->vocab) {
    if (config_.vocab_path.empty()) throw UsageError("mlm.vocab.path is not configured");
    if (config_.vocab_kind == "bpe") {
      if (config_.merges_path.empty()) throw UsageError("mlm.vocab.merges is required for a bpe vocabulary");
      state_->vocab = std::make_shared<SubwordVocab>(SubwordVocab::load_bpe(config_.vocab_path, config_.merges_path));
    } else {
      state_->vocab =
          std::make_shared<SubwordVocab>(SubwordVocab::load_wordpiece(config_.vocab_path, config_.vocab_lowercase));
    }
  }
  return state_->vocab;
}

std::vector<StageResult> Pipeline::run(std::string_view stage) {
  if (stage == "ingest") return {ingest()};
  if (stage == "verbalize") return {verbalize()};
  if (stage == "grammar") return {grammar()};
  if (stage == "mlm-prep") return {mlm_prep()};
  if (stage == "convert-copa") return {convert_copa()};
  if (stage == "convert-tcr") return {convert_tcr()};
  if (stage == "stats") return {stats()};
  if (stage == "overlap") return {overlap()};
  if (stage != "all") throw UsageError(fmt::format("unknown stage '{}'", stage));

  const bool corpus = has_corpus_inputs();
  const bool benchmarks = !config_.copa_files.empty() || !config_.tcr_files.empty();
  const bool embeddings = !config_.overlap_bench.empty() && !config_.overlap_corpus.empty();
  if (!corpus && !benchmarks && !embeddings) {
    throw UsageError("nothing to do: configure atomic/glucose inputs, benchmark files or overlap embeddings");
  }
  std::vector<StageResult> results;
  if (corpus) {
    results.push_back(ingest());
    results.push_back(verbalize());
    results.push_back(grammar());
    results.push_back(config_.vocab_path.empty() ? skipped("mlm-prep", "no vocabulary configured") : mlm_prep());
  }
  results.push_back(config_.copa_files.empty() ? skipped("convert-copa", "no COPA files configured") : convert_copa());
  results.push_back(config_.tcr_files.empty() ? skipped("convert-tcr", "no TCR files configured") : convert_tcr());
  if (corpus) results.push_back(stats());
  results.push_back(embeddings ? overlap() : skipped("overlap", "no embeddings configured"));
  return results;
}

StageResult Pipeline::ingest() {
  if (!has_corpus_inputs()) throw UsageError("ingest needs atomic.path or glucose.path");
  auto& st = *state_;
  StageWriter w(config_, "ingest", config_.out / "ingest");
  json counts = json::object();

  if (!config_.atomic_path.empty()) {
    if (!st.atomic) st.atomic = load_atomic(config_.atomic_path, config_.atomic_splits, relations(), config_.workers);
    for (const auto& f : atomic_files(config_)) w.add_input("atomic", f, st.hash(f));
    const auto& load = *st.atomic;
    w.write_lines("atomic_triples.jsonl", load.triples.size(), [&](std::size_t i) { return to_json(load.triples[i]).dump(); });
    w.write("atomic_rejects.jsonl", rejects_to_jsonl(load.rejects));
    counts["atomic"] = {{"input_rows", load.input_rows}, {"loaded", load.triples.size()}, {"rejected", load.rejects.size()}};
    if (!load.rejects.empty()) w.warn(fmt::format("{} ATOMIC rows rejected", load.rejects.size()));
  }
  if (!config_.glucose_path.empty()) {
    if (!st.glucose) st.glucose = load_glucose(config_.glucose_path);
    w.add_input("glucose", config_.glucose_path, st.hash(config_.glucose_path));
    const auto& load = *st.glucose;
    w.write_lines("glucose_records.jsonl", load.records.size(), [&](std::size_t i) { return to_json(load.records[i]).dump(); });
    w.write("glucose_rejects.jsonl", rejects_to_jsonl(load.rejects));
    counts["glucose"] = {{"input_statements", load.input_statements},
                         {"loaded", load.records.size()},
                         {"rejected", load.rejects.size()},
                         {"empty_cells", load.empty_cells}};
    if (!load.rejects.empty()) w.warn(fmt::format("{} GLUCOSE statements rejected", load.rejects.size()));
  }
  return w.finish(counts, {{"relation_table_version", relations().version()}});
}

const std::vector<Corpus>& Pipeline::verbalized() {
  auto& st = *state_;
  if (st.verbalized) return *st.verbalized;
  if (!has_corpus_inputs()) throw UsageError("no corpus inputs: set atomic.path or glucose.path");

  std::vector<Corpus> out;
  if (!config_.atomic_path.empty()) {
    if (!st.atomic) st.atomic = load_atomic(config_.atomic_path, config_.atomic_splits, relations(), config_.workers);
    auto [kept, report] = filter_triples(st.atomic->triples);
    const auto& table = relations();
    const NameAssigner names(config_.seed);
    Corpus c{"atomic", table.version(), {}};
    c.samples = parallel_map(kept.size(), config_.workers,
                             [&](std::size_t i) { return verbalize_triple(kept[i], table, names); });
    std::sort(c.samples.begin(), c.samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    st.verbalize_counts["atomic"] = {{"filter", to_json(report)}, {"samples", c.samples.size()}};
    st.filter_report = report;
    out.push_back(std::move(c));
  }
  if (!config_.glucose_path.empty()) {
    if (!st.glucose) st.glucose = load_glucose(config_.glucose_path);
    std::vector<const GlucoseRecord*> selected;
    for (const auto& r : st.glucose->records) {
      const bool keep = r.specificity == Specificity::specific ? config_.glucose_specific : config_.glucose_general;
      if (keep) selected.push_back(&r);
    }
    const auto& table = connectives();
    auto samples = parallel_map(selected.size(), config_.workers,
                                [&](std::size_t i) { return verbalize_glucose(*selected[i], table); });
    auto split = split_glucose(std::move(samples), config_.seed);
    for (auto& w : split.warnings) st.verbalize_warnings.push_back("glucose: " + w);
    st.verbalize_counts["glucose"] = {{"records", st.glucose->records.size()},
                                      {"selected", selected.size()},
                                      {"train", split.train.size()},
                                      {"dev", split.dev.size()}};
    Corpus c{"glucose", table.version(), std::move(split.train)};
    std::move(split.dev.begin(), split.dev.end(), std::back_inserter(c.samples));
    std::sort(c.samples.begin(), c.samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    out.push_back(std::move(c));
  }

  for (const auto& c : out) {
    std::size_t violations = 0;
    for (const auto& s : c.samples) violations += s.text.empty() || has_blank(s.text) || has_person_placeholder(s.text);
    st.verbalize_counts[c.name]["invariant_violations"] = violations;
    if (violations) {
      st.verbalize_warnings.push_back(
          fmt::format("{}: {} samples contain a blank or an unresolved placeholder", c.name, violations));
    }
  }
  st.verbalized = std::move(out);
  return *st.verbalized;
}

namespace {

void write_corpus(StageWriter& w, const Corpus& c, bool with_text) {
  for (auto split : {Split::train, Split::dev}) {
    std::vector<const VerbalizedSample*> part;
    for (const auto& s : c.samples) {
      if (s.split == split) part.push_back(&s);
    }
    const auto base = fmt::format("{}/{}", c.name, to_string(split));
    w.write_lines(base + ".jsonl", part.size(), [&](std::size_t i) { return to_json(*part[i]).dump(); });
    if (with_text) w.write_lines(base + ".txt", part.size(), [&](std::size_t i) { return part[i]->text; });
  }
}

json split_counts(const Corpus& c) {
  std::size_t dev = 0;
  for (const auto& s : c.samples) dev += s.split == Split::dev;
  return {{"train", c.samples.size() - dev}, {"dev", dev}};
}

}  // namespace

StageResult Pipeline::verbalize() {
  const auto& corpora = verbalized();
  StageWriter w(config_, "verbalize", config_.out / "verbalize");
  if (!config_.atomic_path.empty()) {
    for (const auto& f : atomic_files(config_)) w.add_input("atomic", f, state_->hash(f));
  }
  if (!config_.glucose_path.empty()) w.add_input("glucose", config_.glucose_path, state_->hash(config_.glucose_path));
  json counts = state_->verbalize_counts;
  json versions = json::object();
  for (const auto& c : corpora) {
    write_corpus(w, c, false);
    counts[c.name].update(split_counts(c));
    versions[c.name] = c.template_version;
  }
  for (const auto& warning : state_->verbalize_warnings) w.warn(warning);
  return w.finish(counts, {{"template_versions", versions}});
}

const std::vector<Corpus>& Pipeline::corpora() {
  auto& st = *state_;
  if (st.normalized) return *st.normalized;
  auto out = verbalized();
  const auto& rules = RuleSet::standard();
  auto checker = make_checker(config_.checker);
  st.checker_info = {{"kind", config_.checker.kind}, {"apply_suggestions", config_.checker.apply_suggestions}};
  if (checker) st.checker_info["endpoint"] = checker->describe();

  for (auto& c : out) {
    const auto normalized =
        parallel_map(c.samples.size(), config_.workers, [&](std::size_t i) { return rules.apply(c.samples[i].text); });
    std::size_t changed = 0;
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      changed += normalized[i] != c.samples[i].text;
      c.samples[i].text = normalized[i];
    }
    json counts{{"samples", c.samples.size()}, {"changed_by_rules", changed}};

    if (checker) {
      std::vector<std::string> texts;
      texts.reserve(c.samples.size());
      for (const auto& s : c.samples) texts.push_back(s.text);
      const auto report = check_external(texts, *checker, config_.checker.apply_suggestions, config_.checker.batch_size);
      st.checker_info["available"] = report.checker_available;
      for (const auto& warning : report.warnings) st.grammar_warnings.push_back(warning);
      std::size_t flagged = 0, applied = 0;
      auto& lines = st.issue_lines[c.name];
      for (std::size_t i = 0; i < c.samples.size(); ++i) {
        const auto& checked = report.sentences[i];
        if (!checked.issues.empty()) {
          ++flagged;
          json issues = json::array();
          for (const auto& issue : checked.issues) issues.push_back(to_json(issue));
          lines.push_back(json{{"id", c.samples[i].id}, {"text", checked.input}, {"issues", issues}}.dump());
        }
        if (checked.output != c.samples[i].text) {
          ++applied;
          c.samples[i].text = checked.output;
        }
      }
      counts["sentences_with_issues"] = flagged;
      counts["suggestions_applied"] = applied;
    }
    st.grammar_counts[c.name] = counts;
  }
  st.normalized = std::move(out);
  return *st.normalized;
}

StageResult Pipeline::grammar() {
  const auto& corpora = this->corpora();
  StageWriter w(config_, "grammar", config_.out / "corpus");
  json counts = state_->grammar_counts;
  for (const auto& c : corpora) {
    write_corpus(w, c, true);
    counts[c.name].update(split_counts(c));
    if (config_.checker.kind != "none") {
      const auto& lines = state_->issue_lines[c.name];
      w.write_lines(c.name + "/checker_issues.jsonl", lines.size(), [&](std::size_t i) { return lines[i]; });
    }
  }
  for (const auto& warning : state_->grammar_warnings) w.warn(warning);
  return w.finish(counts, {{"rules_version", RuleSet::standard().version()}, {"checker", state_->checker_info}});
}

StageResult Pipeline::mlm_prep() {
  const auto& corpora = this->corpora();
  const auto v = vocab();
  const Tokenizer tokenizer(v);
  json datasets = json::object();
  StageResult last;
  for (const auto& c : corpora) {
    const auto dir = config_.out / "mlm" / c.name;
    EmitOptions options{c.name, c.template_version, config_.workers};
    EmitStats stats;
    auto manifest = emit_dataset(c.samples, tokenizer, config_.seed, config_.policy, dir, options, &stats);

    // Extend the dataset manifest with the provenance every stage records.
    json inputs = json::array();
    inputs.push_back({{"role", "vocab"}, {"path", config_.vocab_path.generic_string()}, {"sha256", state_->hash(config_.vocab_path)}});
    if (config_.vocab_kind == "bpe") {
      inputs.push_back(
          {{"role", "merges"}, {"path", config_.merges_path.generic_string()}, {"sha256", state_->hash(config_.merges_path)}});
    }
    Sha256 corpus_hash;
    for (const auto& s : c.samples) {
      corpus_hash.update(to_json(s).dump());
      corpus_hash.update("\n");
    }
    inputs.push_back({{"role", "corpus"}, {"path", (config_.out / "corpus" / c.name).generic_string()},
                      {"sha256", corpus_hash.hex_digest()}});
    manifest["stage"] = "mlm-prep";
    manifest["inputs"] = inputs;
    manifest["config"] = "config.resolved.json";
    manifest["config_sha256"] = config_digest(config_);
    manifest["rules_version"] = RuleSet::standard().version();
    write_file_atomic(dir / "config.resolved.json", to_json(config_).dump(2) + "\n");
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    spdlog::info("mlm-prep: wrote {} ({} train, {} dev, {} truncated)", dir.string(), stats.train, stats.dev,
                 stats.truncated);
    if (stats.zero_maskable) spdlog::warn("mlm-prep: {} examples had no maskable token", stats.zero_maskable);
    datasets[c.name] = manifest;
  }
  return StageResult{"mlm-prep", config_.out / "mlm", datasets, false, {}};
}

StageResult Pipeline::convert_copa() {
  if (config_.copa_files.empty()) throw UsageError("convert-copa needs copa.files");
  StageWriter w(config_, "convert-copa", config_.out / "copa");
  json counts = json::object();
  for (const auto& f : config_.copa_files) {
    auto instances = load_copa(f.path);
    w.add_input(f.name, f.path, state_->hash(f.path));
    if (!f.subset_index.empty()) {
      w.add_input(f.name + ":subset_index", f.subset_index, state_->hash(f.subset_index));
      auto tagged = tag_easy_hard(std::move(instances), load_subset_index(f.subset_index));
      for (auto& warning : tagged.warnings) w.warn(fmt::format("{}: {}", f.name, warning));
      instances = std::move(tagged.instances);
    }
    if (config_.copa_prompt) {
      for (auto& inst : instances) inst = add_prompt(std::move(inst));
    }
    std::size_t cause = 0, easy = 0, hard = 0;
    for (const auto& inst : instances) {
      cause += inst.asks_for == AsksFor::cause;
      easy += inst.subset == Subset::easy;
      hard += inst.subset == Subset::hard;
    }
    w.write_lines(f.name + ".jsonl", instances.size(), [&](std::size_t i) { return to_json(instances[i]).dump(); });
    w.write(f.name + ".swag.csv", to_swag_csv(instances));
    json entry{{"instances", instances.size()},
               {"cause", cause},
               {"effect", instances.size() - cause},
               {"easy", easy},
               {"hard", hard}};
    if (f.tuning_split) {
      const auto split = tuning_split(instances, config_.seed);
      for (const auto& [suffix, part] : {std::pair{"tune-train", &split.train}, std::pair{"tune-dev", &split.dev}}) {
        const auto& items = *part;
        w.write_lines(fmt::format("{}.{}.jsonl", f.name, suffix), items.size(),
                      [&](std::size_t i) { return to_json(items[i]).dump(); });
        w.write(fmt::format("{}.{}.swag.csv", f.name, suffix), to_swag_csv(items));
      }
      entry["tune_train"] = split.train.size();
      entry["tune_dev"] = split.dev.size();
    }
    counts[f.name] = entry;
  }
  return w.finish(counts, {{"prompt", config_.copa_prompt},
                           {"prompts", {{"cause", kCausePrompt}, {"effect", kEffectPrompt}}}});
}

StageResult Pipeline::convert_tcr() {
  if (config_.tcr_files.empty()) throw UsageError("convert-tcr needs tcr.files");
  StageWriter w(config_, "convert-tcr", config_.out / "tcr");
  json counts = json::object();
  for (const auto& f : config_.tcr_files) {
    const auto load = load_tcr(f.path);
    w.add_input(f.name, f.path, state_->hash(f.path));
    const auto lines = parallel_map(load.instances.size(), config_.workers,
                                    [&](std::size_t i) { return to_json(load.instances[i], config_.markers).dump(); });
    w.write_lines(f.name + ".jsonl", lines.size(), [&](std::size_t i) { return lines[i]; });
    w.write(f.name + ".rejects.jsonl", rejects_to_jsonl(load.rejects));
    std::map<std::string, std::size_t> labels;
    for (const auto& inst : load.instances) ++labels[inst.label];
    counts[f.name] = {{"instances", load.instances.size()}, {"rejected", load.rejects.size()}, {"labels", labels}};
    if (!load.rejects.empty()) w.warn(fmt::format("{}: {} records rejected", f.name, load.rejects.size()));
  }
  const auto& m = config_.markers;
  return w.finish(counts, {{"markers", {{"e1_open", m.e1_open}, {"e1_close", m.e1_close}, {"e2_open", m.e2_open},
                                        {"e2_close", m.e2_close}}}});
}

StageResult Pipeline::stats() {
  const auto& corpora = this->corpora();
  StageWriter w(config_, "stats", config_.out / "stats");
  const auto max_tokens = config_.stats_max_tokens;

  std::vector<VerbalizedSample> all;
  std::string relations_tsv = "dataset\tgroup\trelation\tcount\tpercent\n";
  std::string lengths_tsv = "dataset\ttokens\tcount\n";
  json per_corpus = json::object();
  for (const auto& c : corpora) {
    std::map<std::pair<std::string, std::string>, std::size_t> dist;
    for (const auto& s : c.samples) ++dist[{s.category, s.relation}];
    for (const auto& [key, n] : dist) {
      const double pct = 100.0 * static_cast<double>(n) / static_cast<double>(c.samples.size());
      relations_tsv += fmt::format("{}\t{}\t{}\t{}\t{:.2f}\n", c.name, key.first, key.second, n, pct);
    }
    const auto ls = length_stats(c.samples, max_tokens);
    for (const auto& [len, n] : ls.histogram) lengths_tsv += fmt::format("{}\t{}\t{}\n", c.name, len, n);
    per_corpus[c.name] = {{"samples", ls.samples}, {"within_max_tokens", ls.within}, {"fraction_within", ls.fraction_within()}};
    all.insert(all.end(), c.samples.begin(), c.samples.end());
  }
  const auto total = length_stats(all, max_tokens);
  const bool claim_holds = total.fraction_within() >= config_.stats_length_target;
  json length_claim{{"max_tokens", max_tokens},
                    {"samples", total.samples},
                    {"within", total.within},
                    {"fraction_within", total.fraction_within()},
                    {"target", config_.stats_length_target},
                    {"holds", claim_holds}};
  if (!claim_holds) {
    w.warn(fmt::format("only {:.4f}% of samples have <= {} whitespace tokens (target {:.2f}%)",
                       100.0 * total.fraction_within(), max_tokens, 100.0 * config_.stats_length_target));
  }

  json extra{{"length_claim", length_claim}, {"per_corpus", per_corpus}};
  if (!config_.vocab_path.empty()) {
    const Tokenizer tokenizer(vocab());
    const auto lengths = parallel_map(all.size(), config_.workers,
                                      [&](std::size_t i) { return tokenizer.tokenize(all[i].text).size(); });
    const auto over = static_cast<std::size_t>(
        std::count_if(lengths.begin(), lengths.end(), [&](std::size_t n) { return n > config_.policy.max_seq_len; }));
    extra["subword_truncation"] = {{"max_seq_len", config_.policy.max_seq_len},
                                   {"truncated", over},
                                   {"fraction", all.empty() ? 0.0 : static_cast<double>(over) / static_cast<double>(all.size())}};
  }

  std::string summary = fmt::format("samples: {}\n", total.samples);
  summary += fmt::format("samples with <= {} whitespace tokens: {} ({:.4f}%), target {:.2f}%: {}\n", max_tokens,
                         total.within, 100.0 * total.fraction_within(), 100.0 * config_.stats_length_target,
                         claim_holds ? "met" : "NOT met");
  summary += "\nrelation distribution\n" + relations_tsv + "\nlength histogram\n" + lengths_tsv;

  w.write("relations.tsv", relations_tsv);
  w.write("lengths.tsv", lengths_tsv);
  w.write("summary.txt", summary);
  json counts = per_corpus;
  counts["all"] = {{"samples", total.samples}, {"within_max_tokens", total.within}};
  return w.finish(counts, extra);
}

StageResult Pipeline::overlap() {
  if (config_.overlap_bench.empty() || config_.overlap_corpus.empty()) {
    throw UsageError("overlap needs overlap.bench and overlap.corpus embedding files");
  }
  StageWriter w(config_, "overlap", config_.out / "overlap");
  const auto bench = load_embeddings(config_.overlap_bench);
  const auto corpus = load_embeddings(config_.overlap_corpus);
  w.add_input("bench_embeddings", config_.overlap_bench, state_->hash(config_.overlap_bench));
  w.add_input("corpus_embeddings", config_.overlap_corpus, state_->hash(config_.overlap_corpus));
  if (!bench.source.empty() && !corpus.source.empty() && bench.source != corpus.source) {
    w.warn(fmt::format("embeddings come from different encoders ('{}' vs '{}')", bench.source, corpus.source));
  }

  PairOptions options;
  options.angular_prefilter = config_.overlap_prefilter;
  options.workers = config_.workers;
  options.bench_subset.insert(config_.overlap_bench_subset.begin(), config_.overlap_bench_subset.end());
  const auto pairs = pairs_above(bench, corpus, config_.overlap_thresholds.front(), options);

  const auto bench_texts = load_texts(config_.overlap_bench_texts);
  const auto corpus_texts = load_texts(config_.overlap_corpus_texts);
  if (!config_.overlap_bench_texts.empty()) {
    w.add_input("bench_texts", config_.overlap_bench_texts, state_->hash(config_.overlap_bench_texts));
  }
  if (!config_.overlap_corpus_texts.empty()) {
    w.add_input("corpus_texts", config_.overlap_corpus_texts, state_->hash(config_.overlap_corpus_texts));
  }
  auto rep = report(pairs, config_.overlap_thresholds, bench_texts, corpus_texts);
  // A missing text only matters when texts were supplied at all.
  if (!bench_texts.empty() || !corpus_texts.empty()) {
    for (auto& warning : rep.warnings) w.warn(std::move(warning));
  }
  w.write("pairs.jsonl", rep.jsonl);
  w.write("report.txt", rep.table);
  json counts{{"bench", bench.size()}, {"corpus", corpus.size()}, {"pairs", rep.counts}};
  return w.finish(counts, {{"dim", bench.dim}, {"encoder", bench.source}, {"thresholds", config_.overlap_thresholds}});
}

}  // namespace corpusforge
