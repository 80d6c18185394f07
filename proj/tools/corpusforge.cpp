#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "corpusforge/config.hpp"
#include "corpusforge/io.hpp"
#include "corpusforge/pipeline.hpp"

namespace cf = corpusforge;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out;
  std::vector<std::string> set;
  bool verbose = false;
  bool quiet = false;

  std::string atomic;
  std::string glucose;
  bool general_only = false;
  bool specific_only = false;

  std::string checker_command;
  std::string checker_url;
  bool apply_suggestions = false;

  std::string vocab;
  std::string merges;
  std::string vocab_kind;
  bool whole_word = false;
  std::optional<std::size_t> max_seq_len;

  std::vector<std::string> copa;
  bool no_prompt = false;
  bool tuning_split = false;
  std::string subset_index;

  std::vector<std::string> tcr;

  std::string bench;
  std::string corpus;
  std::string bench_texts;
  std::string corpus_texts;
  std::vector<double> thresholds;
  bool prefilter = false;
  std::vector<std::string> bench_subset;
};

void add_corpus_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--atomic", f.atomic, "ATOMIC-2020 directory ({train,dev}.tsv) or single split file");
  cmd->add_option("--glucose", f.glucose, "GLUCOSE CSV release or JSONL intermediate file");
  cmd->add_flag("--general-only", f.general_only, "Use only the GLUCOSE general rules");
  cmd->add_flag("--specific-only", f.specific_only, "Use only the GLUCOSE specific statements");
}

void add_vocab_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--vocab", f.vocab, "vocab.txt (WordPiece) or vocab.json (byte-level BPE)");
  cmd->add_option("--merges", f.merges, "merges.txt for a byte-level BPE vocabulary");
  cmd->add_option("--vocab-kind", f.vocab_kind, "wordpiece or bpe")->check(CLI::IsMember({"wordpiece", "bpe"}));
}

std::vector<std::string> assignments(const Flags& f) {
  std::vector<std::string> a = f.set;
  auto add = [&](const char* key, const std::string& value) {
    if (!value.empty()) a.push_back(fmt::format("{}={}", key, value));
  };
  if (f.seed) a.push_back(fmt::format("seed={}", *f.seed));
  if (f.workers) a.push_back(fmt::format("workers={}", *f.workers));
  add("out", f.out);
  add("atomic.path", f.atomic);
  add("glucose.path", f.glucose);
  if (f.general_only) a.push_back("glucose.include_specific=false");
  if (f.specific_only) a.push_back("glucose.include_general=false");
  if (!f.checker_command.empty()) {
    a.push_back("grammar.checker.kind=subprocess");
    add("grammar.checker.command", f.checker_command);
  }
  if (!f.checker_url.empty()) {
    a.push_back("grammar.checker.kind=http");
    add("grammar.checker.url", f.checker_url);
  }
  if (f.apply_suggestions) a.push_back("grammar.apply_suggestions=true");
  add("mlm.vocab.path", f.vocab);
  add("mlm.vocab.merges", f.merges);
  add("mlm.vocab.kind", f.vocab_kind);
  if (f.whole_word) a.push_back("mlm.policy.whole_word=true");
  if (f.max_seq_len) a.push_back(fmt::format("mlm.policy.max_seq_len={}", *f.max_seq_len));
  if (!f.copa.empty()) {
    cf::json files = cf::json::array();
    for (const auto& p : f.copa) {
      files.push_back({{"path", cf::fs::absolute(p).lexically_normal().generic_string()},
                       {"tuning_split", f.tuning_split},
                       {"subset_index", f.subset_index.empty() ? std::string{} : cf::fs::absolute(f.subset_index).generic_string()}});
    }
    a.push_back("copa.files=" + files.dump());
  }
  if (f.no_prompt) a.push_back("copa.prompt=false");
  if (!f.tcr.empty()) {
    cf::json files = cf::json::array();
    for (const auto& p : f.tcr) files.push_back({{"path", cf::fs::absolute(p).lexically_normal().generic_string()}});
    a.push_back("tcr.files=" + files.dump());
  }
  add("overlap.bench", f.bench);
  add("overlap.corpus", f.corpus);
  add("overlap.bench_texts", f.bench_texts);
  add("overlap.corpus_texts", f.corpus_texts);
  if (!f.thresholds.empty()) a.push_back("overlap.thresholds=" + cf::json(f.thresholds).dump());
  if (f.prefilter) a.push_back("overlap.prefilter=true");
  if (!f.bench_subset.empty()) a.push_back("overlap.bench_subset=" + cf::json(f.bench_subset).dump());
  return a;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph verbalization, MLM data preparation and benchmark conversion", "corpusforge"};
  app.set_version_flag("--version", std::string(cf::kToolVersion));
  app.require_subcommand(1, 1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "JSON config file (CORPUSFORGE_* environment variables override it)");
  app.add_option("--seed", f.seed, "Global random seed");
  app.add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--set", f.set, "Override a config key, e.g. --set mlm.policy.whole_word=true");
  app.add_flag("-v,--verbose", f.verbose, "Debug logging");
  app.add_flag("-q,--quiet", f.quiet, "Only log warnings and errors");

  auto* ingest = app.add_subcommand("ingest", "Load ATOMIC-2020 / GLUCOSE into validated records with reject logs");
  add_corpus_flags(ingest, f);

  auto* verbalize = app.add_subcommand("verbalize", "Filter and verbalize records; split GLUCOSE 90/10");
  add_corpus_flags(verbalize, f);

  auto* grammar = app.add_subcommand("grammar", "Normalize the verbalized corpus; optionally run an external checker");
  add_corpus_flags(grammar, f);
  grammar->add_option("--checker-command", f.checker_command, "Line-protocol checker command");
  grammar->add_option("--checker-url", f.checker_url, "LanguageTool-compatible server URL");
  grammar->add_flag("--apply-suggestions", f.apply_suggestions, "Apply each issue's first suggested replacement");

  auto* mlm = app.add_subcommand("mlm-prep", "Emit masked-language-model train/dev datasets");
  add_corpus_flags(mlm, f);
  add_vocab_flags(mlm, f);
  mlm->add_flag("--whole-word", f.whole_word, "Mask whole words");
  mlm->add_option("--max-seq-len", f.max_seq_len, "Positions per example, delimiters included");

  auto* copa = app.add_subcommand("convert-copa", "Convert COPA / BCOPA-CE XML to multiple-choice instances");
  copa->add_option("--copa", f.copa, "COPA-format XML file (repeatable)");
  copa->add_flag("--no-prompt", f.no_prompt, "Do not prefix choices with the ask-for prompt");
  copa->add_flag("--tuning-split", f.tuning_split, "Also write the seeded 90/10 tuning split");
  copa->add_option("--subset-index", f.subset_index, "Easy/Hard index JSON");

  auto* tcr = app.add_subcommand("convert-tcr", "Convert TCR JSONL to relation instances with event markers");
  tcr->add_option("--tcr", f.tcr, "TCR intermediate JSONL file (repeatable)");

  auto* stats = app.add_subcommand("stats", "Relation distribution and whitespace-token length histogram");
  add_corpus_flags(stats, f);
  add_vocab_flags(stats, f);

  auto* overlap = app.add_subcommand("overlap", "Cosine-similarity pairs between benchmark and corpus embeddings");
  overlap->add_option("--bench", f.bench, "Benchmark embeddings (JSONL or CFEMB1 binary)");
  overlap->add_option("--corpus", f.corpus, "Corpus embeddings (JSONL or CFEMB1 binary)");
  overlap->add_option("--bench-texts", f.bench_texts, "JSONL {id, text} for benchmark items");
  overlap->add_option("--corpus-texts", f.corpus_texts, "JSONL {id, text} for corpus entries");
  overlap->add_option("--threshold", f.thresholds, "Score threshold (repeatable)");
  overlap->add_flag("--prefilter", f.prefilter, "Use the exact angular pre-filter");
  overlap->add_option("--bench-subset", f.bench_subset, "Restrict to these benchmark ids");

  auto* all = app.add_subcommand("all", "Run every configured stage in order");
  add_corpus_flags(all, f);
  add_vocab_flags(all, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(cf::ExitCode::usage);
  }

  auto logger = spdlog::stderr_color_mt("corpusforge");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^[%l]%$ %v");
  spdlog::set_level(f.verbose ? spdlog::level::debug : f.quiet ? spdlog::level::warn : spdlog::level::info);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    cf::ConfigSources sources;
    if (!f.config.empty()) sources.file = f.config;
    sources.env = cf::current_environment();
    sources.assignments = assignments(f);
    cf::Pipeline pipeline(cf::resolve_config(sources));
    for (const auto& r : pipeline.run(stage)) {
      if (r.skipped) {
        fmt::print("{}: skipped ({})\n", r.stage, r.skip_reason);
      } else {
        fmt::print("{}: {}\n", r.stage, r.dir.string());
      }
      if (r.stage == "stats" && !r.skipped) std::cout << cf::read_file(r.dir / "summary.txt");
    }
    return 0;
  } catch (const cf::Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(cf::ExitCode::failure);
  }
}
