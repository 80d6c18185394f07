// Acceptance suite: one PASS/FAIL/SKIP line per primary criterion.
//
//   corpusforge_acceptance                 run everything, release checks skip without data
//   corpusforge_acceptance --only NAME     run one criterion; exit 77 when it is skipped
//
// Release checks read CF_ATOMIC2020_DIR (directory with train.tsv/dev.tsv)
// and CF_GLUCOSE_CSV (GLUCOSE_training_data_final.csv).

#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "corpusforge/bench_convert.hpp"
#include "corpusforge/io.hpp"
#include "corpusforge/kg_ingest.hpp"
#include "corpusforge/mlm_prep.hpp"
#include "corpusforge/overlap.hpp"
#include "corpusforge/pipeline.hpp"
#include "corpusforge/verbalizer.hpp"

namespace cf = corpusforge;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip, excluded };

struct Outcome {
  Status status;
  std::string detail;
};

fs::path data(const std::string& rel) { return fs::path(CF_TEST_DATA_DIR) / rel; }

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() / fmt::format("cf-accept-{}-{}-{}", ::getpid(), tag, counter++);
    fs::remove_all(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

cf::PipelineConfig fixture_config(const fs::path& out, unsigned workers) {
  cf::PipelineConfig c;
  c.out = out;
  c.workers = workers;
  c.atomic_path = data("atomic");
  c.glucose_path = data("glucose/glucose_3x10.csv");
  c.vocab_path = data("vocab/wordpiece/vocab.txt");
  c.copa_files.push_back({"copa-dev", data("copa/copa-dev-10.xml"), true, data("copa/easy_hard.json")});
  c.copa_files.push_back({"bcopa-ce", data("copa/bcopa-ce-4.xml"), false, {}});
  c.tcr_files.push_back({"tcr", data("tcr/tcr_fixture.jsonl")});
  c.overlap_bench = data("overlap/bench.jsonl");
  c.overlap_corpus = data("overlap/corpus.jsonl");
  return c;
}

// ---------------------------------------------------------------------------

Outcome atomic_release() {
  const char* dir = env("CF_ATOMIC2020_DIR");
  if (!dir) return {Status::skip, "CF_ATOMIC2020_DIR not set (public ATOMIC-2020 train/dev release required)"};
  const std::vector<cf::Split> splits = {cf::Split::train, cf::Split::dev};
  const auto load = cf::load_atomic(dir, splits, cf::RelationTable::builtin(), 4);
  const auto [kept, report] = cf::filter_triples(load.triples);
  const auto by = [&](cf::Category c) {
    const auto it = report.kept_by_category.find(c);
    return it == report.kept_by_category.end() ? std::size_t{0} : it->second;
  };
  const std::size_t event = by(cf::Category::event), physical = by(cf::Category::physical),
                    social = by(cf::Category::social);
  const bool ok = report.kept == 782848 && event == 121681 && physical == 177706 && social == 483461;
  return {ok ? Status::pass : Status::fail,
          fmt::format("kept {} (event {} / physical {} / social {}), expected 782848 (121681 / 177706 / 483461); "
                      "input {} rows, {} rejected, dropped {} duplicates, {} none, {} blanks",
                      report.kept, event, physical, social, load.input_rows, load.rejects.size(), report.duplicates,
                      report.none_targets, report.blanks)};
}

Outcome glucose_release() {
  const char* csv = env("CF_GLUCOSE_CSV");
  if (!csv) return {Status::skip, "CF_GLUCOSE_CSV not set (public GLUCOSE training CSV required)"};
  const auto load = cf::load_glucose(csv);
  std::vector<cf::VerbalizedSample> samples;
  samples.reserve(load.records.size());
  for (const auto& r : load.records) samples.push_back(cf::verbalize_glucose(r, cf::ConnectiveTable::builtin()));
  const auto n = samples.size();
  const auto split = cf::split_glucose(std::move(samples), 42);
  const double expected = 70730;
  const double rel = std::abs(static_cast<double>(split.train.size()) - expected) / expected;
  const auto dev_target = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * 0.1 - 1e-9));
  const bool proportion = split.dev.size() == dev_target;
  const bool ok = rel <= 0.01 && proportion;
  return {ok ? Status::pass : Status::fail,
          fmt::format("train {} vs 70730 ({:+.2f}%, tolerance 1%), dev {} (ceil 10% = {}), {} records, {} rejects",
                      split.train.size(), 100.0 * (static_cast<double>(split.train.size()) - expected) / expected,
                      split.dev.size(), dev_target, n, load.rejects.size())};
}

Outcome length_claim() {
  ScratchDir dir("length");
  auto config = fixture_config(dir.path(), 1);
  std::string scope = "fixture corpora";
  if (const char* a = env("CF_ATOMIC2020_DIR")) {
    config.atomic_path = a;
    scope = "ATOMIC-2020 release";
  }
  if (const char* g = env("CF_GLUCOSE_CSV")) {
    config.glucose_path = g;
    scope += " + GLUCOSE release";
  }
  cf::Pipeline pipeline(config);
  const auto result = pipeline.stats();
  const auto& claim = result.manifest.at("length_claim");
  const bool holds = claim.at("holds").get<bool>();
  return {holds ? Status::pass : Status::fail,
          fmt::format("{}: {}/{} samples have <= 30 whitespace tokens ({:.4f}%, target >= 99.9%)", scope,
                      claim.at("within").get<std::size_t>(), claim.at("samples").get<std::size_t>(),
                      100.0 * claim.at("fraction_within").get<double>())};
}

// Random sentences over the whole-word part of the fixture vocabulary.
std::vector<std::string> synthetic_sentences(const cf::SubwordVocab& vocab, std::size_t n, std::uint64_t seed) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& t = vocab.token(static_cast<cf::TokenId>(i));
    if (vocab.is_special(static_cast<cf::TokenId>(i)) || t.rfind("##", 0) == 0 || t.rfind("[", 0) == 0) continue;
    words.push_back(t);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(3, 12), pick(0, words.size() - 1);
  std::vector<std::string> out(n);
  for (auto& s : out) {
    const auto k = len(rng);
    for (std::size_t i = 0; i < k; ++i) {
      if (i) s += ' ';
      s += words[pick(rng)];
    }
  }
  return out;
}

Outcome masking_statistics(bool whole_word) {
  auto wp = std::make_shared<const cf::SubwordVocab>(cf::SubwordVocab::load_wordpiece(data("vocab/wordpiece/vocab.txt")));
  auto bpe = std::make_shared<const cf::SubwordVocab>(
      cf::SubwordVocab::load_bpe(data("vocab/bpe/vocab.json"), data("vocab/bpe/merges.txt")));
  cf::MaskingPolicy policy;
  policy.whole_word = whole_word;
  // Long enough that no generated sentence is truncated, so every source
  // sentence must be reconstructable.
  policy.max_seq_len = 128;

  std::size_t examples = 0, maskable = 0, masked = 0, as_mask = 0, as_random = 0, as_keep = 0;
  std::size_t delimiter_hits = 0, roundtrip_failures = 0;
  for (const auto& vocab : {wp, bpe}) {
    const cf::Tokenizer tok(vocab);
    const auto& sp = vocab->specials();
    const auto sentences = synthetic_sentences(*vocab, 6000, 2024);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto ids = tok.tokenize(sentences[i]);
      const auto e = cf::mask_example(ids, tok, i, 42, policy);
      ++examples;
      maskable += ids.size() - 2;
      masked += e.masked_positions.size();
      for (std::size_t k = 0; k < e.masked_positions.size(); ++k) {
        const auto pos = e.masked_positions[k];
        if (pos == 0 || pos + 1 >= ids.size()) ++delimiter_hits;
        const auto now = e.input_ids[pos];
        if (now == sp.mask) {
          ++as_mask;
        } else if (now == e.labels[k]) {
          ++as_keep;
        } else {
          ++as_random;
        }
      }
      const auto restored = cf::restore_labels(e);
      const std::vector<cf::TokenId> prefix(restored.begin(), restored.begin() + static_cast<std::ptrdiff_t>(ids.size()));
      const auto text = tok.decode(prefix);
      const bool same = vocab->kind() == cf::VocabKind::byte_bpe ? text == sentences[i]
                                                                  : cf::equal_modulo_whitespace(text, sentences[i]);
      if (prefix != ids || !same || e.truncated) ++roundtrip_failures;
    }
  }
  const double rate = static_cast<double>(masked) / static_cast<double>(maskable);
  const double m = static_cast<double>(as_mask) / static_cast<double>(masked);
  const double r = static_cast<double>(as_random) / static_cast<double>(masked);
  const double k = static_cast<double>(as_keep) / static_cast<double>(masked);
  const bool ok = examples >= 10000 && std::abs(rate - 0.15) <= 0.01 && std::abs(m - 0.8) <= 0.02 &&
                  std::abs(r - 0.1) <= 0.02 && std::abs(k - 0.1) <= 0.02 && delimiter_hits == 0 &&
                  roundtrip_failures == 0;
  return {ok ? Status::pass : Status::fail,
          fmt::format("{} examples (WordPiece + BPE{}): mask rate {:.4f} (0.15±0.01), actions {:.4f}/{:.4f}/{:.4f} "
                      "(0.8/0.1/0.1 ±0.02), masked delimiters {}, round-trip failures {}",
                      examples, whole_word ? ", whole-word" : "", rate, m, r, k, delimiter_hits, roundtrip_failures)};
}

Outcome prompt_bytes() {
  std::size_t checked = 0, bad = 0;
  for (const auto* file : {"copa/copa-dev-10.xml", "copa/bcopa-ce-4.xml"}) {
    for (const auto& inst : cf::load_copa(data(file))) {
      const auto once = cf::add_prompt(inst);
      const std::string prefix = inst.asks_for == cf::AsksFor::cause ? "It is because " : "As a result, ";
      const bool ok = once.choice1 == prefix + inst.choice1 && once.choice2 == prefix + inst.choice2 &&
                      once.premise == inst.premise && cf::add_prompt(once) == once;
      bad += !ok;
      ++checked;
    }
  }
  const bool golden = cf::prompt_for(cf::AsksFor::cause) == "It is because " &&
                      cf::prompt_for(cf::AsksFor::effect) == "As a result, ";
  cf::ChoiceInstance g;
  g.asks_for = cf::AsksFor::cause;
  g.choice1 = "The phone rang.";
  const bool example = cf::add_prompt(g).choice1 == "It is because The phone rang.";
  const bool ok = bad == 0 && golden && example;
  return {ok ? Status::pass : Status::fail,
          fmt::format("{} COPA/BCOPA-CE instances, {} mismatches; golden prefixes {}; double application idempotent",
                      checked, bad, golden && example ? "byte-exact" : "WRONG")};
}

Outcome overlap_oracle() {
  std::size_t comparisons = 0, mismatches = 0, monotonic_violations = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed * 7919);
    std::normal_distribution<double> g;
    auto rows = [&](std::size_t n) {
      std::vector<std::vector<double>> r(n, std::vector<double>(16));
      for (auto& v : r)
        for (auto& x : v) x = g(rng);
      return r;
    };
    const auto br = rows(20), cr = rows(50);
    std::vector<std::string> bids, cids;
    for (std::size_t i = 0; i < br.size(); ++i) bids.push_back(fmt::format("b{}", i));
    for (std::size_t j = 0; j < cr.size(); ++j) cids.push_back(fmt::format("c{}", j));
    const auto bench = cf::make_embedding_set(bids, br);
    const auto corpus = cf::make_embedding_set(cids, cr);
    std::size_t previous = SIZE_MAX;
    for (double t : {-0.2, 0.0, 0.2, 0.3, 0.4, 0.5, 0.6}) {
      // Double loop with the textbook formula in long double.
      std::vector<std::pair<std::string, std::string>> expected;
      for (std::size_t i = 0; i < br.size(); ++i) {
        for (std::size_t j = 0; j < cr.size(); ++j) {
          long double d = 0, a = 0, b = 0;
          for (std::size_t k = 0; k < 16; ++k) {
            d += static_cast<long double>(br[i][k]) * cr[j][k];
            a += static_cast<long double>(br[i][k]) * br[i][k];
            b += static_cast<long double>(cr[j][k]) * cr[j][k];
          }
          if (static_cast<double>(d / std::sqrt(a * b)) >= t) expected.emplace_back(bids[i], cids[j]);
        }
      }
      std::sort(expected.begin(), expected.end());
      for (bool prefilter : {false, true}) {
        auto got = cf::pairs_above(bench, corpus, t, {prefilter, 1, {}});
        std::vector<std::pair<std::string, std::string>> ids;
        for (const auto& p : got) ids.emplace_back(p.bench_id, p.corpus_id);
        std::sort(ids.begin(), ids.end());
        ++comparisons;
        mismatches += ids != expected;
        if (got.size() > previous) ++monotonic_violations;
      }
      previous = expected.size();
    }
  }
  const std::vector<double> v{0.3, -1.2, 4.5, 0.0, 2.2};
  const double self = cf::cosine(v, v);
  const bool ok = mismatches == 0 && monotonic_violations == 0 && std::abs(self - 1.0) <= 1e-6;
  return {ok ? Status::pass : Status::fail,
          fmt::format("20x50, five seeds, exhaustive and pre-filtered: {}/{} pair sets identical to the double-loop "
                      "oracle; monotonicity violations {}; cos(v,v)-1 = {:.1e}",
                      comparisons - mismatches, comparisons, monotonic_violations, self - 1.0)};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = cf::read_file(e.path());
  }
  return files;
}

Outcome determinism() {
  ScratchDir dir("determinism");
  std::vector<std::map<std::string, std::string>> runs;
  for (unsigned workers : {1u, 1u, 8u, 8u}) {
    fs::remove_all(dir.path());
    cf::Pipeline(fixture_config(dir.path(), workers)).run("all");
    auto files = snapshot(dir.path());
    // The resolved config is the one file that records the worker count.
    std::erase_if(files, [](const auto& kv) { return fs::path(kv.first).filename() == "config.resolved.json"; });
    runs.push_back(std::move(files));
  }
  std::size_t differing = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) differing += runs[r] != runs[0];
  return {differing == 0 ? Status::pass : Status::fail,
          fmt::format("all stages, 2 runs at workers=1 and 2 at workers=8: {} output files, {} runs differ", runs[0].size(),
                      differing)};
}

Outcome accuracy_tables() {
  return {Status::excluded,
          "downstream accuracy tables need large-model continual pretraining and fine-tuning; not reproducible here and "
          "not gated"};
}

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"atomic-release", atomic_release},
      {"glucose-release", glucose_release},
      {"length-claim", length_claim},
      {"masking-statistics", [] { return masking_statistics(false); }},
      {"masking-statistics-whole-word", [] { return masking_statistics(true); }},
      {"prompt-bytes", prompt_bytes},
      {"overlap-oracle", overlap_oracle},
      {"determinism", determinism},
      {"accuracy-tables", accuracy_tables},
  };

  CLI::App app{"corpusforge acceptance criteria"};
  std::string only;
  app.add_option("--only", only, "Run a single criterion")->check([&](const std::string& v) {
    for (const auto& c : criteria)
      if (c.name == v) return std::string{};
    return "unknown criterion '" + v + "'";
  });
  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::err);

  std::size_t failed = 0, skipped = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name != only) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::fail, fmt::format("threw: {}", e.what())};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL"
                                                       : o.status == Status::skip ? "SKIP"
                                                                                  : "EXCLUDED";
    std::cout << fmt::format("{:<8} {:<30} {}", tag, c.name, o.detail) << std::endl;
    failed += o.status == Status::fail;
    skipped += o.status == Status::skip;
  }
  if (failed) return 1;
  // ctest maps 77 to SKIPPED for the single-criterion release checks.
  if (!only.empty() && skipped == ran) return 77;
  return 0;
}
