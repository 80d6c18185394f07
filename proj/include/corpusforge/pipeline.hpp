#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/config.hpp"
#include "corpusforge/grammar_norm.hpp"
#include "corpusforge/kg_ingest.hpp"
#include "corpusforge/tokenizer.hpp"
#include "corpusforge/verbalizer.hpp"

namespace corpusforge {

inline constexpr std::array<std::string_view, 9> kStageNames = {
    "ingest", "verbalize", "grammar", "mlm-prep", "convert-copa", "convert-tcr", "stats", "overlap", "all"};

struct StageResult {
  std::string stage;
  fs::path dir;
  json manifest;
  bool skipped = false;
  std::string skip_reason;
};

// A named corpus (atomic or glucose) split into train and dev.
struct Corpus {
  std::string name;
  std::string template_version;
  std::vector<VerbalizedSample> samples;  // ordered by id
};

// Runs pipeline stages against one resolved config. Upstream results are
// computed once in memory and shared by later stages of the same run; each
// stage writes only its own directory under config.out. Every stage directory
// gets a manifest.json and a config.resolved.json.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();

  const PipelineConfig& config() const { return config_; }

  // Throws UsageError for an unknown stage name.
  std::vector<StageResult> run(std::string_view stage);

  StageResult ingest();
  StageResult verbalize();
  StageResult grammar();
  StageResult mlm_prep();
  StageResult convert_copa();
  StageResult convert_tcr();
  StageResult stats();
  StageResult overlap();

  // Final (normalized) corpora, computing upstream stages as needed.
  const std::vector<Corpus>& corpora();

 private:
  struct State;

  const RelationTable& relations();
  const ConnectiveTable& connectives();
  const std::vector<Corpus>& verbalized();
  std::shared_ptr<const SubwordVocab> vocab();
  bool has_corpus_inputs() const;

  PipelineConfig config_;
  std::unique_ptr<State> state_;
};

// Per-sample statistics used by the stats stage and the acceptance suite.
struct LengthStats {
  std::size_t samples = 0;
  std::size_t within = 0;  // samples with <= max_tokens whitespace tokens
  std::map<std::size_t, std::size_t> histogram;

  double fraction_within() const { return samples ? static_cast<double>(within) / static_cast<double>(samples) : 1.0; }
};

LengthStats length_stats(std::span<const VerbalizedSample> samples, std::size_t max_tokens);

}  // namespace corpusforge
