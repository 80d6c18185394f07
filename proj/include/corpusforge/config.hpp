#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corpusforge/bench_convert.hpp"
#include "corpusforge/common.hpp"
#include "corpusforge/mlm_prep.hpp"

namespace corpusforge {

struct CopaFile {
  std::string name;
  fs::path path;
  // Also emit the seeded 90/10 hyperparameter-tuning split.
  bool tuning_split = false;
  fs::path subset_index;  // optional easy/hard index
};

struct TcrFile {
  std::string name;
  fs::path path;
};

struct CheckerConfig {
  std::string kind = "none";  // none | subprocess | http
  std::string command;
  std::string url;
  std::string language = "en-US";
  unsigned max_in_flight = 4;
  unsigned timeout_s = 10;
  std::size_t batch_size = 256;
  bool apply_suggestions = false;
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  unsigned workers = 1;
  fs::path out = "out";

  fs::path atomic_path;
  std::vector<Split> atomic_splits = {Split::train, Split::dev};
  fs::path relation_table;  // empty: built-in table

  fs::path glucose_path;
  bool glucose_specific = true;
  bool glucose_general = true;
  fs::path connective_table;

  CheckerConfig checker;

  std::string vocab_kind = "wordpiece";  // wordpiece | bpe
  fs::path vocab_path;
  fs::path merges_path;
  bool vocab_lowercase = false;
  MaskingPolicy policy;

  std::vector<CopaFile> copa_files;
  bool copa_prompt = true;

  std::vector<TcrFile> tcr_files;
  EventMarkers markers;

  std::size_t stats_max_tokens = 30;
  double stats_length_target = 0.999;

  fs::path overlap_bench;
  fs::path overlap_corpus;
  fs::path overlap_bench_texts;
  fs::path overlap_corpus_texts;
  std::vector<double> overlap_thresholds = {0.5, 0.6};
  bool overlap_prefilter = false;
  std::vector<std::string> overlap_bench_subset;
};

json to_json(const PipelineConfig& c);
// Missing keys keep their defaults; unknown keys and wrong types throw
// UsageError.
PipelineConfig config_from_json(const json& j);

// Environment overrides: CORPUSFORGE_<KEY> with "__" separating nested keys,
// e.g. CORPUSFORGE_MLM__POLICY__MASK_RATE=0.2. Only keys present in the
// default tree are honoured. Values are parsed as JSON unless the target is a
// string.
json env_overrides(const json& defaults, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> current_environment();

// "a.b.c=value" from --set, applied with the same typing rules as the
// environment.
void apply_assignment(json& tree, std::string_view assignment);

// defaults < config file < environment < explicit overrides. Relative paths
// in the file resolve against the file's directory, all others against the
// working directory.
struct ConfigSources {
  std::optional<fs::path> file;
  std::map<std::string, std::string> env;
  std::vector<std::string> assignments;
};

PipelineConfig resolve_config(const ConfigSources& sources);

// Digest of the resolved config without runtime-only fields (workers, out),
// so manifests do not depend on how the run was scheduled.
std::string config_digest(const PipelineConfig& c);

}  // namespace corpusforge
