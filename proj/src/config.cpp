#include "corpusforge/config.hpp"

#include <algorithm>
#include <cstdlib>

#include <fmt/format.h>

#include "corpusforge/io.hpp"
#include "corpusforge/text.hpp"

extern char** environ;

namespace corpusforge {

namespace {

std::string path_string(const fs::path& p) { return p.empty() ? std::string{} : p.generic_string(); }

json copa_file_defaults() { return json{{"name", ""}, {"path", ""}, {"tuning_split", false}, {"subset_index", ""}}; }
json tcr_file_defaults() { return json{{"name", ""}, {"path", ""}}; }

const std::vector<json::json_pointer>& path_pointers() {
  static const std::vector<json::json_pointer> ptrs = {
      json::json_pointer("/out"),
      json::json_pointer("/atomic/path"),
      json::json_pointer("/atomic/relation_table"),
      json::json_pointer("/glucose/path"),
      json::json_pointer("/glucose/connective_table"),
      json::json_pointer("/mlm/vocab/path"),
      json::json_pointer("/mlm/vocab/merges"),
      json::json_pointer("/overlap/bench"),
      json::json_pointer("/overlap/corpus"),
      json::json_pointer("/overlap/bench_texts"),
      json::json_pointer("/overlap/corpus_texts"),
  };
  return ptrs;
}

void absolutize(json& value, const fs::path& base) {
  if (!value.is_string()) return;
  const fs::path p = value.get<std::string>();
  if (p.empty() || p.is_absolute()) return;
  value = (base / p).lexically_normal().generic_string();
}

// Makes every path-valued key in a partial config absolute against `base`.
void resolve_paths(json& layer, const fs::path& base) {
  for (const auto& ptr : path_pointers()) {
    if (layer.contains(ptr)) absolutize(layer[ptr], base);
  }
  for (const char* section : {"copa", "tcr"}) {
    if (!layer.contains(section) || !layer[section].is_object()) continue;
    auto& files = layer[section];
    if (!files.contains("files") || !files["files"].is_array()) continue;
    for (auto& f : files["files"]) {
      if (!f.is_object()) continue;
      for (const char* key : {"path", "subset_index"}) {
        if (f.contains(key)) absolutize(f[key], base);
      }
    }
  }
}

void check_keys(const json& value, const json& schema, const std::string& where) {
  if (!value.is_object() || !schema.is_object()) return;
  for (const auto& [key, v] : value.items()) {
    const auto name = where.empty() ? key : where + "." + key;
    if (!schema.contains(key)) throw UsageError(fmt::format("unknown config key '{}'", name));
    check_keys(v, schema[key], name);
  }
}

void check_file_lists(const json& tree) {
  auto check = [](const json& files, const json& schema, const char* section) {
    if (!files.is_array()) throw UsageError(fmt::format("config key '{}.files' must be an array", section));
    for (const auto& f : files) {
      if (!f.is_object()) throw UsageError(fmt::format("entries of '{}.files' must be objects", section));
      check_keys(f, schema, fmt::format("{}.files[]", section));
    }
  };
  if (tree.contains("copa") && tree["copa"].contains("files")) check(tree["copa"]["files"], copa_file_defaults(), "copa");
  if (tree.contains("tcr") && tree["tcr"].contains("files")) check(tree["tcr"]["files"], tcr_file_defaults(), "tcr");
}

// Parses an override value against the type of the key it replaces.
json typed_value(const json& target, std::string_view raw, std::string_view key) {
  if (target.is_string()) return std::string(raw);
  try {
    auto v = json::parse(raw);
    const bool number_ok = target.is_number() && v.is_number();
    if (v.type() != target.type() && !number_ok && !(target.is_array() && v.is_array())) {
      throw UsageError(fmt::format("override for '{}' must be a {} value", key, target.type_name()));
    }
    return v;
  } catch (const json::parse_error&) {
    throw UsageError(fmt::format("override for '{}' is not a valid {} value: '{}'", key, target.type_name(), raw));
  }
}

template <class T>
T get(const json& tree, const char* pointer) {
  try {
    return tree.at(json::json_pointer(pointer)).get<T>();
  } catch (const json::exception&) {
    throw UsageError(fmt::format("config key '{}' is missing or has the wrong type", std::string(pointer + 1)));
  }
}

}  // namespace

json to_json(const PipelineConfig& c) {
  json copa_files = json::array();
  for (const auto& f : c.copa_files) {
    copa_files.push_back({{"name", f.name},
                          {"path", path_string(f.path)},
                          {"tuning_split", f.tuning_split},
                          {"subset_index", path_string(f.subset_index)}});
  }
  json tcr_files = json::array();
  for (const auto& f : c.tcr_files) tcr_files.push_back({{"name", f.name}, {"path", path_string(f.path)}});
  json splits = json::array();
  for (auto s : c.atomic_splits) splits.push_back(to_string(s));

  return json{
      {"seed", c.seed},
      {"workers", c.workers},
      {"out", path_string(c.out)},
      {"atomic",
       {{"path", path_string(c.atomic_path)}, {"splits", splits}, {"relation_table", path_string(c.relation_table)}}},
      {"glucose",
       {{"path", path_string(c.glucose_path)},
        {"include_specific", c.glucose_specific},
        {"include_general", c.glucose_general},
        {"connective_table", path_string(c.connective_table)}}},
      {"grammar",
       {{"checker",
         {{"kind", c.checker.kind},
          {"command", c.checker.command},
          {"url", c.checker.url},
          {"language", c.checker.language},
          {"max_in_flight", c.checker.max_in_flight},
          {"timeout_s", c.checker.timeout_s},
          {"batch_size", c.checker.batch_size}}},
        {"apply_suggestions", c.checker.apply_suggestions}}},
      {"mlm",
       {{"vocab",
         {{"kind", c.vocab_kind},
          {"path", path_string(c.vocab_path)},
          {"merges", path_string(c.merges_path)},
          {"lowercase", c.vocab_lowercase}}},
        {"policy", to_json(c.policy)}}},
      {"copa", {{"prompt", c.copa_prompt}, {"files", copa_files}}},
      {"tcr",
       {{"markers",
         {{"e1_open", c.markers.e1_open},
          {"e1_close", c.markers.e1_close},
          {"e2_open", c.markers.e2_open},
          {"e2_close", c.markers.e2_close}}},
        {"files", tcr_files}}},
      {"stats", {{"max_tokens", c.stats_max_tokens}, {"length_target", c.stats_length_target}}},
      {"overlap",
       {{"bench", path_string(c.overlap_bench)},
        {"corpus", path_string(c.overlap_corpus)},
        {"bench_texts", path_string(c.overlap_bench_texts)},
        {"corpus_texts", path_string(c.overlap_corpus_texts)},
        {"thresholds", c.overlap_thresholds},
        {"prefilter", c.overlap_prefilter},
        {"bench_subset", c.overlap_bench_subset}}},
  };
}

PipelineConfig config_from_json(const json& input) {
  const json defaults = to_json(PipelineConfig{});
  check_keys(input, defaults, "");
  check_file_lists(input);
  json tree = defaults;
  tree.merge_patch(input);

  PipelineConfig c;
  c.seed = get<std::uint64_t>(tree, "/seed");
  c.workers = get<unsigned>(tree, "/workers");
  if (c.workers == 0) throw UsageError("workers must be at least 1");
  c.out = get<std::string>(tree, "/out");
  if (c.out.empty()) throw UsageError("out must not be empty");

  c.atomic_path = get<std::string>(tree, "/atomic/path");
  c.atomic_splits.clear();
  for (const auto& s : get<std::vector<std::string>>(tree, "/atomic/splits")) c.atomic_splits.push_back(parse_split(s));
  c.relation_table = get<std::string>(tree, "/atomic/relation_table");

  c.glucose_path = get<std::string>(tree, "/glucose/path");
  c.glucose_specific = get<bool>(tree, "/glucose/include_specific");
  c.glucose_general = get<bool>(tree, "/glucose/include_general");
  c.connective_table = get<std::string>(tree, "/glucose/connective_table");

  c.checker.kind = get<std::string>(tree, "/grammar/checker/kind");
  if (c.checker.kind != "none" && c.checker.kind != "subprocess" && c.checker.kind != "http") {
    throw UsageError(fmt::format("grammar.checker.kind must be none, subprocess or http (got '{}')", c.checker.kind));
  }
  c.checker.command = get<std::string>(tree, "/grammar/checker/command");
  c.checker.url = get<std::string>(tree, "/grammar/checker/url");
  c.checker.language = get<std::string>(tree, "/grammar/checker/language");
  c.checker.max_in_flight = std::max(1u, get<unsigned>(tree, "/grammar/checker/max_in_flight"));
  c.checker.timeout_s = get<unsigned>(tree, "/grammar/checker/timeout_s");
  c.checker.batch_size = std::max<std::size_t>(1, get<std::size_t>(tree, "/grammar/checker/batch_size"));
  c.checker.apply_suggestions = get<bool>(tree, "/grammar/apply_suggestions");
  if (c.checker.kind == "subprocess" && c.checker.command.empty()) {
    throw UsageError("grammar.checker.command is required for the subprocess checker");
  }
  if (c.checker.kind == "http" && c.checker.url.empty()) throw UsageError("grammar.checker.url is required for the http checker");

  c.vocab_kind = get<std::string>(tree, "/mlm/vocab/kind");
  if (c.vocab_kind != "wordpiece" && c.vocab_kind != "bpe") {
    throw UsageError(fmt::format("mlm.vocab.kind must be wordpiece or bpe (got '{}')", c.vocab_kind));
  }
  c.vocab_path = get<std::string>(tree, "/mlm/vocab/path");
  c.merges_path = get<std::string>(tree, "/mlm/vocab/merges");
  c.vocab_lowercase = get<bool>(tree, "/mlm/vocab/lowercase");
  c.policy = masking_policy_from_json(tree.at(json::json_pointer("/mlm/policy")));

  c.copa_prompt = get<bool>(tree, "/copa/prompt");
  for (const auto& f : tree["copa"]["files"]) {
    json full = copa_file_defaults();
    full.merge_patch(f);
    CopaFile cf;
    try {
      cf.path = full.at("path").get<std::string>();
      cf.name = full.at("name").get<std::string>();
      cf.tuning_split = full.at("tuning_split").get<bool>();
      cf.subset_index = full.at("subset_index").get<std::string>();
    } catch (const json::exception&) {
      throw UsageError("copa.files entries need string name/path/subset_index and boolean tuning_split");
    }
    if (cf.path.empty()) throw UsageError("copa.files entry without a path");
    if (cf.name.empty()) cf.name = cf.path.stem().string();
    c.copa_files.push_back(std::move(cf));
  }
  for (const auto& f : tree["tcr"]["files"]) {
    json full = tcr_file_defaults();
    full.merge_patch(f);
    TcrFile tf;
    try {
      tf.path = full.at("path").get<std::string>();
      tf.name = full.at("name").get<std::string>();
    } catch (const json::exception&) {
      throw UsageError("tcr.files entries need string name and path");
    }
    if (tf.path.empty()) throw UsageError("tcr.files entry without a path");
    if (tf.name.empty()) tf.name = tf.path.stem().string();
    c.tcr_files.push_back(std::move(tf));
  }
  auto check_unique = [](auto names, const char* section) {
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
      throw UsageError(fmt::format("{}.files names must be unique", section));
    }
  };
  {
    std::vector<std::string> names;
    for (const auto& f : c.copa_files) names.push_back(f.name);
    check_unique(names, "copa");
    names.clear();
    for (const auto& f : c.tcr_files) names.push_back(f.name);
    check_unique(names, "tcr");
  }
  c.markers.e1_open = get<std::string>(tree, "/tcr/markers/e1_open");
  c.markers.e1_close = get<std::string>(tree, "/tcr/markers/e1_close");
  c.markers.e2_open = get<std::string>(tree, "/tcr/markers/e2_open");
  c.markers.e2_close = get<std::string>(tree, "/tcr/markers/e2_close");
  for (const auto* m : {&c.markers.e1_open, &c.markers.e1_close, &c.markers.e2_open, &c.markers.e2_close}) {
    if (m->empty()) throw UsageError("tcr.markers must be non-empty strings");
  }

  c.stats_max_tokens = get<std::size_t>(tree, "/stats/max_tokens");
  c.stats_length_target = get<double>(tree, "/stats/length_target");

  c.overlap_bench = get<std::string>(tree, "/overlap/bench");
  c.overlap_corpus = get<std::string>(tree, "/overlap/corpus");
  c.overlap_bench_texts = get<std::string>(tree, "/overlap/bench_texts");
  c.overlap_corpus_texts = get<std::string>(tree, "/overlap/corpus_texts");
  c.overlap_thresholds = get<std::vector<double>>(tree, "/overlap/thresholds");
  if (c.overlap_thresholds.empty()) throw UsageError("overlap.thresholds must list at least one threshold");
  for (double t : c.overlap_thresholds) {
    if (!(t >= -1.0 && t <= 1.0)) throw UsageError(fmt::format("overlap threshold {} outside [-1, 1]", t));
  }
  std::sort(c.overlap_thresholds.begin(), c.overlap_thresholds.end());
  c.overlap_thresholds.erase(std::unique(c.overlap_thresholds.begin(), c.overlap_thresholds.end()),
                             c.overlap_thresholds.end());
  c.overlap_prefilter = get<bool>(tree, "/overlap/prefilter");
  c.overlap_bench_subset = get<std::vector<std::string>>(tree, "/overlap/bench_subset");
  return c;
}

json env_overrides(const json& defaults, const std::map<std::string, std::string>& env) {
  constexpr std::string_view kPrefix = "CORPUSFORGE_";
  json patch = json::object();
  for (const auto& [name, raw] : env) {
    if (name.rfind(kPrefix, 0) != 0) continue;
    std::vector<std::string> parts;
    std::string_view rest = std::string_view(name).substr(kPrefix.size());
    while (true) {
      const auto cut = rest.find("__");
      parts.push_back(to_lower_ascii(rest.substr(0, cut)));
      if (cut == std::string_view::npos) break;
      rest.remove_prefix(cut + 2);
    }
    const json* node = &defaults;
    for (const auto& p : parts) {
      if (!node->is_object() || !node->contains(p)) {
        node = nullptr;
        break;
      }
      node = &(*node)[p];
    }
    if (!node || node->is_object()) continue;
    json* target = &patch;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) target = &(*target)[parts[i]];
    (*target)[parts.back()] = typed_value(*node, raw, name);
  }
  return patch;
}

std::map<std::string, std::string> current_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return env;
}

void apply_assignment(json& tree, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw UsageError(fmt::format("expected key=value, got '{}'", assignment));
  }
  const auto key = assignment.substr(0, eq);
  json* node = &tree;
  for (auto part : split(key, '.')) {
    const std::string p(part);
    if (!node->is_object() || !node->contains(p)) throw UsageError(fmt::format("unknown config key '{}'", key));
    node = &(*node)[p];
  }
  if (node->is_object()) throw UsageError(fmt::format("config key '{}' is a section, not a value", key));
  *node = typed_value(*node, assignment.substr(eq + 1), key);
}

PipelineConfig resolve_config(const ConfigSources& sources) {
  json tree = to_json(PipelineConfig{});
  const fs::path cwd = fs::current_path();

  if (sources.file) {
    json layer;
    try {
      layer = json::parse(read_file(*sources.file));
    } catch (const json::parse_error& e) {
      throw UsageError(fmt::format("config file '{}': {}", sources.file->string(), e.what()));
    }
    if (!layer.is_object()) throw UsageError(fmt::format("config file '{}' must hold a JSON object", sources.file->string()));
    check_keys(layer, tree, "");
    check_file_lists(layer);
    resolve_paths(layer, fs::absolute(*sources.file).parent_path());
    tree.merge_patch(layer);
  }

  json env_layer = env_overrides(tree, sources.env);
  resolve_paths(env_layer, cwd);
  check_file_lists(env_layer);
  tree.merge_patch(env_layer);

  // Paths from the file and environment are already absolute, so this only
  // touches command-line values and the defaults.
  for (const auto& a : sources.assignments) apply_assignment(tree, a);
  check_file_lists(tree);
  resolve_paths(tree, cwd);
  return config_from_json(tree);
}

std::string config_digest(const PipelineConfig& c) {
  json j = to_json(c);
  j.erase("workers");
  j.erase("out");
  return sha256_hex(j.dump());
}

}  // namespace corpusforge
