#include "corpusforge/mlm_prep.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "corpusforge/io.hpp"
#include "corpusforge/parallel.hpp"
#include "corpusforge/random.hpp"

namespace corpusforge {

void MaskingPolicy::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(mask_rate) || !unit(replace_mask) || !unit(replace_random) || !unit(keep)) {
    throw UsageError("masking rates must lie in [0, 1]");
  }
  if (std::abs(replace_mask + replace_random + keep - 1.0) > 1e-9) {
    throw UsageError(fmt::format("masking actions must sum to 1 (got {} + {} + {})", replace_mask, replace_random, keep));
  }
  if (max_seq_len < 3) throw UsageError("max_seq_len must leave room for two delimiters and one token");
}

json to_json(const MaskingPolicy& p) {
  return json{{"mask_rate", p.mask_rate},   {"replace_mask", p.replace_mask}, {"replace_random", p.replace_random},
              {"keep", p.keep},             {"whole_word", p.whole_word},     {"max_seq_len", p.max_seq_len},
              {"pad_to_max", p.pad_to_max}};
}

MaskingPolicy masking_policy_from_json(const json& j, MaskingPolicy p) {
  try {
    p.mask_rate = j.value("mask_rate", p.mask_rate);
    p.replace_mask = j.value("replace_mask", p.replace_mask);
    p.replace_random = j.value("replace_random", p.replace_random);
    p.keep = j.value("keep", p.keep);
    p.whole_word = j.value("whole_word", p.whole_word);
    p.max_seq_len = j.value("max_seq_len", p.max_seq_len);
    p.pad_to_max = j.value("pad_to_max", p.pad_to_max);
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("invalid masking policy: {}", e.what()));
  }
  p.validate();
  return p;
}

json to_json(const MaskedExample& e) {
  return json{{"sample_id", e.sample_id},
              {"input_ids", e.input_ids},
              {"attention_mask", e.attention_mask},
              {"masked_positions", e.masked_positions},
              {"labels", e.labels}};
}

MaskedExample masked_example_from_json(const json& j) {
  try {
    MaskedExample e;
    e.sample_id = j.at("sample_id").get<std::uint64_t>();
    e.input_ids = j.at("input_ids").get<std::vector<TokenId>>();
    e.attention_mask = j.at("attention_mask").get<std::vector<std::uint8_t>>();
    e.masked_positions = j.at("masked_positions").get<std::vector<std::uint32_t>>();
    e.labels = j.at("labels").get<std::vector<TokenId>>();
    return e;
  } catch (const json::exception& ex) {
    throw InputFormatError(fmt::format("malformed masked example: {}", ex.what()));
  }
}

MaskedExample mask_example(std::span<const TokenId> ids, const Tokenizer& tokenizer, std::uint64_t sample_id,
                           std::uint64_t seed, const MaskingPolicy& policy) {
  const auto& vocab = tokenizer.vocab();
  const auto& sp = vocab.specials();

  MaskedExample ex;
  ex.sample_id = sample_id;
  ex.input_ids.assign(ids.begin(), ids.end());
  if (ex.input_ids.size() > policy.max_seq_len) {
    ex.input_ids.resize(policy.max_seq_len);
    ex.input_ids.back() = sp.sep;
    ex.truncated = true;
  }
  const std::size_t length = ex.input_ids.size();

  // Delimiters at both ends are never candidates.
  std::vector<std::size_t> candidates;
  for (std::size_t p = 1; p + 1 < length; ++p) {
    const auto id = ex.input_ids[p];
    if (id != sp.cls && id != sp.sep && id != sp.pad) candidates.push_back(p);
  }

  KeyedRng rng(seed, sample_id);
  std::vector<std::size_t> selected;
  if (policy.whole_word) {
    std::size_t k = 0;
    while (k < candidates.size()) {
      std::size_t end = k + 1;
      while (end < candidates.size() && candidates[end] == candidates[end - 1] + 1 &&
             !tokenizer.is_word_start(ex.input_ids[candidates[end]], false)) {
        ++end;
      }
      if (rng.uniform() < policy.mask_rate) {
        for (std::size_t q = k; q < end; ++q) selected.push_back(candidates[q]);
      }
      k = end;
    }
  } else {
    for (auto p : candidates) {
      if (rng.uniform() < policy.mask_rate) selected.push_back(p);
    }
  }

  const auto pool = vocab.replacement_pool();
  for (auto p : selected) {
    ex.masked_positions.push_back(static_cast<std::uint32_t>(p));
    ex.labels.push_back(ex.input_ids[p]);
    const double u = rng.uniform();
    if (u < policy.replace_mask) {
      ex.input_ids[p] = sp.mask;
    } else if (u < policy.replace_mask + policy.replace_random) {
      ex.input_ids[p] = pool[rng.below(pool.size())];
    }
  }

  ex.attention_mask.assign(length, 1);
  if (policy.pad_to_max && length < policy.max_seq_len) {
    ex.input_ids.resize(policy.max_seq_len, sp.pad);
    ex.attention_mask.resize(policy.max_seq_len, 0);
  }
  return ex;
}

std::vector<TokenId> restore_labels(const MaskedExample& e) {
  auto ids = e.input_ids;
  for (std::size_t k = 0; k < e.masked_positions.size(); ++k) ids[e.masked_positions[k]] = e.labels[k];
  return ids;
}

json trainer_hyperparameters(const MaskingPolicy& policy) {
  return json{{"epochs", 10},
              {"batch_size", 128},
              {"early_stopping_patience", 5},
              {"early_stopping_metric", "eval_loss"},
              {"select_best_by", "lowest_eval_loss"},
              {"max_seq_len", policy.max_seq_len}};
}

json emit_dataset(std::span<const VerbalizedSample> samples, const Tokenizer& tokenizer, std::uint64_t seed,
                  const MaskingPolicy& policy, const fs::path& out_dir, const EmitOptions& options,
                  EmitStats* stats_out) {
  policy.validate();
  ensure_directory(out_dir);

  std::vector<const VerbalizedSample*> order;
  order.reserve(samples.size());
  for (const auto& s : samples) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  struct Encoded {
    std::string line;
    Split split = Split::train;
    std::size_t maskable = 0;
    std::size_t masked = 0;
    bool truncated = false;
  };
  auto encoded = parallel_map(order.size(), options.workers, [&](std::size_t i) {
    const auto& s = *order[i];
    const auto ids = tokenizer.tokenize(s.text);
    auto ex = mask_example(ids, tokenizer, s.id, seed, policy);
    Encoded e;
    e.split = s.split;
    e.truncated = ex.truncated;
    e.masked = ex.masked_positions.size();
    e.maskable = std::min(ids.size(), policy.max_seq_len) - 2;
    e.line = to_json(ex).dump();
    e.line.push_back('\n');
    return e;
  });

  EmitStats stats;
  json files = json::object();
  for (auto split : {Split::train, Split::dev}) {
    const auto name = fmt::format("{}.jsonl", to_string(split));
    std::size_t count = 0;
    for (const auto& e : encoded) count += e.split == split;
    if (count == 0) continue;
    AtomicWriter writer(out_dir / name);
    Sha256 hash;
    for (const auto& e : encoded) {
      if (e.split != split) continue;
      writer.write(e.line);
      hash.update(e.line);
    }
    writer.commit();
    files[name] = json{{"examples", count}, {"sha256", hash.hex_digest()}};
    (split == Split::train ? stats.train : stats.dev) = count;
  }
  for (const auto& e : encoded) {
    stats.truncated += e.truncated;
    stats.zero_maskable += e.maskable == 0;
    stats.maskable_positions += e.maskable;
    stats.masked_positions += e.masked;
  }

  const auto& vocab = tokenizer.vocab();
  json manifest{
      {"tool", kToolName},
      {"version", kToolVersion},
      {"dataset", options.dataset_name},
      {"seed", seed},
      {"counts",
       {{"train", stats.train},
        {"dev", stats.dev},
        {"truncated", stats.truncated},
        {"zero_maskable", stats.zero_maskable},
        {"maskable_positions", stats.maskable_positions},
        {"masked_positions", stats.masked_positions}}},
      {"truncated_fraction",
       samples.empty() ? 0.0 : static_cast<double>(stats.truncated) / static_cast<double>(samples.size())},
      {"vocab", {{"kind", to_string(vocab.kind())}, {"size", vocab.size()}, {"sha256", vocab.hash()}}},
      {"policy", to_json(policy)},
      {"max_seq_len_includes_delimiters", true},
      {"template_table_version", options.template_version},
      {"trainer", trainer_hyperparameters(policy)},
      {"files", files},
  };
  write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  if (stats_out) *stats_out = stats;
  return manifest;
}

}  // namespace corpusforge
