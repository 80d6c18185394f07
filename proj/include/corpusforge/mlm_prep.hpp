#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "corpusforge/tokenizer.hpp"
#include "corpusforge/verbalizer.hpp"

namespace corpusforge {

struct MaskingPolicy {
  double mask_rate = 0.15;
  double replace_mask = 0.8;
  double replace_random = 0.1;
  double keep = 0.1;
  bool whole_word = false;
  // Total positions including the two delimiters.
  std::size_t max_seq_len = 30;
  // Pad every example to max_seq_len (attention_mask 0 on padding).
  bool pad_to_max = true;

  void validate() const;
};

json to_json(const MaskingPolicy& p);
MaskingPolicy masking_policy_from_json(const json& j, MaskingPolicy defaults = {});

struct MaskedExample {
  std::uint64_t sample_id = 0;
  std::vector<TokenId> input_ids;
  std::vector<std::uint8_t> attention_mask;
  std::vector<std::uint32_t> masked_positions;
  // Original id at each masked position (parallel to masked_positions).
  std::vector<TokenId> labels;
  bool truncated = false;

  friend bool operator==(const MaskedExample&, const MaskedExample&) = default;
};

json to_json(const MaskedExample& e);
MaskedExample masked_example_from_json(const json& j);

// Applies the BERT recipe to a delimited sequence ([CLS] ... [SEP]) from
// Tokenizer::tokenize. Over-long input is truncated to max_seq_len keeping
// the closing delimiter. Each maskable position (or whole word) is selected
// with probability mask_rate; a selected position becomes the mask token,
// a random ordinary token or stays unchanged at 80/10/10. The random stream
// is keyed by (seed, sample_id).
MaskedExample mask_example(std::span<const TokenId> ids, const Tokenizer& tokenizer, std::uint64_t sample_id,
                           std::uint64_t seed, const MaskingPolicy& policy);

// input_ids with labels written back at masked_positions.
std::vector<TokenId> restore_labels(const MaskedExample& e);

struct EmitOptions {
  std::string dataset_name;
  std::string template_version;
  unsigned workers = 1;
};

struct EmitStats {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t truncated = 0;
  std::size_t zero_maskable = 0;
  std::size_t maskable_positions = 0;
  std::size_t masked_positions = 0;
};

// Hyperparameters handed to the downstream trainer.
json trainer_hyperparameters(const MaskingPolicy& policy);

// Writes <out_dir>/{train,dev}.jsonl and <out_dir>/manifest.json. Examples
// are ordered by sample id; an empty corpus writes only the manifest.
// Returns the manifest.
json emit_dataset(std::span<const VerbalizedSample> samples, const Tokenizer& tokenizer, std::uint64_t seed,
                  const MaskingPolicy& policy, const fs::path& out_dir, const EmitOptions& options,
                  EmitStats* stats = nullptr);

}  // namespace corpusforge
