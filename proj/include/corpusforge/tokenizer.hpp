#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpusforge/common.hpp"

namespace corpusforge {

using TokenId = std::int32_t;

enum class VocabKind { wordpiece, byte_bpe };

std::string_view to_string(VocabKind k);

struct SpecialIds {
  TokenId mask = -1;
  TokenId pad = -1;
  TokenId cls = -1;  // <s> for BPE vocabularies
  TokenId sep = -1;  // </s> for BPE vocabularies
  TokenId unk = -1;
};

// token <-> id map read from a pretrained model's vocabulary files: a
// one-token-per-line vocab.txt (WordPiece) or a vocab.json + merges.txt pair
// (byte-level BPE).
class SubwordVocab {
 public:
  static SubwordVocab load_wordpiece(const fs::path& vocab_txt, bool lowercase = false);
  static SubwordVocab from_wordpiece_tokens(std::vector<std::string> tokens, bool lowercase = false);
  static SubwordVocab load_bpe(const fs::path& vocab_json, const fs::path& merges_txt);
  static SubwordVocab from_bpe(const json& vocab, std::string_view merges);

  VocabKind kind() const { return kind_; }
  bool lowercase() const { return lowercase_; }
  std::size_t size() const { return tokens_.size(); }
  const SpecialIds& specials() const { return specials_; }
  // sha256 over the vocabulary bytes (and merges for BPE).
  const std::string& hash() const { return hash_; }

  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool is_special(TokenId id) const;
  // Ids eligible as random replacements: everything except special and
  // bracketed control tokens ("[unused0]", "<mask>").
  std::span<const TokenId> replacement_pool() const { return replacement_pool_; }
  // Rank of the BPE merge (a, b); lower merges first.
  std::optional<std::size_t> merge_rank(std::string_view a, std::string_view b) const;

 private:
  void index();

  VocabKind kind_ = VocabKind::wordpiece;
  bool lowercase_ = false;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  SpecialIds specials_;
  std::vector<TokenId> replacement_pool_;
  std::unordered_map<std::string, std::size_t> merges_;
  std::string hash_;
};

// GPT-2 byte <-> printable code point table, as UTF-8 strings.
const std::array<std::string, 256>& byte_symbols();

class Tokenizer {
 public:
  explicit Tokenizer(std::shared_ptr<const SubwordVocab> vocab);

  const SubwordVocab& vocab() const { return *vocab_; }

  // Content ids without delimiters; empty text gives an empty sequence.
  std::vector<TokenId> encode(std::string_view text) const;
  // Delimited sequence: [CLS] content [SEP] (or <s> ... </s>).
  std::vector<TokenId> tokenize(std::string_view text) const;
  // Inverse of encode; special ids are skipped. WordPiece output joins words
  // with single spaces, byte-level BPE output is byte-exact.
  std::string decode(std::span<const TokenId> ids) const;
  // False for subword continuations ("##ing", BPE pieces without a leading
  // space marker after the first).
  bool is_word_start(TokenId id, bool first_content_token) const;

  // Pre-tokenization, exposed for tests.
  std::vector<std::string> basic_words(std::string_view text) const;

 private:
  std::vector<TokenId> wordpiece(std::string_view word) const;
  std::vector<TokenId> bpe(std::string_view word) const;

  std::shared_ptr<const SubwordVocab> vocab_;
};

// Equality after deleting all whitespace; the round-trip contract for
// WordPiece detokenization.
bool equal_modulo_whitespace(std::string_view a, std::string_view b);

}  // namespace corpusforge
