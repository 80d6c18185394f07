#include "corpusforge/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include <fmt/format.h>

#include "corpusforge/io.hpp"
#include "corpusforge/text.hpp"

namespace corpusforge {

std::string_view to_string(VocabKind k) { return k == VocabKind::wordpiece ? "wordpiece" : "byte_bpe"; }

namespace {

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::size_t utf8_char_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

bool is_bracketed(std::string_view tok) {
  return tok.size() >= 3 && ((tok.front() == '[' && tok.back() == ']') || (tok.front() == '<' && tok.back() == '>'));
}

}  // namespace

const std::array<std::string, 256>& byte_symbols() {
  static const std::array<std::string, 256> table = [] {
    std::array<std::string, 256> t;
    std::array<bool, 256> printable{};
    for (int b = '!'; b <= '~'; ++b) printable[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
    char32_t next = 256;
    for (int b = 0; b < 256; ++b) {
      t[b] = encode_utf8(printable[b] ? static_cast<char32_t>(b) : next++);
    }
    return t;
  }();
  return table;
}

namespace {

const std::unordered_map<std::string, unsigned char>& symbol_bytes() {
  static const auto map = [] {
    std::unordered_map<std::string, unsigned char> m;
    const auto& syms = byte_symbols();
    for (int b = 0; b < 256; ++b) m.emplace(syms[b], static_cast<unsigned char>(b));
    return m;
  }();
  return map;
}

}  // namespace

void SubwordVocab::index() {
  ids_.clear();
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw InputFormatError(fmt::format("vocabulary token '{}' appears twice", tokens_[i]));
    }
  }
  const bool wp = kind_ == VocabKind::wordpiece;
  auto need = [&](std::string_view name) {
    auto id = find(name);
    if (!id) throw InputFormatError(fmt::format("vocabulary lacks special token '{}'", name));
    return *id;
  };
  specials_.mask = need(wp ? "[MASK]" : "<mask>");
  specials_.pad = need(wp ? "[PAD]" : "<pad>");
  specials_.cls = need(wp ? "[CLS]" : "<s>");
  specials_.sep = need(wp ? "[SEP]" : "</s>");
  specials_.unk = need(wp ? "[UNK]" : "<unk>");

  replacement_pool_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    if (!is_special(id) && !is_bracketed(tokens_[i])) replacement_pool_.push_back(id);
  }
  if (replacement_pool_.empty()) throw InputFormatError("vocabulary has no ordinary tokens");
}

SubwordVocab SubwordVocab::from_wordpiece_tokens(std::vector<std::string> tokens, bool lowercase) {
  SubwordVocab v;
  v.kind_ = VocabKind::wordpiece;
  v.lowercase_ = lowercase;
  v.tokens_ = std::move(tokens);
  std::string canonical;
  for (const auto& t : v.tokens_) {
    canonical += t;
    canonical += '\n';
  }
  v.hash_ = sha256_hex(canonical);
  v.index();
  return v;
}

SubwordVocab SubwordVocab::load_wordpiece(const fs::path& vocab_txt, bool lowercase) {
  const auto data = read_file(vocab_txt);
  std::vector<std::string> tokens;
  for (auto line : split_lines(data)) {
    // A token may legitimately be whitespace-free only; trailing blanks are file noise.
    auto tok = trim(line);
    if (tok.empty()) throw InputFormatError(fmt::format("{}: empty vocabulary line", vocab_txt.string()));
    tokens.emplace_back(tok);
  }
  auto v = from_wordpiece_tokens(std::move(tokens), lowercase);
  v.hash_ = sha256_hex(data);
  return v;
}

SubwordVocab SubwordVocab::from_bpe(const json& vocab, std::string_view merges) {
  if (!vocab.is_object()) throw InputFormatError("BPE vocab.json must be an object of token -> id");
  SubwordVocab v;
  v.kind_ = VocabKind::byte_bpe;
  v.tokens_.assign(vocab.size(), {});
  std::vector<bool> filled(vocab.size(), false);
  for (const auto& [tok, idj] : vocab.items()) {
    if (!idj.is_number_integer()) throw InputFormatError(fmt::format("BPE id for '{}' is not an integer", tok));
    const auto id = idj.get<std::int64_t>();
    if (id < 0 || static_cast<std::size_t>(id) >= v.tokens_.size() || filled[id]) {
      throw InputFormatError("BPE vocabulary ids must be a permutation of 0..n-1");
    }
    v.tokens_[id] = tok;
    filled[id] = true;
  }
  std::size_t rank = 0;
  for (auto line : split_lines(merges)) {
    if (line.empty() || line.starts_with("#version")) continue;
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos) throw InputFormatError(fmt::format("malformed merge line '{}'", line));
    v.merges_.emplace(std::string(line), rank++);
  }
  v.hash_ = sha256_hex(vocab.dump() + "\n" + std::string(merges));
  v.index();
  return v;
}

SubwordVocab SubwordVocab::load_bpe(const fs::path& vocab_json, const fs::path& merges_txt) {
  json vocab;
  try {
    vocab = json::parse(read_file(vocab_json));
  } catch (const json::parse_error& e) {
    throw InputFormatError(fmt::format("{}: {}", vocab_json.string(), e.what()));
  }
  auto v = from_bpe(vocab, read_file(merges_txt));
  v.hash_ = sha256_hex(read_file(vocab_json) + "\n" + read_file(merges_txt));
  return v;
}

std::optional<TokenId> SubwordVocab::find(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& SubwordVocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range(fmt::format("token id {} outside vocabulary of size {}", id, tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool SubwordVocab::is_special(TokenId id) const {
  return id == specials_.mask || id == specials_.pad || id == specials_.cls || id == specials_.sep ||
         id == specials_.unk;
}

std::optional<std::size_t> SubwordVocab::merge_rank(std::string_view a, std::string_view b) const {
  std::string key;
  key.reserve(a.size() + b.size() + 1);
  key.append(a).push_back(' ');
  key.append(b);
  const auto it = merges_.find(key);
  if (it == merges_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

Tokenizer::Tokenizer(std::shared_ptr<const SubwordVocab> vocab) : vocab_(std::move(vocab)) {
  if (!vocab_) throw std::invalid_argument("Tokenizer needs a vocabulary");
}

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

bool is_ws(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

enum class CharClass { space, letter, digit, other };

CharClass classify(unsigned char c) {
  if (is_ws(c) || c == '\f' || c == '\v') return CharClass::space;
  if (std::isalpha(c) || c >= 0x80) return CharClass::letter;
  if (std::isdigit(c)) return CharClass::digit;
  return CharClass::other;
}

// GPT-2 pre-tokenization over bytes; non-ASCII bytes count as letters.
std::vector<std::string_view> gpt2_pieces(std::string_view s) {
  static constexpr std::array<std::string_view, 7> kContractions = {"'s", "'t", "'re", "'ve", "'m", "'ll", "'d"};
  std::vector<std::string_view> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  auto run_end = [&](std::size_t from, CharClass cls) {
    while (from < n && classify(static_cast<unsigned char>(s[from])) == cls) ++from;
    return from;
  };
  while (i < n) {
    if (s[i] == '\'') {
      bool matched = false;
      for (auto c : kContractions) {
        if (s.substr(i, c.size()) == c) {
          out.push_back(s.substr(i, c.size()));
          i += c.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    const auto cls = classify(static_cast<unsigned char>(s[i]));
    if (cls != CharClass::space) {
      const auto end = run_end(i, cls);
      out.push_back(s.substr(i, end - i));
      i = end;
      continue;
    }
    if (s[i] == ' ' && i + 1 < n && classify(static_cast<unsigned char>(s[i + 1])) != CharClass::space) {
      const auto end = run_end(i + 1, classify(static_cast<unsigned char>(s[i + 1])));
      out.push_back(s.substr(i, end - i));
      i = end;
      continue;
    }
    auto end = run_end(i, CharClass::space);
    // \s+(?!\S): leave the last space to prefix the following word.
    if (end < n && end - i > 1 && s[end - 1] == ' ') --end;
    out.push_back(s.substr(i, end - i));
    i = end;
  }
  return out;
}

}  // namespace

std::vector<std::string> Tokenizer::basic_words(std::string_view text) const {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c == 0 || (c < 0x20 && !is_ws(c)) || c == 0x7F) continue;
    if (is_ws(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      current.push_back(vocab_->lowercase() ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return words;
}

std::vector<TokenId> Tokenizer::wordpiece(std::string_view word) const {
  constexpr std::size_t kMaxCharsPerWord = 100;
  const auto unk = vocab_->specials().unk;
  if (utf8_length(word) > kMaxCharsPerWord) return {unk};

  std::vector<TokenId> pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < word.size()) {
    // Candidate ends sit on code point boundaries, longest first.
    std::vector<std::size_t> ends;
    for (std::size_t e = start; e < word.size();) {
      e += utf8_char_len(static_cast<unsigned char>(word[e]));
      ends.push_back(std::min(e, word.size()));
    }
    std::optional<TokenId> found;
    std::size_t found_end = start;
    for (auto it = ends.rbegin(); it != ends.rend(); ++it) {
      candidate.assign(start > 0 ? "##" : "");
      candidate.append(word.substr(start, *it - start));
      if (auto id = vocab_->find(candidate)) {
        found = id;
        found_end = *it;
        break;
      }
    }
    if (!found) return {unk};
    pieces.push_back(*found);
    start = found_end;
  }
  return pieces;
}

std::vector<TokenId> Tokenizer::bpe(std::string_view piece) const {
  const auto& syms = byte_symbols();
  std::vector<std::string> parts;
  parts.reserve(piece.size());
  for (char c : piece) parts.push_back(syms[static_cast<unsigned char>(c)]);

  while (parts.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best = parts.size();
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
      if (auto r = vocab_->merge_rank(parts[k], parts[k + 1]); r && *r < best_rank) {
        best_rank = *r;
        best = k;
      }
    }
    if (best == parts.size()) break;
    // Merge every occurrence of the winning pair, left to right.
    const std::string left = parts[best];
    const std::string right = parts[best + 1];
    std::vector<std::string> merged;
    merged.reserve(parts.size());
    for (std::size_t k = 0; k < parts.size();) {
      if (k + 1 < parts.size() && parts[k] == left && parts[k + 1] == right) {
        merged.push_back(left + right);
        k += 2;
      } else {
        merged.push_back(std::move(parts[k]));
        ++k;
      }
    }
    parts = std::move(merged);
  }

  std::vector<TokenId> ids;
  ids.reserve(parts.size());
  for (const auto& p : parts) ids.push_back(vocab_->find(p).value_or(vocab_->specials().unk));
  return ids;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  if (vocab_->kind() == VocabKind::wordpiece) {
    for (const auto& w : basic_words(text)) {
      auto pieces = wordpiece(w);
      ids.insert(ids.end(), pieces.begin(), pieces.end());
    }
  } else {
    for (auto piece : gpt2_pieces(text)) {
      auto pieces = bpe(piece);
      ids.insert(ids.end(), pieces.begin(), pieces.end());
    }
  }
  return ids;
}

std::vector<TokenId> Tokenizer::tokenize(std::string_view text) const {
  auto content = encode(text);
  std::vector<TokenId> ids;
  ids.reserve(content.size() + 2);
  ids.push_back(vocab_->specials().cls);
  ids.insert(ids.end(), content.begin(), content.end());
  ids.push_back(vocab_->specials().sep);
  return ids;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  const auto& sp = vocab_->specials();
  auto skip = [&](TokenId id) { return id == sp.cls || id == sp.sep || id == sp.pad; };
  std::string out;
  if (vocab_->kind() == VocabKind::wordpiece) {
    for (auto id : ids) {
      if (skip(id)) continue;
      const auto& tok = vocab_->token(id);
      if (tok.starts_with("##")) {
        out.append(tok, 2);
      } else {
        if (!out.empty()) out.push_back(' ');
        out.append(tok);
      }
    }
    return out;
  }
  const auto& bytes = symbol_bytes();
  for (auto id : ids) {
    if (skip(id)) continue;
    const auto& tok = vocab_->token(id);
    if (vocab_->is_special(id)) {
      out.append(tok);
      continue;
    }
    for (std::size_t i = 0; i < tok.size();) {
      const auto len = utf8_char_len(static_cast<unsigned char>(tok[i]));
      const auto it = bytes.find(tok.substr(i, len));
      if (it != bytes.end()) {
        out.push_back(static_cast<char>(it->second));
      } else {
        out.append(tok, i, len);
      }
      i += len;
    }
  }
  return out;
}

bool Tokenizer::is_word_start(TokenId id, bool first_content_token) const {
  if (first_content_token) return true;
  const auto& tok = vocab_->token(id);
  if (vocab_->kind() == VocabKind::wordpiece) return !tok.starts_with("##");
  // Byte-level BPE marks a leading space with U+0120.
  return tok.starts_with(byte_symbols()[static_cast<unsigned char>(' ')]) || vocab_->is_special(id);
}

bool equal_modulo_whitespace(std::string_view a, std::string_view b) {
  auto strip = [](std::string_view s) {
    std::string out;
    for (char c : s) {
      if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    return out;
  };
  return strip(a) == strip(b);
}

}  // namespace corpusforge
