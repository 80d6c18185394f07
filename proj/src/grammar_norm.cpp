#include "corpusforge/grammar_norm.hpp"

#include <array>
#include <cctype>

namespace corpusforge {

namespace rules {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_punct(char c) { return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?'; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string strip_space_before_punctuation(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (is_punct(c)) {
      while (!out.empty() && out.back() == ' ') out.pop_back();
    }
    out.push_back(c);
  }
  return out;
}

std::string capitalize_sentences(std::string_view s) {
  std::string out(s);
  bool at_start = true;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (at_start && is_lower(out[i])) {
      out[i] = static_cast<char>(out[i] - 'a' + 'A');
      at_start = false;
    } else if (is_terminal(out[i]) && i + 1 < out.size() && out[i + 1] == ' ') {
      at_start = true;
    } else if (out[i] != ' ') {
      at_start = false;
    }
  }
  return out;
}

std::string ensure_terminal_punctuation(std::string_view s) {
  std::string out(s);
  if (out.empty() || is_terminal(out.back())) return out;
  if (out.back() == ',' || out.back() == ';' || out.back() == ':') {
    out.back() = '.';
  } else {
    out.push_back('.');
  }
  return out;
}

std::string collapse_repeated_periods(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '.' && !out.empty() && out.back() == '.') continue;
    out.push_back(c);
  }
  return out;
}

bool takes_an(std::string_view word) {
  if (word.empty()) return false;
  std::string lower;
  for (char c : word) {
    if (!std::isalpha(static_cast<unsigned char>(c))) break;
    lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (lower.empty()) return false;

  static constexpr std::array<std::string_view, 5> kSilentH = {"hour", "honest", "honor", "honour", "heir"};
  for (auto p : kSilentH) {
    if (lower.starts_with(p)) return true;
  }
  static constexpr std::array<std::string_view, 12> kConsonantSound = {
      "uni", "use", "usu", "uti", "ura", "ure", "uro", "eu", "ewe", "ubiq", "uku", "utop"};
  for (auto p : kConsonantSound) {
    if (lower.starts_with(p)) return false;
  }
  // The letter run stops at '-', so "one-way" lands here as "one".
  if (lower == "one" || lower == "once" || lower == "u") return false;
  switch (lower.front()) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return true;
    default:
      return false;
  }
}

std::string indefinite_articles(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 8);
  std::size_t i = 0;
  while (i < s.size()) {
    const bool word_start = i == 0 || !is_alnum(s[i - 1]);
    if (word_start && (s[i] == 'a' || s[i] == 'A') && i + 2 < s.size() && s[i + 1] == ' ') {
      std::size_t j = i + 2;
      std::size_t k = j;
      while (k < s.size() && s[k] != ' ') ++k;
      if (takes_an(s.substr(j, k - j))) {
        out.push_back(s[i]);
        out.push_back('n');
        ++i;
        continue;
      }
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

}  // namespace rules

namespace {

Rule always(std::string name, std::string (*fn)(std::string_view)) {
  return Rule{std::move(name), [](std::string_view) { return true; }, [fn](std::string_view s) { return fn(s); }};
}

}  // namespace

const RuleSet& RuleSet::standard() {
  static const RuleSet set(
      "rules-v1",
      {
          always("collapse-whitespace", rules::collapse_whitespace),
          Rule{"space-before-punctuation",
               [](std::string_view s) {
                 for (std::size_t i = 1; i < s.size(); ++i) {
                   if (s[i - 1] == ' ' && std::string_view(".,;:!?").find(s[i]) != std::string_view::npos) return true;
                 }
                 return false;
               },
               rules::strip_space_before_punctuation},
          always("capitalize-sentences", rules::capitalize_sentences),
          Rule{"terminal-period",
               [](std::string_view s) { return !s.empty() && std::string_view(".!?").find(s.back()) == std::string_view::npos; },
               rules::ensure_terminal_punctuation},
          Rule{"repeated-periods", [](std::string_view s) { return s.find("..") != std::string_view::npos; },
               rules::collapse_repeated_periods},
          always("indefinite-article", rules::indefinite_articles),
      });
  return set;
}

std::string RuleSet::apply(std::string_view text) const {
  std::string current(text);
  for (const auto& rule : rules_) {
    if (rule.matches(current)) current = rule.rewrite(current);
  }
  return current;
}

std::string normalize(std::string_view text) { return RuleSet::standard().apply(text); }

}  // namespace corpusforge
