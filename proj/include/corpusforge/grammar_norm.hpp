#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/common.hpp"

namespace corpusforge {

struct Rule {
  std::string name;
  std::function<bool(std::string_view)> matches;
  std::function<std::string(std::string_view)> rewrite;
};

// Ordered rewrite rules. The shipped set reaches its fixed point in a single
// pass, so apply(apply(x)) == apply(x).
class RuleSet {
 public:
  RuleSet(std::string version, std::vector<Rule> rules) : version_(std::move(version)), rules_(std::move(rules)) {}

  // whitespace collapse, space before punctuation, sentence capitalization,
  // terminal period, repeated periods, a/an agreement.
  static const RuleSet& standard();

  const std::string& version() const { return version_; }
  std::span<const Rule> rules() const { return rules_; }
  std::string apply(std::string_view text) const;

 private:
  std::string version_;
  std::vector<Rule> rules_;
};

std::string normalize(std::string_view text);

// Individual rewrites, exposed for tests.
namespace rules {
std::string collapse_whitespace(std::string_view s);
std::string strip_space_before_punctuation(std::string_view s);
std::string capitalize_sentences(std::string_view s);
std::string ensure_terminal_punctuation(std::string_view s);
std::string collapse_repeated_periods(std::string_view s);
std::string indefinite_articles(std::string_view s);
// Letter heuristic with exception lists ("a university", "an hour").
bool takes_an(std::string_view word);
}  // namespace rules

// ---------------------------------------------------------------------------
// External grammar checker. Offsets and lengths count Unicode code points.

struct CheckIssue {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::string message;
  std::vector<std::string> replacements;
};

// Parses one response line: an array of issue objects, a single issue
// object, or a LanguageTool-style {"matches": [...]} object.
std::vector<CheckIssue> parse_issue_line(std::string_view line);
json to_json(const CheckIssue& issue);

class CheckerUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GrammarChecker {
 public:
  virtual ~GrammarChecker() = default;
  // One issue list per input sentence; throws CheckerUnavailable.
  virtual std::vector<std::vector<CheckIssue>> check(std::span<const std::string> sentences) = 0;
  virtual std::string describe() const = 0;
};

// Line protocol over a shell command: stdin receives one sentence per line,
// stdout must answer with one JSON line per sentence.
class SubprocessChecker : public GrammarChecker {
 public:
  explicit SubprocessChecker(std::string command) : command_(std::move(command)) {}
  std::vector<std::vector<CheckIssue>> check(std::span<const std::string> sentences) override;
  std::string describe() const override { return "subprocess:" + command_; }

 private:
  std::string command_;
};

// LanguageTool-compatible HTTP endpoint (POST <base>/v2/check).
class HttpChecker : public GrammarChecker {
 public:
  HttpChecker(std::string base_url, std::string language = "en-US", unsigned max_in_flight = 4,
              std::chrono::seconds timeout = std::chrono::seconds(10))
      : base_url_(std::move(base_url)), language_(std::move(language)), max_in_flight_(max_in_flight),
        timeout_(timeout) {}
  std::vector<std::vector<CheckIssue>> check(std::span<const std::string> sentences) override;
  std::string describe() const override { return "http:" + base_url_; }

 private:
  std::string base_url_;
  std::string language_;
  unsigned max_in_flight_;
  std::chrono::seconds timeout_;
};

struct CheckedSentence {
  std::string input;
  std::string output;
  std::vector<CheckIssue> issues;
};

struct CheckReport {
  std::vector<CheckedSentence> sentences;
  bool checker_available = true;
  std::vector<std::string> warnings;
};

// Advisory pass: issues are reported, and only applied (first suggested
// replacement) when apply_first_suggestion is set. An unreachable checker
// leaves every sentence unchanged and records a warning.
CheckReport check_external(std::span<const std::string> batch, GrammarChecker& checker,
                           bool apply_first_suggestion = false, std::size_t batch_size = 256);

std::string apply_suggestions(std::string_view sentence, std::span<const CheckIssue> issues);

}  // namespace corpusforge
