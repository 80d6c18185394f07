#include <cctype>
#include <random>
#include <thread>

#include <doctest.h>
#include <httplib.h>

#include "corpusforge/grammar_norm.hpp"
#include "support.hpp"

using namespace corpusforge;

namespace {

std::string alnum_lower(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// The rules may only insert the "n" of a/an; every other alphanumeric
// character of the input must survive in order.
bool only_inserts_n(std::string_view in, std::string_view out) {
  const auto a = alnum_lower(in);
  const auto b = alnum_lower(out);
  std::size_t i = 0;
  for (char c : b) {
    if (i < a.size() && a[i] == c) {
      ++i;
    } else if (c != 'n') {
      return false;
    }
  }
  return i == a.size();
}

std::string random_sentence(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {
      "alex", "drinks", "coffee", "a", "an", "apple", "hour", "university", "umbrella", "honest", "as",
      "result,", "will", "stays", "awake", ".", "..", "!", "?", ",", "the", "dog", "x", "PersonX", "é"};
  static const std::vector<std::string> gaps = {" ", "  ", "\t", " \n "};
  std::uniform_int_distribution<std::size_t> len(0, 12), w(0, words.size() - 1), g(0, gaps.size() - 1);
  std::string s;
  const auto n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += gaps[g(rng)];
    s += words[w(rng)];
  }
  return s;
}

std::string checker_command() {
  return std::string(CF_PYTHON) + " " + cftest::data("checker/doubled_words.py").string();
}

}  // namespace

TEST_CASE("the worked example normalizes as documented") {
  CHECK(normalize("alex drinks coffee . as a result, Alex will stays awake") ==
        "Alex drinks coffee. As a result, Alex will stays awake.");
}

TEST_CASE("article agreement") {
  CHECK(normalize("A apple") == "An apple.");
  CHECK(normalize("she ate a orange") == "She ate an orange.");
  // One-directional: "an" before a consonant is left alone so the rules never
  // delete letters.
  CHECK(normalize("an dog barks") == "An dog barks.");
  CHECK(normalize("a hour passed") == "An hour passed.");
  CHECK(normalize("a university") == "A university.");
  CHECK(normalize("a honest man") == "An honest man.");
  CHECK(rules::takes_an("umbrella"));
  CHECK_FALSE(rules::takes_an("user"));
  CHECK_FALSE(rules::takes_an("one"));
}

TEST_CASE("individual rules") {
  CHECK(rules::collapse_whitespace("  a \t b\n c  ") == "a b c");
  CHECK(rules::strip_space_before_punctuation("a , b . c !") == "a, b. c!");
  CHECK(rules::capitalize_sentences("one. two? three! four") == "One. Two? Three! Four");
  CHECK(rules::ensure_terminal_punctuation("done") == "done.");
  CHECK(rules::ensure_terminal_punctuation("done?") == "done?");
  CHECK(rules::collapse_repeated_periods("wait.. what...") == "wait. what.");
}

TEST_CASE("empty and whitespace-only input") {
  CHECK(normalize("") == "");
  CHECK(normalize("   ") == "");
}

TEST_CASE("already clean text is a fixed point") {
  const std::string clean = "Sam gives Jordan a gift. As a result, Jordan feels happy.";
  CHECK(normalize(clean) == clean);
}

TEST_CASE("normalization is idempotent and never drops alphanumerics") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 400; ++i) {
      const auto in = random_sentence(rng);
      const auto once = normalize(in);
      CAPTURE(in);
      CAPTURE(once);
      CHECK(normalize(once) == once);
      CHECK(only_inserts_n(in, once));
    }
  }
}

TEST_CASE("rule set carries a version") { CHECK_FALSE(RuleSet::standard().version().empty()); }

TEST_CASE("issue line parsing accepts the three shapes") {
  CHECK(parse_issue_line("").empty());
  CHECK(parse_issue_line("[]").empty());
  const auto a = parse_issue_line(R"([{"offset":1,"length":2,"message":"m","replacements":["x","y"]}])");
  REQUIRE(a.size() == 1);
  CHECK(a[0].offset == 1);
  CHECK(a[0].replacements == std::vector<std::string>{"x", "y"});
  CHECK(parse_issue_line(R"({"offset":0,"length":1})").size() == 1);
  const auto lt = parse_issue_line(R"({"matches":[{"offset":3,"length":1,"replacements":[{"value":"z"}]}]})");
  REQUIRE(lt.size() == 1);
  CHECK(lt[0].replacements == std::vector<std::string>{"z"});
  CHECK_THROWS_AS(parse_issue_line("not json"), CheckerUnavailable);
  CHECK_THROWS_AS(parse_issue_line("42"), CheckerUnavailable);
}

TEST_CASE("suggestions apply at code point offsets") {
  std::vector<CheckIssue> issues = {{5, 9, "dup", {"café"}}, {0, 2, "x", {}}};
  CHECK(apply_suggestions("Take café café now.", issues) == "Take café now.");
  // Out-of-range issues are ignored.
  std::vector<CheckIssue> bad = {{100, 2, "x", {"y"}}};
  CHECK(apply_suggestions("short", bad) == "short");
}

TEST_CASE("subprocess checker flags doubled words") {
  SubprocessChecker checker(checker_command());
  const std::vector<std::string> batch = {"The the cat sat.", "Nothing wrong here.", "Café café au lait."};
  SUBCASE("advisory by default") {
    const auto report = check_external(batch, checker);
    CHECK(report.checker_available);
    CHECK(report.warnings.empty());
    REQUIRE(report.sentences.size() == 3);
    CHECK(report.sentences[0].issues.size() == 1);
    CHECK(report.sentences[1].issues.empty());
    CHECK(report.sentences[2].issues.size() == 1);
    for (const auto& s : report.sentences) CHECK(s.output == s.input);
  }
  SUBCASE("applying suggestions") {
    const auto report = check_external(batch, checker, true, 2);
    CHECK(report.sentences[0].output == "The cat sat.");
    CHECK(report.sentences[1].output == "Nothing wrong here.");
    CHECK(report.sentences[2].output == "Café au lait.");
  }
}

TEST_CASE("unavailable checkers leave output equal to input with a warning") {
  const std::vector<std::string> batch = {"The the cat sat.", "Fine."};
  SubprocessChecker missing("/nonexistent/checker-binary");
  SubprocessChecker broken(cftest::data("checker/broken.sh").string());
  HttpChecker offline("http://127.0.0.1:1", "en-US", 2, std::chrono::seconds(1));
  for (GrammarChecker* c : std::vector<GrammarChecker*>{&missing, &broken, &offline}) {
    CAPTURE(c->describe());
    const auto report = check_external(batch, *c, true);
    CHECK_FALSE(report.checker_available);
    CHECK(report.warnings.size() == 1);
    for (const auto& s : report.sentences) {
      CHECK(s.output == s.input);
      CHECK(s.issues.empty());
    }
  }
}

TEST_CASE("http checker against a LanguageTool-compatible mock") {
  httplib::Server server;
  std::atomic<int> requests{0};
  server.Post("/v2/check", [&](const httplib::Request& req, httplib::Response& res) {
    ++requests;
    const auto text = req.get_param_value("text");
    CHECK(req.get_param_value("language") == "en-US");
    json body = {{"matches", json::array()}};
    if (const auto pos = text.find("a apple"); pos != std::string::npos) {
      body["matches"].push_back({{"offset", pos},
                                 {"length", 7},
                                 {"message", "Use 'an'"},
                                 {"replacements", {{{"value", "an apple"}}}}});
    }
    res.set_content(body.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpChecker checker("http://127.0.0.1:" + std::to_string(port), "en-US", 3);
  const std::vector<std::string> batch = {"I ate a apple.", "Fine.", "Another a apple here."};
  const auto report = check_external(batch, checker, true);
  server.stop();
  thread.join();

  CHECK(requests == 3);
  CHECK(report.checker_available);
  CHECK(report.sentences[0].output == "I ate an apple.");
  CHECK(report.sentences[1].output == "Fine.");
  CHECK(report.sentences[2].output == "Another an apple here.");
}
