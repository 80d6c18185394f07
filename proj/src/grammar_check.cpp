#include <algorithm>
#include <atomic>
#include <cstdio>
#include <memory>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>
#include <sys/wait.h>
#include <unistd.h>

#include "corpusforge/grammar_norm.hpp"
#include "corpusforge/io.hpp"
#include "corpusforge/parallel.hpp"
#include "corpusforge/text.hpp"

namespace corpusforge {

namespace {

CheckIssue issue_from_json(const json& j) {
  CheckIssue issue;
  issue.offset = j.at("offset").get<std::size_t>();
  issue.length = j.at("length").get<std::size_t>();
  issue.message = j.value("message", std::string{});
  if (j.contains("replacements")) {
    for (const auto& r : j["replacements"]) {
      if (r.is_string()) {
        issue.replacements.push_back(r.get<std::string>());
      } else if (r.is_object() && r.contains("value")) {
        issue.replacements.push_back(r["value"].get<std::string>());
      }
    }
  }
  return issue;
}

std::vector<CheckIssue> issues_from_json(const json& doc) {
  std::vector<CheckIssue> issues;
  if (doc.is_array()) {
    for (const auto& j : doc) issues.push_back(issue_from_json(j));
  } else if (doc.is_object() && doc.contains("matches")) {
    for (const auto& j : doc["matches"]) issues.push_back(issue_from_json(j));
  } else if (doc.is_object()) {
    issues.push_back(issue_from_json(doc));
  } else if (!doc.is_null()) {
    throw CheckerUnavailable("checker response is not a JSON array or object");
  }
  return issues;
}

std::string one_line(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

std::atomic<unsigned> g_check_counter{0};

struct PipeCloser {
  void operator()(FILE* f) const {
    if (f) ::pclose(f);
  }
};

}  // namespace

std::vector<CheckIssue> parse_issue_line(std::string_view line) {
  line = trim(line);
  if (line.empty()) return {};
  try {
    return issues_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw CheckerUnavailable(fmt::format("malformed checker response: {}", e.what()));
  }
}

json to_json(const CheckIssue& issue) {
  return json{{"offset", issue.offset},
              {"length", issue.length},
              {"message", issue.message},
              {"replacements", issue.replacements}};
}

std::vector<std::vector<CheckIssue>> SubprocessChecker::check(std::span<const std::string> sentences) {
  if (sentences.empty()) return {};
  const auto input = fs::temp_directory_path() / fmt::format("corpusforge-check-{}-{}.txt", ::getpid(), g_check_counter.fetch_add(1));
  {
    std::string payload;
    for (const auto& s : sentences) {
      payload += one_line(s);
      payload += '\n';
    }
    write_file_atomic(input, payload);
  }
  const auto command = fmt::format("{} < '{}' 2>/dev/null", command_, input.string());
  std::string output;
  int status = -1;
  {
    FILE* raw = ::popen(command.c_str(), "r");
    if (!raw) {
      fs::remove(input);
      throw CheckerUnavailable(fmt::format("cannot start checker '{}'", command_));
    }
    std::unique_ptr<FILE, PipeCloser> pipe(raw);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe.get())) > 0) output.append(buf, n);
    status = ::pclose(pipe.release());
  }
  std::error_code ec;
  fs::remove(input, ec);
  if (status != 0) {
    throw CheckerUnavailable(fmt::format("checker '{}' exited with status {}", command_,
                                         WIFEXITED(status) ? WEXITSTATUS(status) : status));
  }
  const auto lines = split_lines(output);
  if (lines.size() != sentences.size()) {
    throw CheckerUnavailable(
        fmt::format("checker answered {} lines for {} sentences", lines.size(), sentences.size()));
  }
  std::vector<std::vector<CheckIssue>> result;
  result.reserve(lines.size());
  for (auto line : lines) result.push_back(parse_issue_line(line));
  return result;
}

std::vector<std::vector<CheckIssue>> HttpChecker::check(std::span<const std::string> sentences) {
  return parallel_map(sentences.size(), max_in_flight_, [&](std::size_t i) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    httplib::Params params{{"text", sentences[i]}, {"language", language_}};
    auto res = client.Post("/v2/check", params);
    if (!res) {
      throw CheckerUnavailable(fmt::format("checker at {} unreachable: {}", base_url_, httplib::to_string(res.error())));
    }
    if (res->status != 200) {
      throw CheckerUnavailable(fmt::format("checker at {} returned HTTP {}", base_url_, res->status));
    }
    try {
      return issues_from_json(json::parse(res->body));
    } catch (const json::exception& e) {
      throw CheckerUnavailable(fmt::format("malformed checker response: {}", e.what()));
    }
  });
}

std::string apply_suggestions(std::string_view sentence, std::span<const CheckIssue> issues) {
  struct Edit {
    std::size_t begin, end;
    const std::string* replacement;
  };
  std::vector<Edit> edits;
  for (const auto& issue : issues) {
    if (issue.replacements.empty()) continue;
    const auto begin = utf8_byte_offset(sentence, issue.offset);
    const auto end = utf8_byte_offset(sentence, issue.offset + issue.length);
    if (!begin || !end) continue;
    edits.push_back({*begin, *end, &issue.replacements.front()});
  }
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.begin < b.begin; });
  std::string out;
  std::size_t pos = 0;
  for (const auto& e : edits) {
    if (e.begin < pos) continue;  // overlaps an earlier edit
    out.append(sentence.substr(pos, e.begin - pos));
    out.append(*e.replacement);
    pos = e.end;
  }
  out.append(sentence.substr(pos));
  return out;
}

CheckReport check_external(std::span<const std::string> batch, GrammarChecker& checker, bool apply_first_suggestion,
                           std::size_t batch_size) {
  CheckReport report;
  report.sentences.reserve(batch.size());
  for (const auto& s : batch) report.sentences.push_back({s, s, {}});
  batch_size = std::max<std::size_t>(batch_size, 1);
  try {
    for (std::size_t start = 0; start < batch.size(); start += batch_size) {
      const auto count = std::min(batch_size, batch.size() - start);
      auto issues = checker.check(batch.subspan(start, count));
      for (std::size_t k = 0; k < count; ++k) report.sentences[start + k].issues = std::move(issues[k]);
    }
  } catch (const CheckerUnavailable& e) {
    const auto warning = fmt::format("grammar checker {} unavailable, keeping rule-engine output: {}",
                                     checker.describe(), e.what());
    spdlog::warn("{}", warning);
    report.checker_available = false;
    report.warnings.push_back(warning);
    for (auto& s : report.sentences) s.issues.clear();
    return report;
  }
  if (apply_first_suggestion) {
    for (auto& s : report.sentences) s.output = apply_suggestions(s.input, s.issues);
  }
  return report;
}

}  // namespace corpusforge
