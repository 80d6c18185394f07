#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace corpusforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr std::string_view kToolName = "corpusforge";
inline constexpr std::string_view kToolVersion = "0.1.0";

// Process exit codes surfaced by the CLI.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  usage = 2,
  input_format = 3,
  io = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::usage, what) {}
};

class InputFormatError : public Error {
 public:
  explicit InputFormatError(const std::string& what) : Error(ExitCode::input_format, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::io, what) {}
};

enum class Split { train, dev };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

// One malformed input row. Serialized as {source_file, row, reason}.
struct RejectEntry {
  std::string source_file;
  std::uint64_t row = 0;
  std::string reason;

  friend bool operator==(const RejectEntry&, const RejectEntry&) = default;
};

json to_json(const RejectEntry& r);
std::string rejects_to_jsonl(const std::vector<RejectEntry>& rejects);

}  // namespace corpusforge
