#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace corpusforge {

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool iequals_ascii(std::string_view a, std::string_view b);
std::vector<std::string_view> split(std::string_view s, char sep);

// Whitespace-separated token count (space, tab, newline runs).
std::size_t whitespace_token_count(std::string_view s);

// Number of Unicode code points; invalid bytes count as one each.
std::size_t utf8_length(std::string_view s);

// Byte offset of the code point at index `cp`, or nullopt when cp exceeds
// the code point count. cp == utf8_length(s) maps to s.size().
std::optional<std::size_t> utf8_byte_offset(std::string_view s, std::size_t cp);

// RFC 4180 reader: quoted fields may hold commas, doubled quotes and line
// breaks. Each returned record carries the 1-based line it started on.
struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

class CsvReader {
 public:
  explicit CsvReader(std::string_view data) : data_(data) {}
  bool next(CsvRecord& rec);

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

std::string csv_escape(std::string_view field);

}  // namespace corpusforge
