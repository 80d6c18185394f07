#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/common.hpp"

namespace corpusforge {

std::string read_file(const fs::path& path);

// Splits on '\n'; a trailing '\r' is dropped from each line. A final empty
// line after the last newline is not reported.
std::vector<std::string_view> split_lines(std::string_view text);

// Writes through a sibling temp file and renames into place on commit(). A
// writer destroyed without commit() removes its temp file, so readers never
// observe a half-written output.
class AtomicWriter {
 public:
  explicit AtomicWriter(fs::path target);
  AtomicWriter(const AtomicWriter&) = delete;
  AtomicWriter& operator=(const AtomicWriter&) = delete;
  ~AtomicWriter();

  std::ostream& stream() { return out_; }
  void write(std::string_view s) { out_ << s; }
  void commit();

 private:
  fs::path target_;
  fs::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

void write_file_atomic(const fs::path& path, std::string_view content);

void ensure_directory(const fs::path& dir);

class Sha256 {
 public:
  Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  ~Sha256();

  void update(std::string_view bytes);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

}  // namespace corpusforge
