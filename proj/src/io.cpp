#include "corpusforge/io.hpp"

#include <array>
#include <atomic>
#include <cstdio>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <unistd.h>

namespace corpusforge {

std::string_view to_string(Split s) { return s == Split::train ? "train" : "dev"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  throw UsageError(fmt::format("unknown split '{}' (expected train or dev)", s));
}

json to_json(const RejectEntry& r) {
  return json{{"source_file", r.source_file}, {"row", r.row}, {"reason", r.reason}};
}

std::string rejects_to_jsonl(const std::vector<RejectEntry>& rejects) {
  std::string out;
  for (const auto& r : rejects) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("read failed for '{}'", path.string()));
  return std::move(ss).str();
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

namespace {
std::atomic<unsigned> g_tmp_counter{0};
}

AtomicWriter::AtomicWriter(fs::path target) : target_(std::move(target)) {
  if (target_.has_parent_path()) ensure_directory(target_.parent_path());
  tmp_ = target_;
  tmp_ += fmt::format(".tmp-{}-{}", ::getpid(), g_tmp_counter.fetch_add(1));
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError(fmt::format("cannot write '{}'", tmp_.string()));
}

AtomicWriter::~AtomicWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    fs::remove(tmp_, ec);
  }
}

void AtomicWriter::commit() {
  out_.flush();
  if (!out_) throw IoError(fmt::format("write failed for '{}'", tmp_.string()));
  out_.close();
  std::error_code ec;
  fs::rename(tmp_, target_, ec);
  if (ec) throw IoError(fmt::format("cannot rename '{}' to '{}': {}", tmp_.string(), target_.string(), ec.message()));
  committed_ = true;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  AtomicWriter w(path);
  w.write(content);
  w.commit();
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError(fmt::format("cannot create directory '{}': {}", dir.string(), ec.message()));
  }
}

namespace {
std::string hex(const unsigned char* data, unsigned len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0xF]);
  }
  return out;
}
}  // namespace

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 init failed");
  }
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(std::string_view bytes) {
  if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size()) != 1) {
    throw std::runtime_error("sha256 update failed");
  }
}

std::string Sha256::hex_digest() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned len = 0;
  if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), md.data(), &len) != 1) {
    throw std::runtime_error("sha256 final failed");
  }
  return hex(md.data(), len);
}

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes);
  return h.hex_digest();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

}  // namespace corpusforge
