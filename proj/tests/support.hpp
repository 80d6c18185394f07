#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

namespace cftest {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(CF_TEST_DATA_DIR); }
inline fs::path data(const std::string& rel) { return data_dir() / rel; }

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() / ("cftest-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

}  // namespace cftest
