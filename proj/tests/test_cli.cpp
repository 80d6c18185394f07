#include <cstdlib>

#include <doctest.h>
#include <sys/wait.h>

#include "corpusforge/io.hpp"
#include "support.hpp"

using namespace corpusforge;

namespace {

int run(const std::string& args, const fs::path& out_file = "/dev/null") {
  const auto cmd = std::string(CF_CLI_PATH) + " " + args + " >" + out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string data(const std::string& rel) { return cftest::data(rel).string(); }

}  // namespace

TEST_CASE("version and help exit 0") {
  cftest::TempDir dir;
  CHECK(run("--version", dir / "v.txt") == 0);
  CHECK(read_file(dir / "v.txt").find("0.1.0") != std::string::npos);
  CHECK(run("--help") == 0);
  CHECK(run("convert-copa --help") == 0);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("verbalize --no-such-flag") == 2);
  CHECK(run("--workers 0 verbalize") == 2);
  CHECK(run("verbalize") == 2);
  CHECK(run("--set nokey=1 convert-tcr --tcr " + data("tcr/tcr_fixture.jsonl")) == 2);
}

TEST_CASE("malformed input exits 3") {
  cftest::TempDir dir;
  CHECK(run("--out " + dir.path().string() + " convert-copa --copa " + data("copa/copa-malformed.xml")) == 3);
}

TEST_CASE("missing input exits 4 and leaves no corpus file") {
  cftest::TempDir dir;
  CHECK(run("--out " + dir.path().string() + " verbalize --atomic /nonexistent/atomic") == 4);
  CHECK_FALSE(fs::exists(dir / "verbalize"));
  CHECK_FALSE(fs::exists(dir / "corpus"));
}

TEST_CASE("end-to-end run through the command line") {
  cftest::TempDir dir;
  const auto out = dir.path().string();
  CHECK(run("--out " + out + " --seed 42 all --atomic " + data("atomic") + " --glucose " +
            data("glucose/glucose_3x10.csv") + " --vocab " + data("vocab/bpe/vocab.json") + " --merges " +
            data("vocab/bpe/merges.txt") + " --vocab-kind bpe") == 0);
  CHECK(fs::exists(dir / "mlm/atomic/train.jsonl"));
  CHECK(fs::exists(dir / "mlm/glucose/manifest.json"));
  const auto m = json::parse(read_file(dir / "mlm/glucose/manifest.json"));
  CHECK(m["vocab"]["kind"] == "byte_bpe");

  CHECK(run("--out " + out + " stats --atomic " + data("atomic"), dir / "stats.txt") == 0);
  CHECK(read_file(dir / "stats.txt").find("target 99.90%: met") != std::string::npos);

  CHECK(run("--out " + out + " convert-copa --copa " + data("copa/copa-dev-10.xml") + " --tuning-split --subset-index " +
            data("copa/easy_hard.json")) == 0);
  CHECK(fs::exists(dir / "copa/copa-dev-10.tune-dev.jsonl"));

  CHECK(run("--out " + out + " overlap --bench " + data("overlap/bench.jsonl") + " --corpus " +
            data("overlap/corpus.jsonl") + " --threshold 0.6 --threshold 0.9 --prefilter") == 0);
  const auto om = json::parse(read_file(dir / "overlap/manifest.json"));
  CHECK(om["counts"]["pairs"].contains("0.9"));
}

TEST_CASE("environment overrides reach the pipeline") {
  cftest::TempDir dir;
  const auto cmd = "CORPUSFORGE_SEED=9 " + std::string(CF_CLI_PATH) + " --out " + dir.path().string() +
                   " convert-tcr --tcr " + data("tcr/tcr_fixture.jsonl") + " >/dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(json::parse(read_file(dir / "tcr/manifest.json"))["seed"] == 9);
}
