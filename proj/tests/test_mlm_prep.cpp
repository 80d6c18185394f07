#include <set>

#include <doctest.h>

#include "corpusforge/io.hpp"
#include "corpusforge/mlm_prep.hpp"
#include "support.hpp"

using namespace corpusforge;

namespace {

const Tokenizer& wp() {
  static const Tokenizer tok(
      std::make_shared<const SubwordVocab>(SubwordVocab::load_wordpiece(cftest::data("vocab/wordpiece/vocab.txt"))));
  return tok;
}

const Tokenizer& bpe() {
  static const Tokenizer tok(std::make_shared<const SubwordVocab>(
      SubwordVocab::load_bpe(cftest::data("vocab/bpe/vocab.json"), cftest::data("vocab/bpe/merges.txt"))));
  return tok;
}

const std::vector<std::string> kTexts = {
    "Alex drinks coffee. As a result, Alex will stays awake.",
    "Unseen wordsmithery: zebras quickly juxtapose!",
    "The trash bag is full causes/enables I pick up the bag.",
    "Riley bakes a cake. But before, Riley needed an oven.",
};

std::vector<VerbalizedSample> samples(std::size_t n) {
  std::vector<VerbalizedSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = i;
    out[i].text = kTexts[i % kTexts.size()];
    out[i].split = i % 10 == 0 ? Split::dev : Split::train;
  }
  return out;
}

}  // namespace

TEST_CASE("mask rate 0 masks nothing") {
  MaskingPolicy p;
  p.mask_rate = 0;
  for (const auto* tok : {&wp(), &bpe()}) {
    const auto ids = tok->tokenize(kTexts[0]);
    const auto e = mask_example(ids, *tok, 3, 42, p);
    CHECK(e.masked_positions.empty());
    CHECK(e.labels.empty());
    CHECK(std::vector<TokenId>(e.input_ids.begin(), e.input_ids.begin() + ids.size()) == ids);
  }
}

TEST_CASE("mask rate 1 with mask-only action masks every content position") {
  MaskingPolicy p;
  p.mask_rate = 1;
  p.replace_mask = 1;
  p.replace_random = 0;
  p.keep = 0;
  p.pad_to_max = false;
  const auto ids = wp().tokenize("Alex drinks coffee");
  const auto e = mask_example(ids, wp(), 1, 1, p);
  CHECK(e.masked_positions.size() == ids.size() - 2);
  CHECK(e.input_ids.front() == wp().vocab().specials().cls);
  CHECK(e.input_ids.back() == wp().vocab().specials().sep);
  for (std::size_t i = 1; i + 1 < e.input_ids.size(); ++i) CHECK(e.input_ids[i] == wp().vocab().specials().mask);
}

TEST_CASE("delimiters and padding are never masked; labels restore the input") {
  MaskingPolicy p;
  p.mask_rate = 0.5;
  for (const auto* tok : {&wp(), &bpe()}) {
    const auto& sp = tok->vocab().specials();
    for (std::uint64_t id = 0; id < 200; ++id) {
      const auto ids = tok->tokenize(kTexts[id % kTexts.size()]);
      const auto e = mask_example(ids, *tok, id, 7, p);
      CHECK(e.input_ids.size() == p.max_seq_len);
      CHECK(e.attention_mask.size() == p.max_seq_len);
      CHECK(e.labels.size() == e.masked_positions.size());
      const auto restored = restore_labels(e);
      const auto n = std::min(ids.size(), p.max_seq_len);
      for (std::size_t k = 0; k < e.masked_positions.size(); ++k) {
        CHECK(e.masked_positions[k] > 0);
        CHECK(e.masked_positions[k] + 1 < n);
        CHECK_FALSE(tok->vocab().is_special(e.labels[k]));
      }
      if (!e.truncated) {
        CHECK(std::vector<TokenId>(restored.begin(), restored.begin() + ids.size()) == ids);
      }
      for (std::size_t i = n; i < e.input_ids.size(); ++i) {
        CHECK(e.input_ids[i] == sp.pad);
        CHECK(e.attention_mask[i] == 0);
      }
    }
  }
}

TEST_CASE("random replacements come from the ordinary vocabulary") {
  MaskingPolicy p;
  p.mask_rate = 1;
  p.replace_mask = 0;
  p.replace_random = 1;
  p.keep = 0;
  const auto ids = wp().tokenize(kTexts[1]);
  for (std::uint64_t id = 0; id < 50; ++id) {
    const auto e = mask_example(ids, wp(), id, 3, p);
    for (auto pos : e.masked_positions) {
      CHECK_FALSE(wp().vocab().is_special(e.input_ids[pos]));
      CHECK(wp().vocab().token(e.input_ids[pos]).rfind("[unused", 0) != 0);
    }
  }
}

TEST_CASE("whole-word masking selects every piece of a word together") {
  MaskingPolicy p;
  p.whole_word = true;
  p.mask_rate = 0.4;
  p.max_seq_len = 64;
  for (const auto* tok : {&wp(), &bpe()}) {
    const auto ids = tok->tokenize(kTexts[1]);
    // Word index per position (content only).
    std::vector<int> word(ids.size(), -1);
    int w = -1;
    for (std::size_t i = 1; i + 1 < ids.size(); ++i) {
      if (tok->is_word_start(ids[i], i == 1)) ++w;
      word[i] = w;
    }
    REQUIRE(w >= 3);
    for (std::uint64_t id = 0; id < 200; ++id) {
      const auto e = mask_example(ids, *tok, id, 11, p);
      std::set<std::uint32_t> masked(e.masked_positions.begin(), e.masked_positions.end());
      for (std::size_t i = 1; i + 1 < ids.size(); ++i) {
        for (std::size_t j = 1; j + 1 < ids.size(); ++j) {
          if (word[i] == word[j]) CHECK(masked.count(static_cast<std::uint32_t>(i)) == masked.count(static_cast<std::uint32_t>(j)));
        }
      }
    }
  }
}

TEST_CASE("truncation keeps the closing delimiter") {
  MaskingPolicy p;
  p.max_seq_len = 8;
  std::string long_text;
  for (int i = 0; i < 20; ++i) long_text += "coffee ";
  const auto ids = wp().tokenize(long_text);
  REQUIRE(ids.size() > 8);
  const auto e = mask_example(ids, wp(), 0, 0, p);
  CHECK(e.truncated);
  CHECK(e.input_ids.size() == 8);
  CHECK(e.input_ids.front() == wp().vocab().specials().cls);
  CHECK(e.input_ids.back() == wp().vocab().specials().sep);
  for (auto pos : e.masked_positions) CHECK(pos < 7);
}

TEST_CASE("masking is a pure function of (seed, sample id)") {
  MaskingPolicy p;
  const auto ids = bpe().tokenize(kTexts[2]);
  CHECK(mask_example(ids, bpe(), 5, 42, p) == mask_example(ids, bpe(), 5, 42, p));
  bool differs = false;
  for (std::uint64_t s = 0; s < 20 && !differs; ++s) {
    differs = mask_example(ids, bpe(), 5, 42, p) != mask_example(ids, bpe(), 5, 100 + s, p);
  }
  CHECK(differs);
}

TEST_CASE("policy validation") {
  MaskingPolicy p;
  CHECK_NOTHROW(p.validate());
  p.keep = 0.2;
  CHECK_THROWS_AS(p.validate(), UsageError);
  p = {};
  p.mask_rate = 1.5;
  CHECK_THROWS_AS(p.validate(), UsageError);
  p = {};
  p.max_seq_len = 2;
  CHECK_THROWS_AS(p.validate(), UsageError);
  const auto q = masking_policy_from_json(json{{"whole_word", true}, {"max_seq_len", 40}});
  CHECK(q.whole_word);
  CHECK(q.max_seq_len == 40);
  CHECK(q.mask_rate == 0.15);
}

TEST_CASE("example JSON round trip") {
  MaskingPolicy p;
  const auto e = mask_example(wp().tokenize(kTexts[0]), wp(), 9, 1, p);
  CHECK(masked_example_from_json(to_json(e)) == e);
}

TEST_CASE("trainer hyperparameters") {
  const auto h = trainer_hyperparameters(MaskingPolicy{});
  CHECK(h["epochs"] == 10);
  CHECK(h["batch_size"] == 128);
  CHECK(h["early_stopping_patience"] == 5);
  CHECK(h["max_seq_len"] == 30);
}

TEST_CASE("emit_dataset writes train/dev files and a manifest") {
  cftest::TempDir dir;
  const auto corpus = samples(50);
  EmitStats stats;
  const auto manifest =
      emit_dataset(corpus, wp(), 42, MaskingPolicy{}, dir.path(), {"atomic", "atomic2020-v1", 1}, &stats);
  CHECK(stats.train == 45);
  CHECK(stats.dev == 5);
  CHECK(manifest["counts"]["train"] == 45);
  CHECK(manifest["vocab"]["sha256"] == wp().vocab().hash());
  CHECK(manifest["trainer"]["batch_size"] == 128);
  CHECK(fs::exists(dir / "manifest.json"));
  const auto train = read_file(dir / "train.jsonl");
  CHECK(split_lines(train).size() == 45);
  CHECK(manifest["files"]["train.jsonl"]["sha256"] == sha256_hex(train));
  std::uint64_t last = 0;
  bool first = true;
  for (auto line : split_lines(train)) {
    const auto e = masked_example_from_json(json::parse(line));
    if (!first) CHECK(e.sample_id > last);
    last = e.sample_id;
    first = false;
  }
}

TEST_CASE("emit_dataset is independent of worker count") {
  cftest::TempDir a, b;
  const auto corpus = samples(600);
  emit_dataset(corpus, bpe(), 7, MaskingPolicy{}, a.path(), {"x", "v", 1});
  emit_dataset(corpus, bpe(), 7, MaskingPolicy{}, b.path(), {"x", "v", 8});
  CHECK(read_file(a / "train.jsonl") == read_file(b / "train.jsonl"));
  CHECK(read_file(a / "dev.jsonl") == read_file(b / "dev.jsonl"));
  CHECK(read_file(a / "manifest.json") == read_file(b / "manifest.json"));
}

TEST_CASE("empty corpus writes only the manifest") {
  cftest::TempDir dir;
  const auto manifest = emit_dataset({}, wp(), 42, MaskingPolicy{}, dir.path(), {"empty", "v", 1});
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK_FALSE(fs::exists(dir / "train.jsonl"));
  CHECK_FALSE(fs::exists(dir / "dev.jsonl"));
  CHECK(manifest["counts"]["train"] == 0);
}
