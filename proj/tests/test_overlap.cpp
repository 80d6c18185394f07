#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include <doctest.h>

#include "corpusforge/io.hpp"
#include "corpusforge/overlap.hpp"
#include "support.hpp"

using namespace corpusforge;

namespace {

std::vector<std::vector<double>> gaussian_rows(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (auto& r : rows) {
    for (auto& x : r) x = g(rng);
  }
  return rows;
}

EmbeddingSet named(const std::string& prefix, const std::vector<std::vector<double>>& rows) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back(prefix + std::to_string(i));
  return make_embedding_set(std::move(ids), rows, "test");
}

// Independent reference: textbook formula in long double, every pair.
std::vector<std::tuple<std::string, std::string, double>> brute_force(const EmbeddingSet& a,
                                                                      const std::vector<std::vector<double>>& ar,
                                                                      const EmbeddingSet& b,
                                                                      const std::vector<std::vector<double>>& br,
                                                                      double threshold) {
  std::vector<std::tuple<std::string, std::string, double>> out;
  for (std::size_t i = 0; i < ar.size(); ++i) {
    for (std::size_t j = 0; j < br.size(); ++j) {
      long double dot = 0, na = 0, nb = 0;
      for (std::size_t k = 0; k < ar[i].size(); ++k) {
        dot += static_cast<long double>(ar[i][k]) * br[j][k];
        na += static_cast<long double>(ar[i][k]) * ar[i][k];
        nb += static_cast<long double>(br[j][k]) * br[j][k];
      }
      const double s = (na == 0 || nb == 0) ? 0.0 : static_cast<double>(dot / std::sqrt(na * nb));
      if (s >= threshold) out.emplace_back(a.ids[i], b.ids[j], s);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (std::get<2>(x) != std::get<2>(y)) return std::get<2>(x) > std::get<2>(y);
    return std::tie(std::get<0>(x), std::get<1>(x)) < std::tie(std::get<0>(y), std::get<1>(y));
  });
  return out;
}

}  // namespace

TEST_CASE("pairs_above matches the brute-force oracle on 20x50 fixtures") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto br = gaussian_rows(rng, 20, 8);
    const auto cr = gaussian_rows(rng, 50, 8);
    const auto bench = named("b", br);
    const auto corpus = named("c", cr);
    for (double t : {-1.0, 0.0, 0.3, 0.5, 0.7, 1.01}) {
      const auto expected = brute_force(bench, br, corpus, cr, t);
      for (bool prefilter : {false, true}) {
        for (unsigned workers : {1u, 4u}) {
          CAPTURE(seed);
          CAPTURE(t);
          CAPTURE(prefilter);
          PairOptions o;
          o.angular_prefilter = prefilter;
          o.workers = workers;
          const auto got = pairs_above(bench, corpus, t, o);
          REQUIRE(got.size() == expected.size());
          for (std::size_t k = 0; k < got.size(); ++k) {
            CHECK(got[k].bench_id == std::get<0>(expected[k]));
            CHECK(got[k].corpus_id == std::get<1>(expected[k]));
            CHECK(got[k].score == doctest::Approx(std::get<2>(expected[k])).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("raising the threshold only removes pairs") {
  std::mt19937_64 rng(99);
  const auto bench = named("b", gaussian_rows(rng, 20, 6));
  const auto corpus = named("c", gaussian_rows(rng, 50, 6));
  std::size_t previous = SIZE_MAX;
  std::vector<SimilarityPair> last;
  for (double t = -1.0; t <= 1.0; t += 0.1) {
    const auto pairs = pairs_above(bench, corpus, t, {true, 1, {}});
    CHECK(pairs.size() <= previous);
    for (const auto& p : pairs) CHECK((previous == SIZE_MAX || std::find(last.begin(), last.end(), p) != last.end()));
    previous = pairs.size();
    last = pairs;
  }
}

TEST_CASE("cosine basics") {
  const std::vector<double> u{1, 2, 3}, v{-2, 0.5, 4}, z{0, 0, 0}, o{3, 0, 0}, p{0, 5, 0};
  CHECK(cosine(u, u) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cosine(u, v) == cosine(v, u));
  CHECK(cosine(u, z) == 0.0);
  CHECK(cosine(o, p) == 0.0);
  const std::vector<double> big{1e300, 1e300}, small{1e-300, 1e-300};
  CHECK(cosine(big, big) == doctest::Approx(1.0));
  CHECK(cosine(small, small) == doctest::Approx(1.0));
}

TEST_CASE("identical vectors pair at 1.0; orthogonal vectors are excluded") {
  const auto bench = make_embedding_set({"q"}, {{1, 1, 0, 0}});
  const auto corpus = make_embedding_set({"same", "orth", "neg"}, {{2, 2, 0, 0}, {0, 0, 1, 0}, {-1, -1, 0, 0}});
  const auto pairs = pairs_above(bench, corpus, 0.5);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].corpus_id == "same");
  CHECK(pairs[0].score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pairs_above(bench, corpus, 1e-9).size() == 1);
  CHECK(pairs_above(bench, corpus, -1.0).size() == 3);
}

TEST_CASE("bench subset restricts the query side") {
  std::mt19937_64 rng(3);
  const auto bench = named("b", gaussian_rows(rng, 10, 4));
  const auto corpus = named("c", gaussian_rows(rng, 10, 4));
  PairOptions o;
  o.bench_subset = {"b2", "b7"};
  for (const auto& p : pairs_above(bench, corpus, -1.0, o)) CHECK((p.bench_id == "b2" || p.bench_id == "b7"));
  CHECK(pairs_above(bench, corpus, -1.0, o).size() == 20);
}

TEST_CASE("dimension mismatch between sets is an input error") {
  const auto a = make_embedding_set({"a"}, {{1, 2}});
  const auto b = make_embedding_set({"b"}, {{1, 2, 3}});
  CHECK_THROWS_AS(pairs_above(a, b, 0.5), InputFormatError);
}

TEST_CASE("embedding validation names the offending id") {
  auto message = [](auto&& fn) -> std::string {
    try {
      fn();
    } catch (const InputFormatError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message([] { make_embedding_set({"a", "bad"}, {{1, 2}, {1, NAN}}); }).find("bad") != std::string::npos);
  CHECK(message([] { make_embedding_set({"a", "short"}, {{1, 2}, {1}}); }).find("short") != std::string::npos);
  CHECK(message([] { make_embedding_set({"x", "x"}, {{1, 2}, {1, 2}}); }).find("x") != std::string::npos);
  const auto jsonl_nan = message([] {
    parse_embeddings_jsonl("{\"id\":\"ok\",\"vector\":[1,2]}\n{\"id\":\"nan-row\",\"vector\":[NaN,2]}\n");
  });
  CHECK(jsonl_nan.find("nan-row") != std::string::npos);
}

TEST_CASE("JSONL embeddings") {
  SUBCASE("empty file gives an empty set") {
    const auto set = parse_embeddings_jsonl("");
    CHECK(set.size() == 0);
  }
  SUBCASE("header and three 4-d vectors") {
    const auto set = parse_embeddings_jsonl(
        "{\"dim\":4,\"source\":\"enc\"}\n"
        "{\"id\":\"a\",\"vector\":[1,0,0,0]}\n"
        "{\"id\":\"b\",\"vector\":[0,1,0,0]}\n"
        "\n"
        "{\"id\":\"c\",\"vector\":[0,0,1,0.5]}\n");
    CHECK(set.size() == 3);
    CHECK(set.dim == 4);
    CHECK(set.source == "enc");
    CHECK(set.vectors(2, 3) == 0.5);
  }
  SUBCASE("header dimension is enforced") {
    CHECK_THROWS_AS(parse_embeddings_jsonl("{\"dim\":3}\n{\"id\":\"a\",\"vector\":[1,0]}\n"), InputFormatError);
  }
  SUBCASE("malformed line") { CHECK_THROWS_AS(parse_embeddings_jsonl("{\"id\":\"a\"\n"), InputFormatError); }
}

TEST_CASE("binary embeddings round trip bit for bit") {
  std::mt19937_64 rng(5);
  const auto set = named("row-", gaussian_rows(rng, 7, 5));
  const auto bytes = embeddings_to_binary(set);
  CHECK(bytes.rfind("CFEMB1", 0) == 0);
  const auto back = parse_embeddings_binary(bytes);
  CHECK(back.ids == set.ids);
  CHECK(back.dim == 5);
  CHECK(back.vectors == set.vectors);
  CHECK_THROWS_AS(parse_embeddings_binary(bytes.substr(0, bytes.size() - 3)), InputFormatError);

  cftest::TempDir dir;
  write_file_atomic(dir / "e.bin", bytes);
  CHECK(load_embeddings(dir / "e.bin").vectors == set.vectors);
}

TEST_CASE("report with no pairs") {
  const std::vector<double> thresholds{0.5, 0.6};
  const auto r = report({}, thresholds, {}, {});
  CHECK(r.jsonl.empty());
  CHECK(r.counts.at("0.5") == 0);
  CHECK(r.counts.at("0.6") == 0);
  CHECK(r.table.find("benchmark items with a match: 0") != std::string::npos);
  CHECK(r.warnings.empty());
}

TEST_CASE("report with two pairs lists best matches and counts per threshold") {
  const std::vector<SimilarityPair> pairs{{"q1", "c1", 0.91234}, {"q1", "c2", 0.55}};
  const std::vector<double> thresholds{0.5, 0.6};
  const auto r = report(pairs, thresholds, {{"q1", "The phone rang."}}, {{"c1", "A phone rings."}});
  CHECK(r.counts.at("0.5") == 2);
  CHECK(r.counts.at("0.6") == 1);
  CHECK(split_lines(r.jsonl).size() == 2);
  CHECK(r.table.find("0.9123\tThe phone rang.\tA phone rings.") != std::string::npos);
  CHECK(r.warnings.empty());
  CHECK(format_score(0.12345) == "0.1235");
}

TEST_CASE("report warns about ids missing from a supplied text map") {
  const std::vector<SimilarityPair> pairs{{"q1", "c9", 0.7}};
  const std::vector<double> thresholds{0.5};
  const auto r = report(pairs, thresholds, {{"q1", "x"}}, {{"c1", "y"}});
  CHECK(r.warnings.size() == 1);
  CHECK(r.table.find("<missing corpus c9>") != std::string::npos);
}

TEST_CASE("extreme magnitudes survive the matrix screen") {
  const auto bench = make_embedding_set({"big"}, {{1e300, 1e300}});
  const auto corpus = make_embedding_set({"tiny"}, {{1e-300, 1e-300}});
  for (bool prefilter : {false, true}) {
    const auto pairs = pairs_above(bench, corpus, 0.99, {prefilter, 1, {}});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].score == doctest::Approx(1.0));
  }
}
