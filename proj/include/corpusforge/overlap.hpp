#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "corpusforge/common.hpp"

namespace corpusforge {

// Row-major so that each embedding is one contiguous row.
using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EmbeddingSet {
  std::string source;  // encoder tag
  std::size_t dim = 0;
  std::vector<std::string> ids;
  EmbeddingMatrix vectors;  // ids.size() x dim

  std::size_t size() const { return ids.size(); }
};

// Throws InputFormatError naming the offending id on a dimension mismatch,
// a non-finite component or a repeated id.
EmbeddingSet make_embedding_set(std::vector<std::string> ids, const std::vector<std::vector<double>>& rows,
                                std::string source = {});

// JSONL: optional header line {"dim": d, "source": "..."} followed by
// {"id", "vector": [...]} lines. Binary: "CFEMB1", u32 dim, u64 count, then
// per record u32 id length, id bytes, dim little-endian f64 values.
EmbeddingSet load_embeddings(const fs::path& path);
EmbeddingSet parse_embeddings_jsonl(std::string_view data, std::string_view source_name = "<embeddings>");
EmbeddingSet parse_embeddings_binary(std::string_view data, std::string_view source_name = "<embeddings>");
std::string embeddings_to_binary(const EmbeddingSet& set);

struct SimilarityPair {
  std::string bench_id;
  std::string corpus_id;
  double score = 0.0;

  friend bool operator==(const SimilarityPair&, const SimilarityPair&) = default;
};

// Zero vectors have cosine 0 with everything.
double cosine(std::span<const double> u, std::span<const double> v);

struct PairOptions {
  // Skip corpus rows whose angle to a reference direction rules out the
  // threshold. Exact: it never drops a qualifying pair.
  bool angular_prefilter = false;
  unsigned workers = 1;
  // When non-empty, only these benchmark ids are paired.
  std::unordered_set<std::string> bench_subset;
};

// Every pair with score >= threshold, sorted by score descending, then
// benchmark id, then corpus id.
std::vector<SimilarityPair> pairs_above(const EmbeddingSet& bench, const EmbeddingSet& corpus, double threshold,
                                        const PairOptions& options = {});

struct OverlapReport {
  std::string table;           // human-readable
  std::string jsonl;           // {"bench_id","corpus_id","score"} per pair
  std::map<std::string, std::size_t> counts;  // threshold label -> pairs
  std::vector<std::string> warnings;
};

// `pairs` is the result at the lowest threshold; counts for the others are
// derived by filtering. The table lists, per benchmark item, its best match.
OverlapReport report(std::span<const SimilarityPair> pairs, std::span<const double> thresholds,
                     const std::unordered_map<std::string, std::string>& bench_texts,
                     const std::unordered_map<std::string, std::string>& corpus_texts);

std::string format_score(double score);

}  // namespace corpusforge
