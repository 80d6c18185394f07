#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/common.hpp"

namespace corpusforge {

enum class Category { event, physical, social };

inline constexpr std::array<Category, 3> kCategories = {Category::event, Category::physical, Category::social};

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view s);

struct RelationEntry {
  std::string name;
  Category category = Category::event;
  // Clause inserted between the subject and the target.
  std::string template_text;
  // True when the template opens a new clause ("as a result, PersonX will"),
  // in which case the subject is closed with a period first.
  bool new_clause = false;

  // "{head}. as a result, PersonX will {tail}" style rendering of the slots.
  std::string pattern() const;
};

// The 23 ATOMIC-2020 relations with their category and human-readable
// template. Loaded from a versioned JSON data file; extra templates cover
// relation names outside the 23 (usable for verbalization, never for
// loading triples).
class RelationTable {
 public:
  static constexpr std::size_t kRelationCount = 23;

  static const RelationTable& builtin();
  static RelationTable load(const fs::path& path);
  static RelationTable from_json(const json& doc);

  const std::string& version() const { return version_; }
  std::span<const RelationEntry> entries() const { return entries_; }

  // Lookup restricted to the 23 dataset relations.
  const RelationEntry* find(std::string_view relation) const;
  // Lookup over the dataset relations and the extra templates.
  const RelationEntry* find_template(std::string_view relation) const;

 private:
  std::string version_;
  std::vector<RelationEntry> entries_;
  std::vector<RelationEntry> extras_;
};

struct Triple {
  // Ordinal of the source row across all loaded files (rejected rows keep
  // their ordinal, so ids never shift).
  std::uint64_t id = 0;
  std::string source_file;
  std::uint64_t row = 0;
  std::string head;
  std::string relation;
  std::string tail;
  Category category = Category::event;
  Split split = Split::train;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct AtomicLoad {
  std::vector<Triple> triples;
  std::vector<RejectEntry> rejects;
  std::size_t input_rows = 0;
};

// `path` is either a directory holding {train,dev}.tsv (or .jsonl) files or
// a single file whose stem names the split. Missing inputs throw IoError.
AtomicLoad load_atomic(const fs::path& path, std::span<const Split> splits, const RelationTable& table,
                       unsigned workers = 1);

// Row-level parsers, exposed for the JSONL intermediate schema and tests.
AtomicLoad parse_atomic_tsv(std::string_view data, std::string_view source_file, Split split,
                            const RelationTable& table, std::uint64_t first_id = 0, unsigned workers = 1);
AtomicLoad parse_atomic_jsonl(std::string_view data, std::string_view source_file, Split split,
                              const RelationTable& table, std::uint64_t first_id = 0);

json to_json(const Triple& t);

// ---------------------------------------------------------------------------

enum class Specificity { specific, general };

std::string_view to_string(Specificity s);
std::optional<Specificity> parse_specificity(std::string_view s);

inline constexpr std::array<std::string_view, 5> kGlucoseConnectives = {
    ">Causes/Enables>", ">Motivates>", ">Enables>", ">Causes>", ">Results in>"};

struct GlucoseRecord {
  // row_index * 20 + (dimension - 1) * 2 + specificity: positional, stable.
  std::uint64_t id = 0;
  std::string source_file;
  std::uint64_t row = 0;
  int dimension = 1;
  Specificity specificity = Specificity::specific;
  std::string antecedent;
  std::string connective;
  std::string consequent;

  friend bool operator==(const GlucoseRecord&, const GlucoseRecord&) = default;
};

struct GlucoseLoad {
  std::vector<GlucoseRecord> records;
  std::vector<RejectEntry> rejects;
  // Non-empty statement cells seen (records + rejects).
  std::size_t input_statements = 0;
  std::size_t empty_cells = 0;
};

struct StatementParts {
  std::string antecedent;
  std::string connective;
  std::string consequent;
};

// Splits "A >Connective> B" at the single connective marker. Returns nullopt
// with `reason` set when the marker is missing, repeated or a span is empty.
std::optional<StatementParts> split_statement(std::string_view statement, std::string* reason = nullptr);

// Accepts the GLUCOSE CSV release (columns "<d>_specificNL"/"<d>_generalNL")
// or the JSONL intermediate schema (.jsonl extension).
GlucoseLoad load_glucose(const fs::path& path);
GlucoseLoad parse_glucose_csv(std::string_view data, std::string_view source_file);
GlucoseLoad parse_glucose_jsonl(std::string_view data, std::string_view source_file);

json to_json(const GlucoseRecord& r);

}  // namespace corpusforge
