#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corpusforge/kg_ingest.hpp"

namespace corpusforge {

enum class Source { atomic, glucose };

std::string_view to_string(Source s);

struct VerbalizedSample {
  std::uint64_t id = 0;
  std::string text;
  Source source = Source::atomic;
  std::uint64_t source_id = 0;
  // event/physical/social for ATOMIC, "dimension_<d>" for GLUCOSE.
  std::string category;
  // Relation name or GLUCOSE connective marker.
  std::string relation;
  Split split = Split::train;

  friend bool operator==(const VerbalizedSample&, const VerbalizedSample&) = default;
};

json to_json(const VerbalizedSample& s);
VerbalizedSample sample_from_json(const json& j);

// True for any run of two or more underscores.
bool has_blank(std::string_view text);
bool is_none_target(std::string_view tail);
// Detects PersonX / PersonY / PersonZ (case-insensitive, optional inner space).
bool has_person_placeholder(std::string_view text);

struct FilterReport {
  std::size_t input = 0;
  std::size_t duplicates = 0;
  std::size_t none_targets = 0;
  std::size_t blanks = 0;
  std::size_t kept = 0;
  std::map<Category, std::size_t> kept_by_category;

  std::size_t dropped() const { return duplicates + none_targets + blanks; }
};

json to_json(const FilterReport& r);

// Drops, in this order of precedence, repeated (head, relation, tail)
// triples, "none" targets and triples with a blank. Keeps first occurrences
// in input order.
std::pair<std::vector<Triple>, FilterReport> filter_triples(std::span<const Triple> triples);

struct NameAssignment {
  // Replacements for PersonX, PersonY, PersonZ.
  std::array<std::string, 3> persons;
};

class NameAssigner {
 public:
  static constexpr std::size_t kNameCount = 20;
  static const std::array<std::string_view, kNameCount>& default_names();

  explicit NameAssigner(std::uint64_t seed) : seed_(seed) {}

  // PersonX gets the name at a seeded hash of the id; PersonY and PersonZ
  // take the following distinct names.
  NameAssignment assign(std::uint64_t sample_id) const;

 private:
  std::uint64_t seed_;
};

std::string substitute_names(std::string_view text, const NameAssignment& names);

// head + (". " | " ") + template + " " + tail, then name substitution.
std::string verbalize_parts(std::string_view head, const RelationEntry& relation, std::string_view tail,
                            const NameAssignment& names);

// Throws std::logic_error if the relation has no template.
VerbalizedSample verbalize_triple(const Triple& t, const RelationTable& table, const NameAssigner& names);

// ---------------------------------------------------------------------------

class ConnectiveTable {
 public:
  static const ConnectiveTable& builtin();
  static ConnectiveTable load(const fs::path& path);
  static ConnectiveTable from_json(const json& doc);

  const std::string& version() const { return version_; }
  const std::string& phrase(std::string_view marker) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::string version_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

VerbalizedSample verbalize_glucose(const GlucoseRecord& r, const ConnectiveTable& table);

struct GlucoseSplit {
  std::vector<VerbalizedSample> train;
  std::vector<VerbalizedSample> dev;
  std::vector<std::string> warnings;
};

// 90/10 seeded partition; each side is ordered by sample id.
GlucoseSplit split_glucose(std::vector<VerbalizedSample> samples, std::uint64_t seed);

}  // namespace corpusforge
