#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corpusforge/common.hpp"

namespace corpusforge {

enum class AsksFor { cause, effect };
enum class Subset { none, easy, hard };

std::string_view to_string(AsksFor a);
std::string_view to_string(Subset s);

inline constexpr std::string_view kCausePrompt = "It is because ";
inline constexpr std::string_view kEffectPrompt = "As a result, ";

struct ChoiceInstance {
  std::string id;
  std::string premise;
  std::string choice1;
  std::string choice2;
  AsksFor asks_for = AsksFor::cause;
  int label = 1;
  Subset subset = Subset::none;
  bool prompted = false;

  friend bool operator==(const ChoiceInstance&, const ChoiceInstance&) = default;
};

json to_json(const ChoiceInstance& c);
ChoiceInstance choice_from_json(const json& j);

// COPA / BCOPA-CE XML: <item id asks-for most-plausible-alternative> with
// <p>, <a1>, <a2> children. Malformed files throw InputFormatError with the
// offending line.
std::vector<ChoiceInstance> load_copa(const fs::path& path);
std::vector<ChoiceInstance> parse_copa(std::string_view xml, std::string_view source_name = "<copa>");

std::string_view prompt_for(AsksFor a);
// Prefixes both choices with the ask-for prompt; a no-op on prompted input.
ChoiceInstance add_prompt(ChoiceInstance inst);

struct ChoiceSplit {
  std::vector<ChoiceInstance> train;
  std::vector<ChoiceInstance> dev;
};

// Seeded 90/10 hyperparameter-tuning split of the COPA development set.
ChoiceSplit tuning_split(std::span<const ChoiceInstance> instances, std::uint64_t seed);

// Index file: {"easy": [ids], "hard": [ids]}; ids may be numbers or strings.
struct SubsetIndex {
  std::vector<std::string> easy;
  std::vector<std::string> hard;
};

SubsetIndex load_subset_index(const fs::path& path);
SubsetIndex parse_subset_index(const json& doc);

struct TagResult {
  std::vector<ChoiceInstance> instances;
  std::vector<std::string> warnings;
};

TagResult tag_easy_hard(std::vector<ChoiceInstance> instances, const SubsetIndex& index);

// SWAG multiple-choice layout: id,sent1,sent2,ending0,ending1,label with a
// zero-based label.
std::string to_swag_csv(std::span<const ChoiceInstance> instances);

// ---------------------------------------------------------------------------

struct Span {
  std::size_t start = 0;  // code points, half-open
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct EventMarkers {
  std::string e1_open = "<e1>";
  std::string e1_close = "</e1>";
  std::string e2_open = "<e2>";
  std::string e2_close = "</e2>";
};

struct RelationInstance {
  std::string id;
  std::string text;
  Span e1;
  Span e2;
  std::string label;

  friend bool operator==(const RelationInstance&, const RelationInstance&) = default;
};

// Empty string when the spans are valid, otherwise the reason.
std::string validate_spans(const RelationInstance& inst);

// Wraps both event spans with the markers; everything outside the markers is
// copied byte for byte.
std::string render_with_markers(const RelationInstance& inst, const EventMarkers& markers = {});
// Inverse of render_with_markers for a given instance.
std::string strip_markers(std::string_view rendered, const RelationInstance& inst, const EventMarkers& markers = {});

json to_json(const RelationInstance& r, const EventMarkers& markers = {});

struct TcrLoad {
  std::vector<RelationInstance> instances;
  std::vector<RejectEntry> rejects;
};

// Intermediate JSONL: {"id","text","e1":[start,end],"e2":[start,end],"label"}
// with code point offsets.
TcrLoad load_tcr(const fs::path& path);
TcrLoad parse_tcr_jsonl(std::string_view data, std::string_view source_name = "<tcr>");

}  // namespace corpusforge
