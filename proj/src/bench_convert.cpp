#include "corpusforge/bench_convert.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include "corpusforge/io.hpp"
#include "corpusforge/split.hpp"
#include "corpusforge/text.hpp"

namespace corpusforge {

namespace pt = boost::property_tree;

std::string_view to_string(AsksFor a) { return a == AsksFor::cause ? "cause" : "effect"; }

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::easy: return "easy";
    case Subset::hard: return "hard";
    case Subset::none: break;
  }
  return "none";
}

json to_json(const ChoiceInstance& c) {
  return json{{"id", c.id},
              {"premise", c.premise},
              {"choice1", c.choice1},
              {"choice2", c.choice2},
              {"asks_for", to_string(c.asks_for)},
              {"label", c.label},
              {"subset", to_string(c.subset)},
              {"prompted", c.prompted}};
}

ChoiceInstance choice_from_json(const json& j) {
  try {
    ChoiceInstance c;
    c.id = j.at("id").get<std::string>();
    c.premise = j.at("premise").get<std::string>();
    c.choice1 = j.at("choice1").get<std::string>();
    c.choice2 = j.at("choice2").get<std::string>();
    const auto asks = j.at("asks_for").get<std::string>();
    if (asks != "cause" && asks != "effect") throw InputFormatError(fmt::format("bad asks_for '{}'", asks));
    c.asks_for = asks == "cause" ? AsksFor::cause : AsksFor::effect;
    c.label = j.at("label").get<int>();
    if (c.label != 1 && c.label != 2) throw InputFormatError(fmt::format("label {} outside {{1,2}}", c.label));
    const auto subset = j.value("subset", std::string{"none"});
    c.subset = subset == "easy" ? Subset::easy : subset == "hard" ? Subset::hard : Subset::none;
    c.prompted = j.value("prompted", false);
    return c;
  } catch (const json::exception& e) {
    throw InputFormatError(fmt::format("malformed choice instance: {}", e.what()));
  }
}

std::vector<ChoiceInstance> parse_copa(std::string_view xml, std::string_view source_name) {
  pt::ptree tree;
  std::istringstream in{std::string(xml)};
  try {
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw InputFormatError(fmt::format("{}:{}: {}", source_name, e.line(), e.message()));
  }
  if (tree.empty()) throw InputFormatError(fmt::format("{}: no root element", source_name));

  std::vector<ChoiceInstance> out;
  for (const auto& [root_name, root] : tree) {
    if (root_name == "<xmlcomment>") continue;
    for (const auto& [name, item] : root) {
      if (name != "item") continue;
      auto fail = [&](const std::string& why) {
        return InputFormatError(
            fmt::format("{}: item {}: {}", source_name, item.get("<xmlattr>.id", std::string{"?"}), why));
      };
      ChoiceInstance c;
      c.id = item.get("<xmlattr>.id", std::string{});
      if (c.id.empty()) throw fail("missing id attribute");
      const auto asks = item.get("<xmlattr>.asks-for", std::string{});
      if (asks == "cause") {
        c.asks_for = AsksFor::cause;
      } else if (asks == "effect" || asks == "result") {
        c.asks_for = AsksFor::effect;
      } else {
        throw fail(fmt::format("asks-for must be cause or effect, got '{}'", asks));
      }
      const auto label = item.get("<xmlattr>.most-plausible-alternative", std::string{});
      if (label != "1" && label != "2") throw fail(fmt::format("most-plausible-alternative must be 1 or 2, got '{}'", label));
      c.label = label == "1" ? 1 : 2;
      auto text = [&](const char* child) {
        auto node = item.get_child_optional(child);
        if (!node) throw fail(fmt::format("missing <{}>", child));
        auto value = std::string(trim(node->data()));
        if (value.empty()) throw fail(fmt::format("empty <{}>", child));
        return value;
      };
      c.premise = text("p");
      c.choice1 = text("a1");
      c.choice2 = text("a2");
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<ChoiceInstance> load_copa(const fs::path& path) {
  return parse_copa(read_file(path), path.filename().string());
}

std::string_view prompt_for(AsksFor a) { return a == AsksFor::cause ? kCausePrompt : kEffectPrompt; }

ChoiceInstance add_prompt(ChoiceInstance inst) {
  if (inst.prompted) return inst;
  const auto prompt = prompt_for(inst.asks_for);
  inst.choice1 = std::string(prompt) + inst.choice1;
  inst.choice2 = std::string(prompt) + inst.choice2;
  inst.prompted = true;
  return inst;
}

ChoiceSplit tuning_split(std::span<const ChoiceInstance> instances, std::uint64_t seed) {
  // Ids are COPA item numbers; non-numeric ids fall back to their position.
  std::vector<std::uint64_t> keys;
  keys.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    std::uint64_t key = i;
    const auto& id = instances[i].id;
    if (!id.empty() && std::all_of(id.begin(), id.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
        id.size() < 19) {
      key = std::stoull(id);
    } else {
      key = std::hash<std::string_view>{}(id) ^ (std::uint64_t{1} << 63);
    }
    keys.push_back(key);
  }
  const auto plan = plan_split(keys, seed);
  ChoiceSplit split;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    (plan.is_dev[i] ? split.dev : split.train).push_back(instances[i]);
  }
  return split;
}

SubsetIndex parse_subset_index(const json& doc) {
  if (!doc.is_object()) throw InputFormatError("subset index must be a JSON object");
  SubsetIndex index;
  auto read = [&](const char* key, std::vector<std::string>& out) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_array()) throw InputFormatError(fmt::format("subset index '{}' must be an array", key));
    for (const auto& v : doc[key]) {
      if (v.is_string()) {
        out.push_back(v.get<std::string>());
      } else if (v.is_number_integer()) {
        out.push_back(std::to_string(v.get<std::int64_t>()));
      } else {
        throw InputFormatError(fmt::format("subset index '{}' holds a non-id value", key));
      }
    }
  };
  read("easy", index.easy);
  read("hard", index.hard);
  return index;
}

SubsetIndex load_subset_index(const fs::path& path) {
  try {
    return parse_subset_index(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw InputFormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

TagResult tag_easy_hard(std::vector<ChoiceInstance> instances, const SubsetIndex& index) {
  TagResult result;
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < instances.size(); ++i) by_id.emplace(instances[i].id, i);
  auto apply = [&](const std::vector<std::string>& ids, Subset subset) {
    for (const auto& id : ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        result.warnings.push_back(fmt::format("{} id '{}' not found among instances", to_string(subset), id));
        continue;
      }
      auto& inst = instances[it->second];
      if (inst.subset != Subset::none && inst.subset != subset) {
        result.warnings.push_back(fmt::format("id '{}' listed as both easy and hard; keeping {}", id, to_string(subset)));
      }
      inst.subset = subset;
    }
  };
  apply(index.easy, Subset::easy);
  apply(index.hard, Subset::hard);
  result.instances = std::move(instances);
  return result;
}

std::string to_swag_csv(std::span<const ChoiceInstance> instances) {
  std::string out = "id,sent1,sent2,ending0,ending1,label\n";
  for (const auto& c : instances) {
    out += fmt::format("{},{},,{},{},{}\n", csv_escape(c.id), csv_escape(c.premise), csv_escape(c.choice1),
                       csv_escape(c.choice2), c.label - 1);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string validate_spans(const RelationInstance& inst) {
  const auto length = utf8_length(inst.text);
  for (const auto* s : {&inst.e1, &inst.e2}) {
    if (s->start >= s->end) return "zero-length or inverted event span";
    if (s->end > length) return fmt::format("event span [{}, {}) exceeds text length {}", s->start, s->end, length);
  }
  if (inst.e1.start < inst.e2.end && inst.e2.start < inst.e1.end) return "event spans overlap";
  return {};
}

namespace {

struct Insertion {
  std::size_t at;  // byte offset in the original text
  const std::string* marker;
  int order;  // closing markers sort before opening ones at the same offset
};

std::vector<Insertion> insertions(const RelationInstance& inst, const EventMarkers& m) {
  auto byte = [&](std::size_t cp) {
    const auto b = utf8_byte_offset(inst.text, cp);
    if (!b) throw std::invalid_argument("span outside text");
    return *b;
  };
  std::vector<Insertion> ins{{byte(inst.e1.start), &m.e1_open, 1},
                             {byte(inst.e1.end), &m.e1_close, 0},
                             {byte(inst.e2.start), &m.e2_open, 1},
                             {byte(inst.e2.end), &m.e2_close, 0}};
  std::stable_sort(ins.begin(), ins.end(),
                   [](const Insertion& a, const Insertion& b) { return a.at != b.at ? a.at < b.at : a.order < b.order; });
  return ins;
}

}  // namespace

std::string render_with_markers(const RelationInstance& inst, const EventMarkers& markers) {
  if (auto why = validate_spans(inst); !why.empty()) throw std::invalid_argument(why);
  std::string out;
  std::size_t pos = 0;
  for (const auto& ins : insertions(inst, markers)) {
    out.append(inst.text, pos, ins.at - pos);
    out.append(*ins.marker);
    pos = ins.at;
  }
  out.append(inst.text, pos);
  return out;
}

std::string strip_markers(std::string_view rendered, const RelationInstance& inst, const EventMarkers& markers) {
  std::string out;
  std::size_t src = 0;   // offset into the original text
  std::size_t rpos = 0;  // offset into rendered
  for (const auto& ins : insertions(inst, markers)) {
    const auto chunk = ins.at - src;
    out.append(rendered.substr(rpos, chunk));
    rpos += chunk;
    src = ins.at;
    if (rendered.substr(rpos, ins.marker->size()) != *ins.marker) {
      throw std::invalid_argument(fmt::format("marker '{}' not found at offset {}", *ins.marker, rpos));
    }
    rpos += ins.marker->size();
  }
  out.append(rendered.substr(rpos));
  return out;
}

json to_json(const RelationInstance& r, const EventMarkers& markers) {
  return json{{"id", r.id},
              {"text", r.text},
              {"e1", {r.e1.start, r.e1.end}},
              {"e2", {r.e2.start, r.e2.end}},
              {"label", r.label},
              {"rendered", render_with_markers(r, markers)}};
}

TcrLoad parse_tcr_jsonl(std::string_view data, std::string_view source_name) {
  TcrLoad load;
  const auto lines = split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto row = static_cast<std::uint64_t>(i + 1);
    auto reject = [&](std::string why) { load.rejects.push_back({std::string(source_name), row, std::move(why)}); };
    RelationInstance inst;
    try {
      const auto j = json::parse(lines[i]);
      const auto& id = j.at("id");
      inst.id = id.is_string() ? id.get<std::string>() : id.dump();
      inst.text = j.at("text").get<std::string>();
      const auto e1 = j.at("e1").get<std::vector<std::int64_t>>();
      const auto e2 = j.at("e2").get<std::vector<std::int64_t>>();
      if (e1.size() != 2 || e2.size() != 2) {
        reject("event spans must be [start, end] pairs");
        continue;
      }
      if (std::min({e1[0], e1[1], e2[0], e2[1]}) < 0) {
        reject("negative event offset");
        continue;
      }
      inst.e1 = {static_cast<std::size_t>(e1[0]), static_cast<std::size_t>(e1[1])};
      inst.e2 = {static_cast<std::size_t>(e2[0]), static_cast<std::size_t>(e2[1])};
      const auto& label = j.at("label");
      inst.label = label.is_string() ? label.get<std::string>() : label.dump();
    } catch (const json::exception& e) {
      reject(fmt::format("malformed record: {}", e.what()));
      continue;
    }
    if (auto why = validate_spans(inst); !why.empty()) {
      reject(why);
      continue;
    }
    load.instances.push_back(std::move(inst));
  }
  return load;
}

TcrLoad load_tcr(const fs::path& path) { return parse_tcr_jsonl(read_file(path), path.filename().string()); }

}  // namespace corpusforge
