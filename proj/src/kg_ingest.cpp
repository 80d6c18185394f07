#include "corpusforge/kg_ingest.hpp"

#include <algorithm>
#include <set>
#include <variant>

#include <fmt/format.h>

#include "builtin_data.hpp"
#include "corpusforge/io.hpp"
#include "corpusforge/parallel.hpp"
#include "corpusforge/text.hpp"

namespace corpusforge {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::event: return "event";
    case Category::physical: return "physical";
    case Category::social: return "social";
  }
  return "event";
}

std::optional<Category> parse_category(std::string_view s) {
  for (auto c : kCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::string RelationEntry::pattern() const {
  return fmt::format("{{head}}{}{} {{tail}}", new_clause ? ". " : " ", template_text);
}

namespace {

RelationEntry parse_relation_entry(const json& j, std::string_view where) {
  if (!j.is_object()) throw InputFormatError(fmt::format("{}: entry is not an object", where));
  for (const char* key : {"name", "category", "template"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw InputFormatError(fmt::format("{}: missing string field '{}'", where, key));
    }
  }
  RelationEntry e;
  e.name = j["name"].get<std::string>();
  auto cat = parse_category(j["category"].get<std::string>());
  if (!cat) throw InputFormatError(fmt::format("{}: relation '{}' has unknown category", where, e.name));
  e.category = *cat;
  e.template_text = j["template"].get<std::string>();
  e.new_clause = j.value("new_clause", false);
  if (e.name.empty() || trim(e.template_text).empty()) {
    throw InputFormatError(fmt::format("{}: relation name and template must be non-empty", where));
  }
  if (e.template_text.find_first_of("{}") != std::string::npos) {
    throw InputFormatError(fmt::format("{}: template for '{}' must not contain slot braces", where, e.name));
  }
  return e;
}

}  // namespace

RelationTable RelationTable::from_json(const json& doc) {
  if (!doc.is_object() || doc.value("schema", "") != "corpusforge.relation-table") {
    throw InputFormatError("relation table: schema must be 'corpusforge.relation-table'");
  }
  if (!doc.contains("version") || !doc["version"].is_string()) {
    throw InputFormatError("relation table: missing version");
  }
  if (!doc.contains("relations") || !doc["relations"].is_array()) {
    throw InputFormatError("relation table: missing relations array");
  }
  RelationTable table;
  table.version_ = doc["version"].get<std::string>();
  std::set<std::string> names;
  std::set<Category> seen_categories;
  for (const auto& j : doc["relations"]) {
    auto e = parse_relation_entry(j, "relation table");
    if (!names.insert(e.name).second) {
      throw InputFormatError(fmt::format("relation table: duplicate relation '{}'", e.name));
    }
    seen_categories.insert(e.category);
    table.entries_.push_back(std::move(e));
  }
  if (table.entries_.size() != kRelationCount) {
    throw InputFormatError(
        fmt::format("relation table: expected {} relations, found {}", kRelationCount, table.entries_.size()));
  }
  if (seen_categories.size() != kCategories.size()) {
    throw InputFormatError("relation table: every category must have at least one relation");
  }
  if (doc.contains("extra_templates")) {
    for (const auto& j : doc["extra_templates"]) {
      auto e = parse_relation_entry(j, "relation table extra_templates");
      if (!names.insert(e.name).second) {
        throw InputFormatError(fmt::format("relation table: duplicate relation '{}'", e.name));
      }
      table.extras_.push_back(std::move(e));
    }
  }
  return table;
}

const RelationTable& RelationTable::builtin() {
  static const RelationTable table = from_json(json::parse(builtin::kRelationTable));
  return table;
}

RelationTable RelationTable::load(const fs::path& path) {
  const auto text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputFormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(doc);
}

const RelationEntry* RelationTable::find(std::string_view relation) const {
  for (const auto& e : entries_) {
    if (e.name == relation) return &e;
  }
  return nullptr;
}

const RelationEntry* RelationTable::find_template(std::string_view relation) const {
  if (const auto* e = find(relation)) return e;
  for (const auto& e : extras_) {
    if (e.name == relation) return &e;
  }
  return nullptr;
}

json to_json(const Triple& t) {
  return json{{"id", t.id},
              {"source_file", t.source_file},
              {"row", t.row},
              {"head", t.head},
              {"relation", t.relation},
              {"tail", t.tail},
              {"category", to_string(t.category)},
              {"split", to_string(t.split)}};
}

namespace {

using RowResult = std::variant<std::monostate, Triple, RejectEntry>;

RowResult make_triple(std::string_view head, std::string_view relation, std::string_view tail,
                      std::string_view source_file, std::uint64_t row, std::uint64_t id, Split split,
                      const RelationTable& table) {
  const auto reject = [&](std::string reason) {
    return RejectEntry{std::string(source_file), row, std::move(reason)};
  };
  const auto* entry = table.find(trim(relation));
  if (!entry) return reject(fmt::format("unknown relation '{}'", trim(relation)));
  head = trim(head);
  tail = trim(tail);
  if (head.empty()) return reject("empty head");
  if (tail.empty()) return reject("empty tail");
  Triple t;
  t.id = id;
  t.source_file = std::string(source_file);
  t.row = row;
  t.head = std::string(head);
  t.relation = entry->name;
  t.tail = std::string(tail);
  t.category = entry->category;
  t.split = split;
  return t;
}

void collect(AtomicLoad& load, std::vector<RowResult>&& results) {
  for (auto& r : results) {
    if (auto* t = std::get_if<Triple>(&r)) {
      load.triples.push_back(std::move(*t));
      ++load.input_rows;
    } else if (auto* rej = std::get_if<RejectEntry>(&r)) {
      load.rejects.push_back(std::move(*rej));
      ++load.input_rows;
    }
  }
}

std::string source_name(const fs::path& path) { return path.filename().string(); }

}  // namespace

AtomicLoad parse_atomic_tsv(std::string_view data, std::string_view source_file, Split split,
                            const RelationTable& table, std::uint64_t first_id, unsigned workers) {
  const auto lines = split_lines(data);
  // Ids count non-blank rows so they match the row-count invariant.
  std::vector<std::uint64_t> ordinals(lines.size());
  std::uint64_t next_id = first_id;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ordinals[i] = trim(lines[i]).empty() ? 0 : next_id++;
  }
  auto results = parallel_map(lines.size(), workers, [&](std::size_t i) -> RowResult {
    const auto line = lines[i];
    if (trim(line).empty()) return std::monostate{};
    const auto row = static_cast<std::uint64_t>(i + 1);
    const auto cols = corpusforge::split(line, '\t');
    if (cols.size() != 3) {
      return RejectEntry{std::string(source_file), row, fmt::format("expected 3 columns, found {}", cols.size())};
    }
    return make_triple(cols[0], cols[1], cols[2], source_file, row, ordinals[i], split, table);
  });
  AtomicLoad load;
  collect(load, std::move(results));
  return load;
}

AtomicLoad parse_atomic_jsonl(std::string_view data, std::string_view source_file, Split split,
                              const RelationTable& table, std::uint64_t first_id) {
  AtomicLoad load;
  std::uint64_t next_id = first_id;
  const auto lines = split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto row = static_cast<std::uint64_t>(i + 1);
    const auto id = next_id++;
    ++load.input_rows;
    auto reject = [&](std::string reason) {
      load.rejects.push_back({std::string(source_file), row, std::move(reason)});
    };
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      reject("invalid json");
      continue;
    }
    if (!j.is_object() || !j.contains("head") || !j.contains("relation") || !j.contains("tail") ||
        !j["head"].is_string() || !j["relation"].is_string() || !j["tail"].is_string()) {
      reject("missing head/relation/tail");
      continue;
    }
    if (j.contains("split") && (!j["split"].is_string() || j["split"].get<std::string>() != to_string(split))) {
      reject("split does not match file split");
      continue;
    }
    auto r = make_triple(j["head"].get<std::string>(), j["relation"].get<std::string>(),
                         j["tail"].get<std::string>(), source_file, row, id, split, table);
    if (auto* t = std::get_if<Triple>(&r)) {
      if (j.contains("category") && j["category"] != to_string(t->category)) {
        reject("category does not match relation table");
        continue;
      }
      load.triples.push_back(std::move(*t));
    } else {
      load.rejects.push_back(std::get<RejectEntry>(std::move(r)));
    }
  }
  return load;
}

AtomicLoad load_atomic(const fs::path& path, std::span<const Split> splits, const RelationTable& table,
                       unsigned workers) {
  std::vector<std::pair<fs::path, Split>> files;
  if (fs::is_directory(path)) {
    for (auto split : splits) {
      const auto tsv = path / fmt::format("{}.tsv", to_string(split));
      const auto jsonl = path / fmt::format("{}.jsonl", to_string(split));
      if (fs::exists(tsv)) {
        files.emplace_back(tsv, split);
      } else if (fs::exists(jsonl)) {
        files.emplace_back(jsonl, split);
      } else {
        throw IoError(fmt::format("missing ATOMIC split file '{}'", tsv.string()));
      }
    }
  } else if (fs::exists(path)) {
    const auto stem = path.stem().string();
    Split split = splits.empty() ? Split::train : splits.front();
    if (stem == "train" || stem == "dev") split = parse_split(stem);
    files.emplace_back(path, split);
  } else {
    throw IoError(fmt::format("ATOMIC input '{}' does not exist", path.string()));
  }

  AtomicLoad total;
  std::uint64_t next_id = 0;
  for (const auto& [file, split] : files) {
    const auto data = read_file(file);
    auto part = file.extension() == ".jsonl"
                    ? parse_atomic_jsonl(data, source_name(file), split, table, next_id)
                    : parse_atomic_tsv(data, source_name(file), split, table, next_id, workers);
    next_id += part.input_rows;
    total.input_rows += part.input_rows;
    std::move(part.triples.begin(), part.triples.end(), std::back_inserter(total.triples));
    std::move(part.rejects.begin(), part.rejects.end(), std::back_inserter(total.rejects));
  }
  return total;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Specificity s) { return s == Specificity::specific ? "specific" : "general"; }

std::optional<Specificity> parse_specificity(std::string_view s) {
  if (s == "specific") return Specificity::specific;
  if (s == "general") return Specificity::general;
  return std::nullopt;
}

json to_json(const GlucoseRecord& r) {
  return json{{"id", r.id},
              {"source_file", r.source_file},
              {"row", r.row},
              {"dimension", r.dimension},
              {"specificity", to_string(r.specificity)},
              {"antecedent", r.antecedent},
              {"connective", r.connective},
              {"consequent", r.consequent}};
}

std::optional<StatementParts> split_statement(std::string_view statement, std::string* reason) {
  auto fail = [&](std::string why) -> std::optional<StatementParts> {
    if (reason) *reason = std::move(why);
    return std::nullopt;
  };
  std::size_t found_at = std::string_view::npos;
  std::string_view found;
  std::size_t hits = 0;
  for (auto marker : kGlucoseConnectives) {
    for (auto pos = statement.find(marker); pos != std::string_view::npos; pos = statement.find(marker, pos + 1)) {
      ++hits;
      found_at = pos;
      found = marker;
    }
  }
  if (hits == 0) return fail("no causal connective");
  if (hits > 1) return fail("multiple causal connectives");
  StatementParts parts;
  parts.antecedent = std::string(trim(statement.substr(0, found_at)));
  parts.connective = std::string(found);
  parts.consequent = std::string(trim(statement.substr(found_at + found.size())));
  if (parts.antecedent.empty() || parts.consequent.empty()) return fail("empty causal span");
  return parts;
}

namespace {

bool is_empty_cell(std::string_view cell) {
  cell = trim(cell);
  return cell.empty() || cell == "escaped";
}

std::uint64_t glucose_id(std::uint64_t row_index, int dimension, Specificity s) {
  return row_index * 20 + static_cast<std::uint64_t>(dimension - 1) * 2 + (s == Specificity::general ? 1 : 0);
}

}  // namespace

GlucoseLoad parse_glucose_csv(std::string_view data, std::string_view source_file) {
  CsvReader reader(data);
  CsvRecord header;
  if (!reader.next(header)) return {};

  struct Column {
    int dimension;
    Specificity specificity;
    std::size_t index;
  };
  std::vector<Column> columns;
  for (int d = 1; d <= 10; ++d) {
    for (auto s : {Specificity::specific, Specificity::general}) {
      const auto name = fmt::format("{}_{}NL", d, to_string(s));
      for (std::size_t i = 0; i < header.fields.size(); ++i) {
        if (trim(header.fields[i]) == name) columns.push_back({d, s, i});
      }
    }
  }
  if (columns.empty()) {
    throw InputFormatError(fmt::format("{}: no '<d>_specificNL'/'<d>_generalNL' columns in header", source_file));
  }

  GlucoseLoad load;
  CsvRecord rec;
  std::uint64_t row_index = 0;
  while (reader.next(rec)) {
    if (rec.fields.size() == 1 && trim(rec.fields[0]).empty()) continue;
    for (const auto& col : columns) {
      if (col.index >= rec.fields.size() || is_empty_cell(rec.fields[col.index])) {
        ++load.empty_cells;
        continue;
      }
      ++load.input_statements;
      std::string reason;
      auto parts = split_statement(rec.fields[col.index], &reason);
      if (!parts) {
        load.rejects.push_back({std::string(source_file), rec.line,
                                fmt::format("{} (dimension {} {})", reason, col.dimension, to_string(col.specificity))});
        continue;
      }
      GlucoseRecord r;
      r.id = glucose_id(row_index, col.dimension, col.specificity);
      r.source_file = std::string(source_file);
      r.row = rec.line;
      r.dimension = col.dimension;
      r.specificity = col.specificity;
      r.antecedent = std::move(parts->antecedent);
      r.connective = std::move(parts->connective);
      r.consequent = std::move(parts->consequent);
      load.records.push_back(std::move(r));
    }
    ++row_index;
  }
  return load;
}

GlucoseLoad parse_glucose_jsonl(std::string_view data, std::string_view source_file) {
  GlucoseLoad load;
  const auto lines = split_lines(data);
  std::uint64_t ordinal = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto row = static_cast<std::uint64_t>(i + 1);
    ++load.input_statements;
    auto reject = [&](std::string reason) {
      load.rejects.push_back({std::string(source_file), row, std::move(reason)});
    };
    const auto id = ordinal++;
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      reject("invalid json");
      continue;
    }
    if (!j.is_object()) {
      reject("record is not an object");
      continue;
    }
    int dim = 0;
    std::optional<Specificity> spec;
    std::string antecedent, connective, consequent;
    try {
      dim = j.value("dimension", 0);
      spec = parse_specificity(j.value("specificity", std::string{}));
      antecedent = std::string(trim(j.value("antecedent", std::string{})));
      connective = j.value("connective", std::string{});
      consequent = std::string(trim(j.value("consequent", std::string{})));
    } catch (const json::exception&) {
      reject("field has wrong type");
      continue;
    }
    if (dim < 1 || dim > 10) {
      reject("dimension outside 1..10");
      continue;
    }
    if (!spec) {
      reject("unknown specificity");
      continue;
    }
    if (std::find(kGlucoseConnectives.begin(), kGlucoseConnectives.end(), connective) == kGlucoseConnectives.end()) {
      reject(fmt::format("unknown connective '{}'", connective));
      continue;
    }
    if (antecedent.empty() || consequent.empty()) {
      reject("empty causal span");
      continue;
    }
    load.records.push_back(GlucoseRecord{id, std::string(source_file), row, dim, *spec, antecedent, connective,
                                         consequent});
  }
  return load;
}

GlucoseLoad load_glucose(const fs::path& path) {
  if (!fs::exists(path)) throw IoError(fmt::format("GLUCOSE input '{}' does not exist", path.string()));
  const auto data = read_file(path);
  if (path.extension() == ".jsonl") return parse_glucose_jsonl(data, source_name(path));
  return parse_glucose_csv(data, source_name(path));
}

}  // namespace corpusforge
