#include "p2pbench/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace p2pbench {

namespace {

using json = nlohmann::ordered_json;

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos;
}

void write_cell(std::ostream& os, const std::string& s) {
  if (!needs_quoting(s)) {
    os << s;
    return;
  }
  os << '"';
  for (char c : s) {
    if (c == '"') os << '"';
    os << c;
  }
  os << '"';
}

// Splits one logical CSV record starting at `pos` in `text`. Handles
// quoted fields with embedded separators and newlines. Returns false at
// end of input.
bool next_record(const std::string& text, std::size_t& pos,
                 std::vector<std::string>& cells, std::size_t& line,
                 std::size_t& record_line) {
  cells.clear();
  if (pos >= text.size()) return false;
  record_line = line;
  std::string cell;
  bool in_quotes = false;
  bool saw_any = false;
  while (pos < text.size()) {
    const char c = text[pos];
    saw_any = true;
    if (in_quotes) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          cell.push_back('"');
          pos += 2;
        } else {
          in_quotes = false;
          ++pos;
        }
      } else {
        if (c == '\n') ++line;
        cell.push_back(c);
        ++pos;
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      ++pos;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
      ++pos;
    } else if (c == '\r') {
      ++pos;  // swallow; newline handling below
    } else if (c == '\n') {
      ++pos;
      ++line;
      cells.push_back(std::move(cell));
      return true;
    } else {
      cell.push_back(c);
      ++pos;
    }
  }
  if (in_quotes) {
    throw ParseError("unterminated quoted field at line " +
                     std::to_string(record_line));
  }
  if (saw_any) {
    cells.push_back(std::move(cell));
    return true;
  }
  return false;
}

double parse_numeric(const std::string& s, const std::string& col,
                     std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError("unparseable numeric '" + s + "' in column " + col +
                     " at line " + std::to_string(line));
  }
  return v;
}

std::int64_t parse_datetime(const std::string& s, const std::string& col,
                            std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError("unparseable datetime '" + s + "' in column " + col +
                     " at line " + std::to_string(line));
  }
  return static_cast<std::int64_t>(v);
}

bool parse_boolean(const std::string& s, const std::string& col,
                   std::size_t line) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ParseError("unparseable boolean '" + s + "' in column " + col +
                   " at line " + std::to_string(line));
}

}  // namespace

SchemaDescriptor SchemaDescriptor::from_table(const CaseTable& table) {
  SchemaDescriptor d;
  for (const auto& c : table.columns) {
    d.fields.push_back({c.name, c.kind, c.group});
  }
  d.group_key_columns = table.group_key_columns;
  d.time_column = table.time_column;
  return d;
}

std::string SchemaDescriptor::to_json_text() const {
  json j;
  j["columns"] = json::array();
  for (const auto& f : fields) {
    j["columns"].push_back(
        {{"name", f.name}, {"kind", to_string(f.kind)}, {"group", f.group}});
  }
  j["group_key_columns"] = group_key_columns;
  j["time_column"] = time_column;
  return j.dump(2) + "\n";
}

SchemaDescriptor SchemaDescriptor::parse_json_text(const std::string& text) {
  json j = json::parse(text);
  SchemaDescriptor d;
  for (const auto& f : j.at("columns")) {
    d.fields.push_back({f.at("name").get<std::string>(),
                        column_kind_from_string(f.at("kind").get<std::string>()),
                        f.value("group", std::string())});
  }
  if (j.contains("group_key_columns")) {
    d.group_key_columns = j["group_key_columns"].get<std::vector<std::string>>();
  }
  d.time_column = j.value("time_column", std::string());
  return d;
}

SchemaDescriptor SchemaDescriptor::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str());
}

void SchemaDescriptor::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write schema file: " + path);
  out << to_json_text();
}

CaseTable read_csv(const std::string& path, const SchemaDescriptor& schema,
                   bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open CSV file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  std::size_t pos = 0;
  std::size_t line = 1;
  std::size_t record_line = 1;
  std::vector<std::string> cells;
  if (!next_record(text, pos, cells, line, record_line)) {
    throw ParseError("empty CSV file: " + path);
  }

  // Header must match the schema by name; order follows the schema.
  std::unordered_map<std::string, std::size_t> field_of;
  for (std::size_t i = 0; i < schema.fields.size(); ++i) {
    field_of[schema.fields[i].name] = i;
  }
  std::vector<std::size_t> col_to_field(cells.size());
  std::vector<bool> seen(schema.fields.size(), false);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto it = field_of.find(cells[i]);
    if (it == field_of.end()) {
      if (strict) throw SchemaError("unknown column in header: " + cells[i]);
      col_to_field[i] = std::numeric_limits<std::size_t>::max();
      continue;
    }
    col_to_field[i] = it->second;
    seen[it->second] = true;
  }
  for (std::size_t i = 0; i < schema.fields.size(); ++i) {
    if (!seen[i]) {
      throw SchemaError("header is missing schema column: " +
                        schema.fields[i].name);
    }
  }
  const std::size_t header_width = cells.size();

  CaseTable table;
  table.group_key_columns = schema.group_key_columns;
  table.time_column = schema.time_column;
  for (const auto& f : schema.fields) {
    table.add_column(f.name, f.kind, f.group);
  }
  // Hash-backed dictionaries; Column::dict stays first-appearance ordered.
  std::vector<std::unordered_map<std::string, std::uint32_t>> dict_index(
      table.columns.size());

  while (next_record(text, pos, cells, line, record_line)) {
    if (cells.size() == 1 && cells[0].empty()) continue;  // trailing newline
    if (cells.size() != header_width) {
      throw ParseError("row with " + std::to_string(cells.size()) +
                       " cells under " + std::to_string(header_width) +
                       "-column header at line " + std::to_string(record_line));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (col_to_field[i] == std::numeric_limits<std::size_t>::max()) continue;
      Column& col = table.columns[col_to_field[i]];
      const std::string& cell = cells[i];
      if (cell.empty()) {
        switch (col.kind) {
          case ColumnKind::Numeric: col.push_num(0.0, true); break;
          case ColumnKind::Categorical: col.push_cat_missing(); break;
          case ColumnKind::Boolean: col.push_bool(false, true); break;
          case ColumnKind::Datetime: col.push_time(0, true); break;
          case ColumnKind::Identifier: col.push_id("", true); break;
        }
        continue;
      }
      switch (col.kind) {
        case ColumnKind::Numeric:
          col.push_num(parse_numeric(cell, col.name, record_line));
          break;
        case ColumnKind::Categorical: {
          auto& index = dict_index[col_to_field[i]];
          auto it = index.find(cell);
          std::uint32_t code;
          if (it == index.end()) {
            code = static_cast<std::uint32_t>(col.dict.size());
            col.dict.push_back(cell);
            index.emplace(cell, code);
          } else {
            code = it->second;
          }
          col.cats.push_back(code);
          col.missing.push_back(0);
          break;
        }
        case ColumnKind::Boolean:
          col.push_bool(parse_boolean(cell, col.name, record_line));
          break;
        case ColumnKind::Datetime:
          col.push_time(parse_datetime(cell, col.name, record_line));
          break;
        case ColumnKind::Identifier:
          col.push_id(cell);
          break;
      }
    }
  }
  table.validate();
  return table;
}

void write_csv(const CaseTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write CSV file: " + path);
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out << ',';
    write_cell(out, table.columns[i].name);
  }
  out << '\n';
  const std::size_t n = table.n_rows();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      if (i) out << ',';
      write_cell(out, table.columns[i].cell_text(r));
    }
    out << '\n';
  }
  if (!out) throw Error("I/O error writing CSV file: " + path);
}

}  // namespace p2pbench
