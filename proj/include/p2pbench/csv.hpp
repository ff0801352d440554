#pragma once

#include <string>
#include <vector>

#include "p2pbench/table.hpp"

namespace p2pbench {

// Declarative schema for CSV ingestion. JSON form:
//   {"columns": [{"name":..., "kind":..., "group":...}, ...],
//    "group_key_columns": [...], "time_column": "..."}
struct SchemaDescriptor {
  struct Field {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::string group;
  };
  std::vector<Field> fields;
  std::vector<std::string> group_key_columns;
  std::string time_column;

  static SchemaDescriptor from_table(const CaseTable& table);
  static SchemaDescriptor load(const std::string& path);
  void save(const std::string& path) const;
  std::string to_json_text() const;
  static SchemaDescriptor parse_json_text(const std::string& text);
};

// RFC-4180 CSV with a required header row. Empty cells become missing
// values; categorical dictionaries are built in first-appearance order.
// In strict mode a header column not present in the schema is an error.
CaseTable read_csv(const std::string& path, const SchemaDescriptor& schema,
                   bool strict = true);

// Missing cells are written as empty strings; numerics round-trip at 17
// significant digits.
void write_csv(const CaseTable& table, const std::string& path);

}  // namespace p2pbench
