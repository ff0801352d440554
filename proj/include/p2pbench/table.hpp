#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "p2pbench/common.hpp"

namespace p2pbench {

enum class ColumnKind { Numeric, Categorical, Boolean, Datetime, Identifier };

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

// One column of a CaseTable. Exactly one value vector is populated,
// selected by `kind`; `missing` is the authoritative missingness mask
// (numeric cells additionally carry NaN sentinels, but NaN can also arise
// from arithmetic, so the mask decides).
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::string group;  // canonical-schema field group

  std::vector<double> nums;
  std::vector<std::uint32_t> cats;   // dense codes into `dict`
  std::vector<std::string> dict;     // first-appearance order
  std::vector<std::uint8_t> bools;
  std::vector<std::int64_t> times;   // epoch seconds
  std::vector<std::string> ids;
  std::vector<std::uint8_t> missing;

  std::size_t size() const;
  void reserve(std::size_t n);

  // Dictionary intern preserving first-appearance order.
  std::uint32_t intern(const std::string& value);
  const std::string& category(std::size_t row) const { return dict[cats[row]]; }

  void push_num(double v, bool miss = false);
  void push_cat(const std::string& v);
  void push_cat_missing();
  void push_bool(bool v, bool miss = false);
  void push_time(std::int64_t v, bool miss = false);
  void push_id(const std::string& v, bool miss = false);

  // Text form used by the CSV writer; missing cells are "".
  std::string cell_text(std::size_t row) const;

  bool cell_equal(std::size_t row, const Column& other, std::size_t other_row) const;
};

// Columnar dataset in the canonical schema. Immutable by convention once
// built; transformations return new tables.
class CaseTable {
 public:
  std::vector<Column> columns;
  std::vector<std::string> group_key_columns;
  std::string time_column;

  std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t n_cols() const { return columns.size(); }

  bool has_column(const std::string& name) const;
  std::size_t column_index(const std::string& name) const;  // throws SchemaError
  Column& column(const std::string& name);
  const Column& column(const std::string& name) const;

  Column& add_column(std::string name, ColumnKind kind, std::string group);

  // Equal column lengths, declared group/time columns present, label domain.
  void validate() const;

  bool has_labels() const { return has_column("y_risk"); }
  std::vector<std::uint8_t> labels() const;  // y_risk as 0/1, throws if absent

  CaseTable take_rows(std::span<const std::size_t> rows) const;

  std::uint64_t content_hash() const;
  bool equals(const CaseTable& other) const;

  // Composite group key value for a row (group_key_columns joined).
  std::string group_key(std::size_t row) const;
  std::int64_t time_value(std::size_t row) const;  // throws if missing/undeclared
};

// Rows in nondecreasing time order, ties stable on original index.
CaseTable sort_by_time(const CaseTable& table);

// Permutation the stable time sort would apply (exposed for tests).
std::vector<std::size_t> time_sort_order(const CaseTable& table);

}  // namespace p2pbench
