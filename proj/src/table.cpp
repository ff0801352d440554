#include "p2pbench/table.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace p2pbench {

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Boolean: return "boolean";
    case ColumnKind::Datetime: return "datetime";
    case ColumnKind::Identifier: return "identifier";
  }
  return "numeric";
}

ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "numeric") return ColumnKind::Numeric;
  if (s == "categorical") return ColumnKind::Categorical;
  if (s == "boolean") return ColumnKind::Boolean;
  if (s == "datetime") return ColumnKind::Datetime;
  if (s == "identifier") return ColumnKind::Identifier;
  throw SchemaError("unknown column kind: " + s);
}

std::size_t Column::size() const {
  switch (kind) {
    case ColumnKind::Numeric: return nums.size();
    case ColumnKind::Categorical: return cats.size();
    case ColumnKind::Boolean: return bools.size();
    case ColumnKind::Datetime: return times.size();
    case ColumnKind::Identifier: return ids.size();
  }
  return 0;
}

void Column::reserve(std::size_t n) {
  switch (kind) {
    case ColumnKind::Numeric: nums.reserve(n); break;
    case ColumnKind::Categorical: cats.reserve(n); break;
    case ColumnKind::Boolean: bools.reserve(n); break;
    case ColumnKind::Datetime: times.reserve(n); break;
    case ColumnKind::Identifier: ids.reserve(n); break;
  }
  missing.reserve(n);
}

std::uint32_t Column::intern(const std::string& value) {
  for (std::size_t i = 0; i < dict.size(); ++i) {
    if (dict[i] == value) return static_cast<std::uint32_t>(i);
  }
  dict.push_back(value);
  return static_cast<std::uint32_t>(dict.size() - 1);
}

void Column::push_num(double v, bool miss) {
  nums.push_back(miss ? std::numeric_limits<double>::quiet_NaN() : v);
  missing.push_back(miss ? 1 : 0);
}

void Column::push_cat(const std::string& v) {
  cats.push_back(intern(v));
  missing.push_back(0);
}

void Column::push_cat_missing() {
  cats.push_back(0);
  if (dict.empty()) dict.push_back("");
  missing.push_back(1);
}

void Column::push_bool(bool v, bool miss) {
  bools.push_back(v ? 1 : 0);
  missing.push_back(miss ? 1 : 0);
}

void Column::push_time(std::int64_t v, bool miss) {
  times.push_back(miss ? 0 : v);
  missing.push_back(miss ? 1 : 0);
}

void Column::push_id(const std::string& v, bool miss) {
  ids.push_back(miss ? std::string() : v);
  missing.push_back(miss ? 1 : 0);
}

std::string Column::cell_text(std::size_t row) const {
  if (missing[row]) return "";
  switch (kind) {
    case ColumnKind::Numeric: return format_double(nums[row]);
    case ColumnKind::Categorical: return dict[cats[row]];
    case ColumnKind::Boolean: return bools[row] ? "1" : "0";
    case ColumnKind::Datetime: return std::to_string(times[row]);
    case ColumnKind::Identifier: return ids[row];
  }
  return "";
}

bool Column::cell_equal(std::size_t row, const Column& other,
                        std::size_t other_row) const {
  if (missing[row] != other.missing[other_row]) return false;
  if (missing[row]) return true;
  switch (kind) {
    case ColumnKind::Numeric: {
      const double a = nums[row], b = other.nums[other_row];
      if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
      return a == b;
    }
    case ColumnKind::Categorical:
      return dict[cats[row]] == other.dict[other.cats[other_row]];
    case ColumnKind::Boolean: return bools[row] == other.bools[other_row];
    case ColumnKind::Datetime: return times[row] == other.times[other_row];
    case ColumnKind::Identifier: return ids[row] == other.ids[other_row];
  }
  return false;
}

bool CaseTable::has_column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return true;
  }
  return false;
}

std::size_t CaseTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  throw SchemaError("no such column: " + name);
}

Column& CaseTable::column(const std::string& name) {
  return columns[column_index(name)];
}

const Column& CaseTable::column(const std::string& name) const {
  return columns[column_index(name)];
}

Column& CaseTable::add_column(std::string name, ColumnKind kind,
                              std::string group) {
  Column c;
  c.name = std::move(name);
  c.kind = kind;
  c.group = std::move(group);
  columns.push_back(std::move(c));
  return columns.back();
}

void CaseTable::validate() const {
  const std::size_t n = n_rows();
  for (const auto& c : columns) {
    if (c.size() != n) {
      throw ValidationError("column " + c.name + " has length " +
                            std::to_string(c.size()) + ", expected " +
                            std::to_string(n));
    }
    if (c.missing.size() != n) {
      throw ValidationError("column " + c.name + " missing-mask length mismatch");
    }
    if (c.kind == ColumnKind::Categorical) {
      for (std::uint32_t code : c.cats) {
        if (code >= c.dict.size()) {
          throw ValidationError("column " + c.name + " has out-of-dictionary code");
        }
      }
    }
  }
  for (const auto& g : group_key_columns) {
    if (!has_column(g)) throw SchemaError("declared group key column missing: " + g);
  }
  if (!time_column.empty() && !has_column(time_column)) {
    throw SchemaError("declared time column missing: " + time_column);
  }
  if (has_column("y_risk")) {
    const Column& y = column("y_risk");
    if (y.kind != ColumnKind::Boolean) {
      throw ValidationError("y_risk must be a boolean column");
    }
  }
}

std::vector<std::uint8_t> CaseTable::labels() const {
  const Column& y = column("y_risk");
  if (y.kind != ColumnKind::Boolean) {
    throw ValidationError("y_risk must be a boolean column");
  }
  return y.bools;
}

CaseTable CaseTable::take_rows(std::span<const std::size_t> rows) const {
  CaseTable out;
  out.group_key_columns = group_key_columns;
  out.time_column = time_column;
  out.columns.reserve(columns.size());
  for (const auto& c : columns) {
    Column nc;
    nc.name = c.name;
    nc.kind = c.kind;
    nc.group = c.group;
    nc.dict = c.dict;
    nc.reserve(rows.size());
    for (std::size_t r : rows) {
      nc.missing.push_back(c.missing[r]);
      switch (c.kind) {
        case ColumnKind::Numeric: nc.nums.push_back(c.nums[r]); break;
        case ColumnKind::Categorical: nc.cats.push_back(c.cats[r]); break;
        case ColumnKind::Boolean: nc.bools.push_back(c.bools[r]); break;
        case ColumnKind::Datetime: nc.times.push_back(c.times[r]); break;
        case ColumnKind::Identifier: nc.ids.push_back(c.ids[r]); break;
      }
    }
    out.columns.push_back(std::move(nc));
  }
  return out;
}

std::uint64_t CaseTable::content_hash() const {
  Hasher h;
  h.add_u64(n_rows());
  h.add_u64(columns.size());
  for (const auto& c : columns) {
    h.add(c.name);
    h.add(to_string(c.kind));
    h.add(c.group);
    for (std::size_t r = 0; r < c.size(); ++r) {
      if (c.missing[r]) {
        h.add("<missing>");
        continue;
      }
      h.add(c.cell_text(r));
    }
  }
  for (const auto& g : group_key_columns) h.add(g);
  h.add(time_column);
  return h.digest();
}

bool CaseTable::equals(const CaseTable& other) const {
  if (n_rows() != other.n_rows() || columns.size() != other.columns.size()) {
    return false;
  }
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const Column& a = columns[i];
    const Column& b = other.columns[i];
    if (a.name != b.name || a.kind != b.kind || a.group != b.group) return false;
    for (std::size_t r = 0; r < a.size(); ++r) {
      if (!a.cell_equal(r, b, r)) return false;
    }
  }
  return group_key_columns == other.group_key_columns &&
         time_column == other.time_column;
}

std::string CaseTable::group_key(std::size_t row) const {
  std::string key;
  for (const auto& name : group_key_columns) {
    const Column& c = column(name);
    if (!key.empty()) key.push_back('\x1f');
    key += c.cell_text(row);
  }
  return key;
}

std::int64_t CaseTable::time_value(std::size_t row) const {
  if (time_column.empty()) throw ValidationError("no time column declared");
  const Column& c = column(time_column);
  if (c.kind != ColumnKind::Datetime) {
    throw ValidationError("time column must be datetime: " + time_column);
  }
  if (c.missing[row]) {
    throw ValidationError("missing time value at row " + std::to_string(row));
  }
  return c.times[row];
}

std::vector<std::size_t> time_sort_order(const CaseTable& table) {
  const std::size_t n = table.n_rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::int64_t> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = table.time_value(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
  return order;
}

CaseTable sort_by_time(const CaseTable& table) {
  return table.take_rows(time_sort_order(table));
}

}  // namespace p2pbench
