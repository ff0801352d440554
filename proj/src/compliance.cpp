#include "p2pbench/compliance.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace p2pbench {

namespace {

using json = nlohmann::ordered_json;

double require_num(const CaseTable& t, std::size_t col, std::size_t row) {
  const Column& c = t.columns[col];
  if (c.missing[row]) {
    throw LabelingError("required field missing: " + c.name + " at row " +
                            std::to_string(row),
                        c.name, row);
  }
  return c.nums[row];
}

std::int64_t require_time(const CaseTable& t, std::size_t col, std::size_t row) {
  const Column& c = t.columns[col];
  if (c.missing[row]) {
    throw LabelingError("required field missing: " + c.name + " at row " +
                            std::to_string(row),
                        c.name, row);
  }
  return c.times[row];
}

}  // namespace

void ComplianceConfig::validate() const {
  if (epsilon < 0.0) throw ValidationError("epsilon must be >= 0");
  if (epsilon_abs < 0.0) throw ValidationError("epsilon_abs must be >= 0");
}

std::string to_string(ComplianceRule r) {
  switch (r) {
    case ComplianceRule::ThreeWay: return "three_way";
    case ComplianceRule::TwoWay: return "two_way";
    case ComplianceRule::Consignment: return "consignment";
    case ComplianceRule::Temporal: return "temporal";
  }
  return "three_way";
}

std::string ComplianceConfig::to_json_text() const {
  json j;
  j["epsilon"] = epsilon;
  j["epsilon_abs"] = epsilon_abs;
  j["three_way"] = three_way;
  j["two_way"] = two_way;
  j["consignment"] = consignment;
  j["temporal"] = temporal;
  return j.dump(2) + "\n";
}

ComplianceConfig ComplianceConfig::parse_json_text(const std::string& text) {
  json j = json::parse(text);
  ComplianceConfig c;
  c.epsilon = j.value("epsilon", c.epsilon);
  c.epsilon_abs = j.value("epsilon_abs", c.epsilon_abs);
  c.three_way = j.value("three_way", c.three_way);
  c.two_way = j.value("two_way", c.two_way);
  c.consignment = j.value("consignment", c.consignment);
  c.temporal = j.value("temporal", c.temporal);
  c.validate();
  return c;
}

ComplianceConfig ComplianceConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open compliance config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str());
}

CaseLabel label_case(const CaseTable& table, std::size_t row,
                     const ComplianceConfig& config) {
  config.validate();
  CaseLabel out;
  const std::size_t flow_col = table.column_index("flow_type");
  const std::size_t req_gr_col = table.column_index("requires_gr");
  const Column& flow = table.columns[flow_col];
  const Column& req_gr_c = table.columns[req_gr_col];
  if (flow.missing[row]) {
    throw LabelingError("required field missing: flow_type at row " +
                            std::to_string(row),
                        "flow_type", row);
  }
  if (req_gr_c.missing[row]) {
    throw LabelingError("required field missing: requires_gr at row " +
                            std::to_string(row),
                        "requires_gr", row);
  }
  const std::string& flow_name = flow.category(row);
  const bool requires_gr = req_gr_c.bools[row] != 0;
  const bool is_consignment = flow_name == "consignment";
  const bool is_two_way = flow_name == "two_way";

  const std::size_t po_col = table.column_index("po_amount");
  const std::size_t gr_col = table.column_index("gr_amount");
  const std::size_t inv_col = table.column_index("invoice_amount");

  // Matching rules are scoped by flow type; consignment is never matched
  // on amounts (an unexpected invoice is its own rule).
  if (config.three_way && requires_gr && !is_consignment) {
    const double po = require_num(table, po_col, row);
    const double gr = require_num(table, gr_col, row);
    const double inv = require_num(table, inv_col, row);
    const double tol = std::max(config.epsilon * po, config.epsilon_abs);
    if (std::abs(po - gr) > tol || std::abs(gr - inv) > tol) {
      out.violated.push_back(ComplianceRule::ThreeWay);
    }
  }
  if (config.two_way && is_two_way) {
    const double po = require_num(table, po_col, row);
    const double inv = require_num(table, inv_col, row);
    const double tol = std::max(config.epsilon * po, config.epsilon_abs);
    if (std::abs(po - inv) > tol) {
      out.violated.push_back(ComplianceRule::TwoWay);
    }
  }
  if (config.consignment && is_consignment) {
    const double inv = require_num(table, inv_col, row);
    if (inv > 0.0) {
      out.violated.push_back(ComplianceRule::Consignment);
    }
  }
  if (config.temporal && requires_gr) {
    const std::int64_t pay =
        require_time(table, table.column_index("payment_date"), row);
    const std::int64_t gr_date =
        require_time(table, table.column_index("gr_date"), row);
    if (pay < gr_date) {
      out.violated.push_back(ComplianceRule::Temporal);
    }
  }
  out.y = out.violated.empty() ? 0 : 1;
  return out;
}

std::string LabelSummary::to_json_text() const {
  json j;
  j["n_rows"] = n_rows;
  j["n_positive"] = n_positive;
  j["rule_counts"] = rule_counts;
  return j.dump(2) + "\n";
}

std::pair<CaseTable, LabelSummary> label_table(const CaseTable& table,
                                               const ComplianceConfig& config) {
  CaseTable out = table;
  LabelSummary summary;
  summary.n_rows = table.n_rows();
  for (ComplianceRule r :
       {ComplianceRule::ThreeWay, ComplianceRule::TwoWay,
        ComplianceRule::Consignment, ComplianceRule::Temporal}) {
    summary.rule_counts[to_string(r)] = 0;
  }
  if (!out.has_column("y_risk")) {
    out.add_column("y_risk", ColumnKind::Boolean, "labels");
    Column& y = out.column("y_risk");
    y.bools.assign(out.columns.front().size(), 0);
    y.missing.assign(out.columns.front().size(), 0);
  }
  Column& y = out.column("y_risk");
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    const CaseLabel lbl = label_case(table, r, config);
    y.bools[r] = static_cast<std::uint8_t>(lbl.y);
    y.missing[r] = 0;
    for (ComplianceRule rule : lbl.violated) {
      ++summary.rule_counts[to_string(rule)];
    }
    summary.n_positive += static_cast<std::size_t>(lbl.y);
  }
  return {std::move(out), summary};
}

}  // namespace p2pbench
