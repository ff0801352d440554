#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "p2pbench/table.hpp"

namespace p2pbench {

// Matching tolerance is relative with an absolute floor: a delta violates
// when it exceeds max(epsilon * po_amount, epsilon_abs).
struct ComplianceConfig {
  double epsilon = 0.005;
  double epsilon_abs = 1.0;
  bool three_way = true;
  bool two_way = true;
  bool consignment = true;
  bool temporal = true;

  void validate() const;
  std::string to_json_text() const;
  static ComplianceConfig parse_json_text(const std::string& text);
  static ComplianceConfig load(const std::string& path);
};

enum class ComplianceRule { ThreeWay, TwoWay, Consignment, Temporal };

std::string to_string(ComplianceRule r);

struct CaseLabel {
  int y = 0;
  std::vector<ComplianceRule> violated;
};

// Evaluates the enabled rules on one row. Throws LabelingError when a
// field required by an applicable rule is missing.
CaseLabel label_case(const CaseTable& table, std::size_t row,
                     const ComplianceConfig& config);

struct LabelSummary {
  std::size_t n_rows = 0;
  std::size_t n_positive = 0;
  std::map<std::string, std::size_t> rule_counts;
  std::string to_json_text() const;
};

// Rewrites y_risk from the compliance rules; pure in (table, config) and
// idempotent. risk_type/scenario_id are left untouched.
std::pair<CaseTable, LabelSummary> label_table(const CaseTable& table,
                                               const ComplianceConfig& config);

}  // namespace p2pbench
