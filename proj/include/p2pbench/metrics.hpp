#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p2pbench/common.hpp"

namespace p2pbench {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t n() const { return tp + fp + tn + fn; }
};

// Predict 1 iff p >= tau (ties positive).
ConfusionCounts confusion(const std::vector<std::uint8_t>& y,
                          const std::vector<double>& p, double tau);

// Zero denominator factors give 0 by convention.
double mcc(const ConfusionCounts& c);
double balanced_accuracy(const ConfusionCounts& c);

struct PrecRecF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
// For the positive (risk) class; 0/0 -> 0.
PrecRecF1 f1_prec_rec(const ConfusionCounts& c);

// Step-wise average precision over descending unique score thresholds;
// tied scores are grouped at one threshold. Throws on zero positives.
double auprc(const std::vector<std::uint8_t>& y, const std::vector<double>& scores);

// Auxiliary only; rank-based (Mann-Whitney) with tie correction.
double roc_auc(const std::vector<std::uint8_t>& y, const std::vector<double>& scores);

struct CostModel {
  double c_fp = 1.0;
  double c_fn = 10.0;

  void validate() const;
  // Exact closed form: c_fp / (c_fp + c_fn).
  double optimal_threshold() const;
  std::string to_json_text() const;
  static CostModel parse_json_text(const std::string& text);
};

// (c_fp * fp + c_fn * fn) / n, cost units per case.
double expected_cost(const ConfusionCounts& c, const CostModel& cost);

}  // namespace p2pbench
