#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p2pbench/common.hpp"

namespace p2pbench {

struct PlattParams {
  double a = 0.0;
  double b = 0.0;
};

// Fits sigma(a*s + b) to held-out scores by Newton iterations on the
// cross-entropy with the standard smoothed targets t+ = (N+ + 1)/(N+ + 2)
// and t- = 1/(N- + 2). The calibration scores must come from rows the
// model never trained on; callers supply out-of-fold predictions.
PlattParams platt_fit(const std::vector<double>& scores,
                      const std::vector<std::uint8_t>& y);

std::vector<double> platt_apply(const PlattParams& params,
                                const std::vector<double>& scores);

struct ReliabilityBin {
  double mean_predicted = 0.0;
  double fraction_positive = 0.0;
  std::size_t count = 0;
};

struct CalibrationReport {
  bool has_platt = false;
  PlattParams platt;
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;
  std::string to_json_text() const;
};

// Equal-width bins on [0, 1]; ECE is the count-weighted |gap| sum. Bins
// with zero count contribute nothing.
CalibrationReport reliability(const std::vector<std::uint8_t>& y,
                              const std::vector<double>& p,
                              std::size_t n_bins = 10);

}  // namespace p2pbench
