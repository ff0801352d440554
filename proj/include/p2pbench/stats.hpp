#pragma once

#include <string>
#include <vector>

#include "p2pbench/common.hpp"

namespace p2pbench {

struct WilcoxonResult {
  double w_plus = 0.0;  // sum of positive-difference midranks
  double p_one_sided = 1.0;
  double p_two_sided = 1.0;
  std::size_t n_used = 0;
  std::size_t n_zeros = 0;  // excluded before ranking
};

// Exact signed-rank test for small n (<= 25). Zero differences are
// dropped before ranking (classic exclusion, count reported); absolute
// differences get midranks under ties; the p-value is the exact tail of
// the 2^n sign-assignment distribution. One-sided tests W+ >= observed.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs);

// Holm-Bonferroni step-down: sort ascending, adj_(i) is the running max
// of min(1, (m-j+1) * p_(j)); returned in the original order.
std::vector<double> holm_correct(const std::vector<double>& p_values,
                                 std::size_t m);

struct EffectSize {
  double delta = 0.0;
  std::string magnitude;  // negligible | small | medium | large
};

// Brute-force dominance count over all pairs; magnitude labels use the
// |0.147 / 0.33 / 0.474| thresholds.
EffectSize cliffs_delta(const std::vector<double>& a,
                        const std::vector<double>& b);

std::string cliffs_magnitude(double delta);

}  // namespace p2pbench
