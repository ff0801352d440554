#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "p2pbench/common.hpp"

namespace p2pbench {

struct LogisticFit {
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

struct LogisticOptions {
  double l1 = 0.0;  // 1/C mass on |w|, mean-scaled internally
  double l2 = 0.0;  // 1/C mass on w^2/2
  std::size_t max_iter = 10000;
  double tol = 1e-6;  // on the mean-scaled gradient max-norm
};

// Weighted cross-entropy, accelerated proximal gradient descent (FISTA
// with restart). The bias is never penalized. sample_weights may be empty
// for unit weights.
LogisticFit fit_logistic(const Matrix& x, const std::vector<std::uint8_t>& y,
                         const std::vector<double>& sample_weights,
                         const LogisticOptions& options);

// Mean-scaled analytic gradient of the weighted cross-entropy plus the L2
// term at (weights, bias); index d holds the bias component. Exposed so
// tests can check it against finite differences.
std::vector<double> logistic_gradient(const Matrix& x,
                                      const std::vector<std::uint8_t>& y,
                                      const std::vector<double>& sample_weights,
                                      const std::vector<double>& weights,
                                      double bias, double l2);

double logistic_loss(const Matrix& x, const std::vector<std::uint8_t>& y,
                     const std::vector<double>& sample_weights,
                     const std::vector<double>& weights, double bias, double l2,
                     double l1 = 0.0);

inline double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-m)) without overflow.
inline double log1p_exp_neg(double m) {
  if (m > 35.0) return std::exp(-m);
  if (m < -35.0) return -m;
  return std::log1p(std::exp(-m));
}

}  // namespace p2pbench
