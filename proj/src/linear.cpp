#include "p2pbench/linear.hpp"

#include <algorithm>
#include <cmath>

namespace p2pbench {

namespace {

// Largest eigenvalue of X^T diag(w) X by power iteration; deterministic
// start vector.
double weighted_gram_spectral_norm(const Matrix& x,
                                   const std::vector<double>& w) {
  const std::size_t n = x.rows, d = x.cols;
  if (n == 0 || d == 0) return 1.0;
  std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  std::vector<double> xv(n), u(d);
  double lambda = 1.0;
  for (int iter = 0; iter < 30; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = x.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += row[j] * v[j];
      xv[i] = s * w[i];
    }
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = x.row(i);
      for (std::size_t j = 0; j < d; ++j) u[j] += row[j] * xv[i];
    }
    double norm = 0.0;
    for (double uj : u) norm += uj * uj;
    norm = std::sqrt(norm);
    if (norm <= 0.0) return 1.0;
    lambda = norm;
    for (std::size_t j = 0; j < d; ++j) v[j] = u[j] / norm;
  }
  return lambda;
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

double logistic_loss(const Matrix& x, const std::vector<std::uint8_t>& y,
                     const std::vector<double>& sample_weights,
                     const std::vector<double>& weights, double bias, double l2,
                     double l1) {
  const std::size_t n = x.rows, d = x.cols;
  double total_w = 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sample_weights.empty() ? 1.0 : sample_weights[i];
    total_w += w;
    const auto row = x.row(i);
    double z = bias;
    for (std::size_t j = 0; j < d; ++j) z += row[j] * weights[j];
    const double m = (y[i] ? 1.0 : -1.0) * z;
    loss += w * log1p_exp_neg(m);
  }
  double reg = 0.0;
  for (double wj : weights) reg += 0.5 * l2 * wj * wj + l1 * std::abs(wj);
  return (loss + reg) / std::max(total_w, 1e-300);
}

std::vector<double> logistic_gradient(const Matrix& x,
                                      const std::vector<std::uint8_t>& y,
                                      const std::vector<double>& sample_weights,
                                      const std::vector<double>& weights,
                                      double bias, double l2) {
  const std::size_t n = x.rows, d = x.cols;
  std::vector<double> g(d + 1, 0.0);
  double total_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sample_weights.empty() ? 1.0 : sample_weights[i];
    total_w += w;
    const auto row = x.row(i);
    double z = bias;
    for (std::size_t j = 0; j < d; ++j) z += row[j] * weights[j];
    const double residual = w * (sigmoid(z) - (y[i] ? 1.0 : 0.0));
    for (std::size_t j = 0; j < d; ++j) g[j] += residual * row[j];
    g[d] += residual;
  }
  const double inv_w = 1.0 / std::max(total_w, 1e-300);
  for (std::size_t j = 0; j < d; ++j) {
    g[j] = g[j] * inv_w + l2 * inv_w * weights[j];
  }
  g[d] *= inv_w;
  return g;
}

LogisticFit fit_logistic(const Matrix& x, const std::vector<std::uint8_t>& y,
                         const std::vector<double>& sample_weights,
                         const LogisticOptions& options) {
  const std::size_t n = x.rows, d = x.cols;
  if (n == 0) throw ValidationError("fit_logistic needs rows");
  bool saw0 = false, saw1 = false;
  for (std::uint8_t v : y) (v ? saw1 : saw0) = true;
  if (!saw0 || !saw1) {
    throw ValidationError("fit_logistic needs both classes present");
  }

  std::vector<double> w = sample_weights;
  if (w.empty()) w.assign(n, 1.0);
  double total_w = 0.0;
  for (double v : w) total_w += v;
  const double inv_w = 1.0 / total_w;
  const double l1_mean = options.l1 * inv_w;
  const double l2_mean = options.l2 * inv_w;

  // 0.25 bounds the logistic curvature; the extra 0.25 covers the
  // unpenalized bias coordinate.
  const double lip =
      0.25 * weighted_gram_spectral_norm(x, w) * inv_w + l2_mean + 0.25;
  const double step = 1.0 / lip;

  std::vector<double> beta(d, 0.0), look(d, 0.0);
  double bias = 0.0, bias_look = 0.0;
  double t = 1.0;

  LogisticFit fit;
  for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
    const auto grad = logistic_gradient(x, y, w, look, bias_look, options.l2);
    std::vector<double> beta_new(d);
    for (std::size_t j = 0; j < d; ++j) {
      beta_new[j] = soft_threshold(look[j] - step * grad[j], step * l1_mean);
    }
    const double bias_new = bias_look - step * grad[d];
    fit.iterations = iter;

    // Check the minimal-norm subgradient periodically; the check costs a
    // full gradient pass.
    if (iter % 5 == 0 || iter == options.max_iter) {
      const auto g = logistic_gradient(x, y, w, beta_new, bias_new, options.l2);
      double gmax = std::abs(g[d]);
      for (std::size_t j = 0; j < d; ++j) {
        double gj = g[j];
        if (beta_new[j] > 0.0) {
          gj += l1_mean;
        } else if (beta_new[j] < 0.0) {
          gj -= l1_mean;
        } else {
          gj = std::max(0.0, std::abs(gj) - l1_mean);
        }
        gmax = std::max(gmax, std::abs(gj));
      }
      fit.grad_norm = gmax;
      if (gmax <= options.tol) {
        fit.converged = true;
        beta = std::move(beta_new);
        bias = bias_new;
        break;
      }
    }

    // Gradient-based restart: momentum is dropped when it points against
    // the latest progress direction.
    double restart_dot = (bias_look - bias_new) * (bias_new - bias);
    for (std::size_t j = 0; j < d; ++j) {
      restart_dot += (look[j] - beta_new[j]) * (beta_new[j] - beta[j]);
    }
    const double t_next =
        restart_dot > 0.0 ? 1.0 : (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    const double momentum = restart_dot > 0.0 ? 0.0 : (t - 1.0) / t_next;

    for (std::size_t j = 0; j < d; ++j) {
      look[j] = beta_new[j] + momentum * (beta_new[j] - beta[j]);
    }
    bias_look = bias_new + momentum * (bias_new - bias);
    beta = std::move(beta_new);
    bias = bias_new;
    t = t_next;
  }
  fit.weights = std::move(beta);
  fit.bias = bias;
  return fit;
}

}  // namespace p2pbench
