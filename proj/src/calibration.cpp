#include "p2pbench/calibration.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "p2pbench/linear.hpp"

namespace p2pbench {

// Newton with backtracking, after Platt (1999) as robustified by Lin,
// Lin & Weng (2007).
PlattParams platt_fit(const std::vector<double>& scores,
                      const std::vector<std::uint8_t>& y) {
  if (scores.size() != y.size()) throw ValidationError("platt_fit: length mismatch");
  if (scores.empty()) throw ValidationError("platt_fit: empty input");
  double n_pos = 0.0, n_neg = 0.0;
  for (std::uint8_t v : y) (v ? n_pos : n_neg) += 1.0;
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw ValidationError("platt_fit: calibration set must contain both classes");
  }

  const double t_pos = (n_pos + 1.0) / (n_pos + 2.0);
  const double t_neg = 1.0 / (n_neg + 2.0);
  const std::size_t n = scores.size();
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = y[i] ? t_pos : t_neg;

  double a = 0.0;
  double b = std::log((n_neg + 1.0) / (n_pos + 1.0));

  // Cross-entropy against the smoothed targets in softplus form:
  // z >= 0: (1-t)z + log(1+e^-z); z < 0: -tz + log(1+e^z).
  auto objective = [&](double aa, double bb) {
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = aa * scores[i] + bb;
      if (z >= 0.0) {
        obj += (1.0 - target[i]) * z + log1p_exp_neg(z);
      } else {
        obj += -target[i] * z + log1p_exp_neg(-z);
      }
    }
    return obj;
  };

  const double sigma_reg = 1e-12;
  double f_old = objective(a, b);
  for (int iter = 0; iter < 200; ++iter) {
    double h11 = sigma_reg, h22 = sigma_reg, h21 = 0.0;
    double g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = a * scores[i] + b;
      const double p = sigmoid(z);
      const double d1 = p - target[i];
      const double d2 = std::max(p * (1.0 - p), 1e-300);
      g1 += scores[i] * d1;
      g2 += d1;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
    }
    if (std::abs(g1) < 1e-8 && std::abs(g2) < 1e-8) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-10) {
      const double a_new = a + step * da;
      const double b_new = b + step * db;
      const double f_new = objective(a_new, b_new);
      if (f_new < f_old + 1e-4 * step * gd) {
        a = a_new;
        b = b_new;
        f_old = f_new;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return {a, b};
}

std::vector<double> platt_apply(const PlattParams& params,
                                const std::vector<double>& scores) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = sigmoid(params.a * scores[i] + params.b);
  }
  return out;
}

CalibrationReport reliability(const std::vector<std::uint8_t>& y,
                              const std::vector<double>& p,
                              std::size_t n_bins) {
  if (y.size() != p.size()) throw ValidationError("reliability: length mismatch");
  if (n_bins == 0) throw ValidationError("reliability: need at least one bin");
  CalibrationReport report;
  report.bins.assign(n_bins, {});
  std::vector<double> sum_pred(n_bins, 0.0), sum_pos(n_bins, 0.0);
  std::vector<std::size_t> counts(n_bins, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || p[i] > 1.0) {
      throw ValidationError("reliability: probabilities must lie in [0, 1]");
    }
    std::size_t b = static_cast<std::size_t>(p[i] * static_cast<double>(n_bins));
    if (b >= n_bins) b = n_bins - 1;  // p == 1.0 joins the last bin
    sum_pred[b] += p[i];
    sum_pos[b] += y[i];
    ++counts[b];
  }
  const double n = static_cast<double>(p.size());
  double ece = 0.0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    report.bins[b].count = counts[b];
    if (counts[b] == 0) continue;
    report.bins[b].mean_predicted = sum_pred[b] / static_cast<double>(counts[b]);
    report.bins[b].fraction_positive = sum_pos[b] / static_cast<double>(counts[b]);
    ece += (static_cast<double>(counts[b]) / n) *
           std::abs(report.bins[b].mean_predicted - report.bins[b].fraction_positive);
  }
  report.ece = ece;
  return report;
}

std::string CalibrationReport::to_json_text() const {
  nlohmann::ordered_json j;
  j["has_platt"] = has_platt;
  j["platt_a"] = platt.a;
  j["platt_b"] = platt.b;
  j["ece"] = ece;
  j["bins"] = nlohmann::ordered_json::array();
  for (const auto& b : bins) {
    j["bins"].push_back({{"mean_predicted", b.mean_predicted},
                         {"fraction_positive", b.fraction_positive},
                         {"count", b.count}});
  }
  return j.dump(2) + "\n";
}

}  // namespace p2pbench
