#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "p2pbench/model.hpp"

namespace p2pbench {

enum class AttributionScale { Logit, Margin, Probability };

struct Attribution {
  std::vector<double> phi;
  double base_value = 0.0;
  AttributionScale scale = AttributionScale::Margin;
  // |base + sum(phi) - model output| on the declared scale.
  double residual = 0.0;
};

// Exact linear attribution phi_j = w_j * (x_j - mean(background_j)) on the
// logit scale.
Attribution shap_linear(const LogRegModel& model, std::span<const double> x,
                        const Matrix& background);

// Exact path-dependent attribution per tree using node covers as
// conditional weights, summed (or averaged) across the ensemble on the
// margin scale.
Attribution shap_tree(const TreeEnsembleView& ensemble, std::span<const double> x);

// First-order composition through the stacking meta-learner:
// phi_j = sum_b m_b * A_b * phi_{b,j} with A_b the local slope of the
// base probability against its margin (secant between background and x,
// which keeps local accuracy exact); the realized residual is reported.
Attribution shap_stacking(const StackingModel& model, std::span<const double> x,
                          const Matrix& background);

// Spearman rank correlation with midrank ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct StabilityReport {
  std::size_t k = 20;
  std::vector<std::vector<std::string>> top_features;  // per fold
  Matrix rho;                                          // pairwise, unit diagonal
  double mean_rho = 0.0;                               // off-diagonal mean
  std::string to_csv_text() const;
};

// Pairwise Spearman of per-fold importance rankings over the union of the
// two folds' top-k feature sets; features outside a fold's own top-k are
// tied at the last midrank.
StabilityReport stability(
    const std::vector<std::map<std::string, double>>& per_fold_importance,
    std::size_t k = 20);

// Global importance input for stability(): mean |phi| over sample rows.
std::map<std::string, double> mean_abs_attribution(
    const std::vector<Attribution>& rows, const std::vector<std::string>& names);

}  // namespace p2pbench
