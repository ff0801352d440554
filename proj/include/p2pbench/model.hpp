#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "p2pbench/rng.hpp"
#include "p2pbench/trees.hpp"

namespace p2pbench {

enum class ModelFamily { LogReg, DecisionTree, RandomForest, Gbt, Ebm, Stacking };

std::string to_string(ModelFamily f);
ModelFamily model_family_from_string(const std::string& s);

struct ModelSpec {
  ModelFamily family = ModelFamily::Gbt;

  // linear
  double c = 1.0;
  std::string penalty = "l2";
  std::size_t max_iter = 2000;

  // trees, forests
  std::size_t n_estimators = 200;
  int max_depth = 6;  // 0 means unlimited for the forest family
  std::size_t min_samples_leaf = 5;

  // boosting
  double learning_rate = 0.1;
  double subsample = 1.0;
  std::size_t num_leaves = 31;

  // glassbox
  std::size_t max_bins = 64;
  std::size_t ebm_rounds = 200;
  double ebm_learning_rate = 0.1;
  std::size_t n_interactions = 0;
  std::vector<std::pair<std::size_t, std::size_t>> interaction_pairs;

  // stacking
  std::vector<ModelSpec> bases;
  std::size_t stacking_oof_folds = 5;

  std::string label;  // report name; family name when empty

  std::string name() const { return label.empty() ? to_string(family) : label; }
  // Enforces the declared search-space bounds per family.
  void validate() const;
  std::string to_json_text() const;
  static ModelSpec parse_json_text(const std::string& text);
};

struct ClassWeights {
  double w0 = 1.0;
  double w1 = 1.0;

  // w_c = n / (2 * n_c)
  static ClassWeights balanced(const std::vector<std::uint8_t>& y);
  std::vector<double> per_sample(const std::vector<std::uint8_t>& y) const;
};

struct EarlyStop {
  const Matrix* x_val = nullptr;
  const std::vector<std::uint8_t>* y_val = nullptr;
  std::size_t patience = 50;
};

class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  virtual ModelFamily family() const = 0;
  virtual std::size_t n_features() const = 0;
  virtual std::vector<double> predict_proba(const Matrix& x) const = 0;
  // Nonnegative, sums to 1 (all-zero only if the model is degenerate).
  virtual std::vector<double> feature_importance() const = 0;
  virtual std::string to_json_text() const = 0;

  std::vector<double> predict_proba_checked(const Matrix& x) const;
};

std::unique_ptr<TrainedModel> train_model(const ModelSpec& spec, const Matrix& x,
                                          const std::vector<std::uint8_t>& y,
                                          const ClassWeights& weights, Rng& rng,
                                          const EarlyStop* early_stop = nullptr);

std::unique_ptr<TrainedModel> model_from_json_text(const std::string& text);

// Concrete models, exposed for the explainers.

class LogRegModel : public TrainedModel {
 public:
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t iterations = 0;

  ModelFamily family() const override { return ModelFamily::LogReg; }
  std::size_t n_features() const override { return weights.size(); }
  std::vector<double> predict_proba(const Matrix& x) const override;
  std::vector<double> feature_importance() const override;
  std::string to_json_text() const override;
  double margin(std::span<const double> row) const;
};

class TreeEnsembleModel : public TrainedModel {
 public:
  ModelFamily kind = ModelFamily::Gbt;
  std::vector<Tree> trees;
  double base_score = 0.0;
  TreeCombine combine = TreeCombine::Sum;
  bool sigmoid_link = true;  // margin -> probability through sigmoid
  std::vector<double> gain_importance;
  std::size_t n_features_ = 0;
  std::size_t best_iteration = 0;

  ModelFamily family() const override { return kind; }
  std::size_t n_features() const override { return n_features_; }
  std::vector<double> predict_proba(const Matrix& x) const override;
  std::vector<double> feature_importance() const override;
  std::string to_json_text() const override;
  TreeEnsembleView view() const { return {trees, base_score, combine}; }
  double margin(std::span<const double> row) const { return view().margin(row); }
};

class EbmModel : public TrainedModel {
 public:
  struct PairTerm {
    std::size_t a = 0;
    std::size_t b = 0;
    std::vector<double> grid;  // (edges_a+1) x (edges_b+1), row-major
  };
  std::vector<std::vector<double>> bin_edges;  // per feature
  std::vector<std::vector<double>> shapes;     // per feature, per bin
  std::vector<std::vector<double>> bin_counts; // train occupancy per bin
  std::vector<PairTerm> pairs;
  double intercept = 0.0;
  std::size_t n_features_ = 0;
  std::size_t rounds_run = 0;

  ModelFamily family() const override { return ModelFamily::Ebm; }
  std::size_t n_features() const override { return n_features_; }
  std::vector<double> predict_proba(const Matrix& x) const override;
  std::vector<double> feature_importance() const override;
  std::string to_json_text() const override;

  double shape_value(std::size_t feature, double x) const;
  // intercept + sum of univariate and pair contributions, exactly.
  double margin(std::span<const double> row) const;
  std::vector<double> contributions(std::span<const double> row) const;
};

class StackingModel : public TrainedModel {
 public:
  struct OofAudit {
    std::vector<int> fold_of_row;
    std::vector<std::vector<std::size_t>> fold_train_rows;
    std::vector<std::vector<std::size_t>> fold_eval_rows;
  };

  std::vector<std::unique_ptr<TrainedModel>> base_models;  // refit on full X
  std::vector<std::string> base_names;
  std::vector<double> meta_weights;
  double meta_bias = 0.0;
  Matrix oof;  // rows x bases, the meta-learner's training features
  OofAudit audit;
  std::size_t n_features_ = 0;

  ModelFamily family() const override { return ModelFamily::Stacking; }
  std::size_t n_features() const override { return n_features_; }
  std::vector<double> predict_proba(const Matrix& x) const override;
  std::vector<double> feature_importance() const override;
  std::string to_json_text() const override;
  // Meta linear score (stack logit): sum_b m_b p_b(x) + c.
  double stack_logit(std::span<const double> row) const;
};

}  // namespace p2pbench
