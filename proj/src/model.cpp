#include "p2pbench/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "p2pbench/linear.hpp"

namespace p2pbench {

namespace {

using json = nlohmann::ordered_json;

std::vector<double> normalized(std::vector<double> v) {
  double total = 0.0;
  for (double& x : v) {
    x = std::max(0.0, x);
    total += x;
  }
  if (total > 0.0) {
    for (double& x : v) x /= total;
  }
  return v;
}

json spec_to_json(const ModelSpec& s);
ModelSpec spec_from_json(const json& j);

json spec_to_json(const ModelSpec& s) {
  json j;
  j["family"] = to_string(s.family);
  j["label"] = s.label;
  switch (s.family) {
    case ModelFamily::LogReg:
      j["c"] = s.c;
      j["penalty"] = s.penalty;
      j["max_iter"] = s.max_iter;
      break;
    case ModelFamily::DecisionTree:
      j["max_depth"] = s.max_depth;
      j["min_samples_leaf"] = s.min_samples_leaf;
      break;
    case ModelFamily::RandomForest:
      j["n_estimators"] = s.n_estimators;
      j["max_depth"] = s.max_depth;
      j["min_samples_leaf"] = s.min_samples_leaf;
      break;
    case ModelFamily::Gbt:
      j["n_estimators"] = s.n_estimators;
      j["max_depth"] = s.max_depth;
      j["min_samples_leaf"] = s.min_samples_leaf;
      j["learning_rate"] = s.learning_rate;
      j["subsample"] = s.subsample;
      j["num_leaves"] = s.num_leaves;
      break;
    case ModelFamily::Ebm:
      j["max_bins"] = s.max_bins;
      j["ebm_rounds"] = s.ebm_rounds;
      j["ebm_learning_rate"] = s.ebm_learning_rate;
      j["n_interactions"] = s.n_interactions;
      j["interaction_pairs"] = s.interaction_pairs;
      break;
    case ModelFamily::Stacking: {
      j["stacking_oof_folds"] = s.stacking_oof_folds;
      j["bases"] = json::array();
      for (const auto& b : s.bases) j["bases"].push_back(spec_to_json(b));
      break;
    }
  }
  return j;
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.family = model_family_from_string(j.at("family").get<std::string>());
  s.label = j.value("label", std::string());
  s.c = j.value("c", s.c);
  s.penalty = j.value("penalty", s.penalty);
  s.max_iter = j.value("max_iter", s.max_iter);
  s.n_estimators = j.value("n_estimators", s.n_estimators);
  s.max_depth = j.value("max_depth", s.max_depth);
  s.min_samples_leaf = j.value("min_samples_leaf", s.min_samples_leaf);
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.subsample = j.value("subsample", s.subsample);
  s.num_leaves = j.value("num_leaves", s.num_leaves);
  s.max_bins = j.value("max_bins", s.max_bins);
  s.ebm_rounds = j.value("ebm_rounds", s.ebm_rounds);
  s.ebm_learning_rate = j.value("ebm_learning_rate", s.ebm_learning_rate);
  s.n_interactions = j.value("n_interactions", s.n_interactions);
  if (j.contains("interaction_pairs")) {
    s.interaction_pairs =
        j["interaction_pairs"].get<std::vector<std::pair<std::size_t, std::size_t>>>();
  }
  s.stacking_oof_folds = j.value("stacking_oof_folds", s.stacking_oof_folds);
  if (j.contains("bases")) {
    for (const auto& b : j["bases"]) s.bases.push_back(spec_from_json(b));
  }
  s.validate();
  return s;
}

}  // namespace

std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::LogReg: return "logreg";
    case ModelFamily::DecisionTree: return "decision_tree";
    case ModelFamily::RandomForest: return "random_forest";
    case ModelFamily::Gbt: return "gbt";
    case ModelFamily::Ebm: return "ebm";
    case ModelFamily::Stacking: return "stacking";
  }
  return "gbt";
}

ModelFamily model_family_from_string(const std::string& s) {
  if (s == "logreg") return ModelFamily::LogReg;
  if (s == "decision_tree") return ModelFamily::DecisionTree;
  if (s == "random_forest") return ModelFamily::RandomForest;
  if (s == "gbt") return ModelFamily::Gbt;
  if (s == "ebm") return ModelFamily::Ebm;
  if (s == "stacking") return ModelFamily::Stacking;
  throw ValidationError("unknown model family: " + s);
}

void ModelSpec::validate() const {
  switch (family) {
    case ModelFamily::LogReg:
      if (c < 1e-4 || c > 1e2) {
        throw ValidationError("logreg C outside loguniform[1e-4, 1e2]");
      }
      if (penalty != "l1" && penalty != "l2") {
        throw ValidationError("logreg penalty must be l1 or l2");
      }
      break;
    case ModelFamily::DecisionTree:
      if (max_depth != 0 && (max_depth < 3 || max_depth > 30)) {
        throw ValidationError("tree depth outside {none, 3..30}");
      }
      break;
    case ModelFamily::RandomForest:
      if (n_estimators < 200 || n_estimators > 2000) {
        throw ValidationError("forest n_estimators outside [200, 2000]");
      }
      if (max_depth != 0 && (max_depth < 3 || max_depth > 30)) {
        throw ValidationError("forest depth outside {none, 3..30}");
      }
      break;
    case ModelFamily::Gbt:
      if (n_estimators < 200 || n_estimators > 4000) {
        throw ValidationError("gbt n_estimators outside [200, 4000]");
      }
      if (max_depth < 3 || max_depth > 12) {
        throw ValidationError("gbt depth outside [3, 12]");
      }
      if (learning_rate < 1e-3 || learning_rate > 0.3) {
        throw ValidationError("gbt learning rate outside loguniform[1e-3, 0.3]");
      }
      if (subsample < 0.5 || subsample > 1.0) {
        throw ValidationError("gbt subsample outside [0.5, 1.0]");
      }
      if (num_leaves < 31 || num_leaves > 1024) {
        throw ValidationError("gbt leaf cap outside [31, 1024]");
      }
      break;
    case ModelFamily::Ebm:
      if (max_bins != 64 && max_bins != 128 && max_bins != 256) {
        throw ValidationError("ebm bins must be one of {64, 128, 256}");
      }
      if (n_interactions > 50) {
        throw ValidationError("ebm interactions outside [0, 50]");
      }
      if (ebm_learning_rate < 1e-3 || ebm_learning_rate > 0.5) {
        throw ValidationError("ebm learning rate outside [1e-3, 0.5]");
      }
      break;
    case ModelFamily::Stacking:
      if (bases.empty()) throw ValidationError("stacking requires base models");
      if (stacking_oof_folds < 2) {
        throw ValidationError("stacking needs >= 2 OOF folds");
      }
      for (const auto& b : bases) {
        if (b.family == ModelFamily::Stacking) {
          throw ValidationError("stacking bases must not be stacking models");
        }
        b.validate();
      }
      break;
  }
}

std::string ModelSpec::to_json_text() const {
  return spec_to_json(*this).dump(2) + "\n";
}

ModelSpec ModelSpec::parse_json_text(const std::string& text) {
  return spec_from_json(json::parse(text));
}

ClassWeights ClassWeights::balanced(const std::vector<std::uint8_t>& y) {
  double n0 = 0.0, n1 = 0.0;
  for (std::uint8_t v : y) (v ? n1 : n0) += 1.0;
  const double n = n0 + n1;
  ClassWeights w;
  w.w0 = n0 > 0.0 ? n / (2.0 * n0) : 1.0;
  w.w1 = n1 > 0.0 ? n / (2.0 * n1) : 1.0;
  return w;
}

std::vector<double> ClassWeights::per_sample(
    const std::vector<std::uint8_t>& y) const {
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] ? w1 : w0;
  return w;
}

std::vector<double> TrainedModel::predict_proba_checked(const Matrix& x) const {
  if (x.cols != n_features()) {
    throw ValidationError("predict: expected " + std::to_string(n_features()) +
                          " features, got " + std::to_string(x.cols));
  }
  return predict_proba(x);
}

std::vector<double> LogRegModel::predict_proba(const Matrix& x) const {
  if (x.cols != weights.size()) {
    throw ValidationError("logreg predict: feature count mismatch");
  }
  std::vector<double> p(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) p[i] = sigmoid(margin(x.row(i)));
  return p;
}

double LogRegModel::margin(std::span<const double> row) const {
  double z = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * row[j];
  return z;
}

std::vector<double> LogRegModel::feature_importance() const {
  std::vector<double> imp(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) imp[j] = std::abs(weights[j]);
  return normalized(std::move(imp));
}

std::string LogRegModel::to_json_text() const {
  json j;
  j["format_version"] = 1;
  j["family"] = to_string(family());
  j["weights"] = weights;
  j["bias"] = bias;
  j["iterations"] = iterations;
  return j.dump() + "\n";
}

std::vector<double> TreeEnsembleModel::predict_proba(const Matrix& x) const {
  if (x.cols != n_features_) {
    throw ValidationError("tree ensemble predict: feature count mismatch");
  }
  std::vector<double> p(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double m = margin(x.row(i));
    p[i] = sigmoid_link ? sigmoid(m) : std::clamp(m, 0.0, 1.0);
  }
  return p;
}

std::vector<double> TreeEnsembleModel::feature_importance() const {
  return normalized(gain_importance);
}

std::string TreeEnsembleModel::to_json_text() const {
  json j;
  j["format_version"] = 1;
  j["family"] = to_string(kind);
  j["combine"] = combine == TreeCombine::Sum ? "sum" : "average";
  j["sigmoid_link"] = sigmoid_link;
  j["base_score"] = base_score;
  j["n_features"] = n_features_;
  j["best_iteration"] = best_iteration;
  j["gain_importance"] = gain_importance;
  j["trees"] = json::array();
  for (const Tree& t : trees) {
    json nodes = json::array();
    for (const TreeNode& n : t.nodes) {
      nodes.push_back({{"f", n.feature},
                       {"t", n.threshold},
                       {"l", n.left},
                       {"r", n.right},
                       {"v", n.value},
                       {"c", n.cover}});
    }
    j["trees"].push_back(std::move(nodes));
  }
  return j.dump() + "\n";
}

double EbmModel::shape_value(std::size_t feature, double x) const {
  const auto& edges = bin_edges[feature];
  const std::size_t b = static_cast<std::size_t>(
      std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
  return shapes[feature][b];
}

double EbmModel::margin(std::span<const double> row) const {
  double m = intercept;
  for (std::size_t f = 0; f < n_features_; ++f) m += shape_value(f, row[f]);
  for (const PairTerm& term : pairs) {
    const auto& ea = bin_edges[term.a];
    const auto& eb = bin_edges[term.b];
    const std::size_t ba = static_cast<std::size_t>(
        std::upper_bound(ea.begin(), ea.end(), row[term.a]) - ea.begin());
    const std::size_t bb = static_cast<std::size_t>(
        std::upper_bound(eb.begin(), eb.end(), row[term.b]) - eb.begin());
    m += term.grid[ba * shapes[term.b].size() + bb];
  }
  return m;
}

std::vector<double> EbmModel::contributions(std::span<const double> row) const {
  // Pair contributions are split evenly between the two features so the
  // vector still sums to margin - intercept.
  std::vector<double> c(n_features_, 0.0);
  for (std::size_t f = 0; f < n_features_; ++f) c[f] = shape_value(f, row[f]);
  for (const PairTerm& term : pairs) {
    const auto& ea = bin_edges[term.a];
    const auto& eb = bin_edges[term.b];
    const std::size_t ba = static_cast<std::size_t>(
        std::upper_bound(ea.begin(), ea.end(), row[term.a]) - ea.begin());
    const std::size_t bb = static_cast<std::size_t>(
        std::upper_bound(eb.begin(), eb.end(), row[term.b]) - eb.begin());
    const double v = term.grid[ba * shapes[term.b].size() + bb];
    c[term.a] += v / 2.0;
    c[term.b] += v / 2.0;
  }
  return c;
}

std::vector<double> EbmModel::predict_proba(const Matrix& x) const {
  if (x.cols != n_features_) {
    throw ValidationError("ebm predict: feature count mismatch");
  }
  std::vector<double> p(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) p[i] = sigmoid(margin(x.row(i)));
  return p;
}

std::vector<double> EbmModel::feature_importance() const {
  std::vector<double> imp(n_features_, 0.0);
  for (std::size_t f = 0; f < n_features_; ++f) {
    double s = 0.0, cnt = 0.0;
    for (std::size_t b = 0; b < shapes[f].size(); ++b) {
      s += std::abs(shapes[f][b]) * bin_counts[f][b];
      cnt += bin_counts[f][b];
    }
    imp[f] = cnt > 0.0 ? s / cnt : 0.0;
  }
  return normalized(std::move(imp));
}

std::string EbmModel::to_json_text() const {
  json j;
  j["format_version"] = 1;
  j["family"] = to_string(family());
  j["intercept"] = intercept;
  j["n_features"] = n_features_;
  j["rounds_run"] = rounds_run;
  j["bin_edges"] = bin_edges;
  j["shapes"] = shapes;
  j["bin_counts"] = bin_counts;
  j["pairs"] = json::array();
  for (const auto& p : pairs) {
    j["pairs"].push_back({{"a", p.a}, {"b", p.b}, {"grid", p.grid}});
  }
  return j.dump() + "\n";
}

double StackingModel::stack_logit(std::span<const double> row) const {
  Matrix one(1, row.size());
  std::copy(row.begin(), row.end(), one.data.begin());
  double z = meta_bias;
  for (std::size_t b = 0; b < base_models.size(); ++b) {
    z += meta_weights[b] * base_models[b]->predict_proba(one)[0];
  }
  return z;
}

std::vector<double> StackingModel::predict_proba(const Matrix& x) const {
  if (x.cols != n_features_) {
    throw ValidationError("stacking predict: feature count mismatch");
  }
  std::vector<double> z(x.rows, meta_bias);
  for (std::size_t b = 0; b < base_models.size(); ++b) {
    const auto p = base_models[b]->predict_proba(x);
    for (std::size_t i = 0; i < x.rows; ++i) z[i] += meta_weights[b] * p[i];
  }
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = sigmoid(z[i]);
  return out;
}

std::vector<double> StackingModel::feature_importance() const {
  std::vector<double> imp(n_features_, 0.0);
  for (std::size_t b = 0; b < base_models.size(); ++b) {
    const auto bi = base_models[b]->feature_importance();
    for (std::size_t f = 0; f < n_features_; ++f) {
      imp[f] += std::abs(meta_weights[b]) * bi[f];
    }
  }
  return normalized(std::move(imp));
}

std::string StackingModel::to_json_text() const {
  json j;
  j["format_version"] = 1;
  j["family"] = to_string(family());
  j["n_features"] = n_features_;
  j["meta_weights"] = meta_weights;
  j["meta_bias"] = meta_bias;
  j["base_names"] = base_names;
  j["bases"] = json::array();
  for (const auto& b : base_models) {
    j["bases"].push_back(json::parse(b->to_json_text()));
  }
  return j.dump() + "\n";
}

// family-specific trainers, defined in their own files
std::unique_ptr<TrainedModel> train_gbt(const ModelSpec&, const Matrix&,
                                        const std::vector<std::uint8_t>&,
                                        const ClassWeights&, Rng&,
                                        const EarlyStop*);
std::unique_ptr<TrainedModel> train_forest(const ModelSpec&, const Matrix&,
                                           const std::vector<std::uint8_t>&,
                                           const ClassWeights&, Rng&,
                                           bool single_tree);
std::unique_ptr<TrainedModel> train_ebm(const ModelSpec&, const Matrix&,
                                        const std::vector<std::uint8_t>&,
                                        const ClassWeights&, const EarlyStop*);

namespace {

std::unique_ptr<TrainedModel> train_logreg(const ModelSpec& spec, const Matrix& x,
                                           const std::vector<std::uint8_t>& y,
                                           const ClassWeights& weights) {
  LogisticOptions opts;
  if (spec.penalty == "l1") {
    opts.l1 = 1.0 / spec.c;
  } else {
    opts.l2 = 1.0 / spec.c;
  }
  opts.max_iter = spec.max_iter;
  opts.tol = 1e-6;
  const auto fit = fit_logistic(x, y, weights.per_sample(y), opts);
  auto model = std::make_unique<LogRegModel>();
  model->weights = fit.weights;
  model->bias = fit.bias;
  model->iterations = fit.iterations;
  return model;
}

std::unique_ptr<TrainedModel> train_stacking(const ModelSpec& spec,
                                             const Matrix& x,
                                             const std::vector<std::uint8_t>& y,
                                             const ClassWeights& weights,
                                             Rng& rng) {
  const std::size_t n = x.rows;
  const std::size_t k = spec.stacking_oof_folds;
  auto model = std::make_unique<StackingModel>();
  model->n_features_ = x.cols;

  // Stratified fold assignment for the OOF matrix.
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) (y[i] ? pos : neg).push_back(i);
  if (pos.size() < k || neg.size() < k) {
    throw ValidationError("stacking: too few rows per class for OOF folds");
  }
  Rng fold_rng = rng.stream("stacking-folds");
  fold_rng.shuffle(pos);
  fold_rng.shuffle(neg);
  model->audit.fold_of_row.assign(n, -1);
  model->audit.fold_train_rows.resize(k);
  model->audit.fold_eval_rows.resize(k);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    model->audit.fold_of_row[pos[i]] = static_cast<int>(i % k);
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    model->audit.fold_of_row[neg[i]] = static_cast<int>(i % k);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int f = model->audit.fold_of_row[i];
    model->audit.fold_eval_rows[static_cast<std::size_t>(f)].push_back(i);
    for (std::size_t g = 0; g < k; ++g) {
      if (static_cast<int>(g) != f) model->audit.fold_train_rows[g].push_back(i);
    }
  }

  model->oof = Matrix(n, spec.bases.size());
  for (std::size_t f = 0; f < k; ++f) {
    const auto& train_rows = model->audit.fold_train_rows[f];
    const auto& eval_rows = model->audit.fold_eval_rows[f];
    Matrix xt(train_rows.size(), x.cols);
    std::vector<std::uint8_t> yt(train_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      const auto row = x.row(train_rows[i]);
      std::copy(row.begin(), row.end(), xt.row(i).begin());
      yt[i] = y[train_rows[i]];
    }
    Matrix xe(eval_rows.size(), x.cols);
    for (std::size_t i = 0; i < eval_rows.size(); ++i) {
      const auto row = x.row(eval_rows[i]);
      std::copy(row.begin(), row.end(), xe.row(i).begin());
    }
    for (std::size_t b = 0; b < spec.bases.size(); ++b) {
      Rng base_rng = rng.stream("oof-" + std::to_string(f) + "-" + std::to_string(b));
      auto base = train_model(spec.bases[b], xt, yt, weights, base_rng, nullptr);
      const auto p = base->predict_proba(xe);
      for (std::size_t i = 0; i < eval_rows.size(); ++i) {
        model->oof.at(eval_rows[i], b) = p[i];
      }
    }
  }

  // Meta-learner on the OOF columns only.
  LogisticOptions meta_opts;
  meta_opts.l2 = 1.0;
  meta_opts.max_iter = 5000;
  meta_opts.tol = 1e-8;
  const auto meta = fit_logistic(model->oof, y, weights.per_sample(y), meta_opts);
  model->meta_weights = meta.weights;
  model->meta_bias = meta.bias;

  // Base models refit on the full matrix for prediction.
  for (std::size_t b = 0; b < spec.bases.size(); ++b) {
    Rng base_rng = rng.stream("refit-" + std::to_string(b));
    model->base_models.push_back(
        train_model(spec.bases[b], x, y, weights, base_rng, nullptr));
    model->base_names.push_back(spec.bases[b].name());
  }
  return model;
}

}  // namespace

std::unique_ptr<TrainedModel> train_model(const ModelSpec& spec, const Matrix& x,
                                          const std::vector<std::uint8_t>& y,
                                          const ClassWeights& weights, Rng& rng,
                                          const EarlyStop* early_stop) {
  spec.validate();
  if (x.rows == 0 || x.rows != y.size()) {
    throw ValidationError("train: matrix and label sizes disagree");
  }
  bool saw0 = false, saw1 = false;
  for (std::uint8_t v : y) (v ? saw1 : saw0) = true;
  if (!saw0 || !saw1) throw ValidationError("train: y must contain both classes");
  for (double v : x.data) {
    if (!std::isfinite(v)) {
      throw ValidationError("train: non-finite values in the feature matrix");
    }
  }
  switch (spec.family) {
    case ModelFamily::LogReg: return train_logreg(spec, x, y, weights);
    case ModelFamily::DecisionTree: return train_forest(spec, x, y, weights, rng, true);
    case ModelFamily::RandomForest: return train_forest(spec, x, y, weights, rng, false);
    case ModelFamily::Gbt: return train_gbt(spec, x, y, weights, rng, early_stop);
    case ModelFamily::Ebm: return train_ebm(spec, x, y, weights, early_stop);
    case ModelFamily::Stacking: return train_stacking(spec, x, y, weights, rng);
  }
  throw ValidationError("unhandled model family");
}

std::unique_ptr<TrainedModel> model_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  const ModelFamily family = model_family_from_string(j.at("family").get<std::string>());
  switch (family) {
    case ModelFamily::LogReg: {
      auto m = std::make_unique<LogRegModel>();
      m->weights = j.at("weights").get<std::vector<double>>();
      m->bias = j.at("bias").get<double>();
      m->iterations = j.value("iterations", std::size_t{0});
      return m;
    }
    case ModelFamily::DecisionTree:
    case ModelFamily::RandomForest:
    case ModelFamily::Gbt: {
      auto m = std::make_unique<TreeEnsembleModel>();
      m->kind = family;
      m->combine = j.at("combine").get<std::string>() == "sum" ? TreeCombine::Sum
                                                               : TreeCombine::Average;
      m->sigmoid_link = j.at("sigmoid_link").get<bool>();
      m->base_score = j.at("base_score").get<double>();
      m->n_features_ = j.at("n_features").get<std::size_t>();
      m->best_iteration = j.value("best_iteration", std::size_t{0});
      m->gain_importance = j.at("gain_importance").get<std::vector<double>>();
      for (const auto& tj : j.at("trees")) {
        Tree t;
        for (const auto& nj : tj) {
          TreeNode n;
          n.feature = nj.at("f").get<int>();
          n.threshold = nj.at("t").get<double>();
          n.left = nj.at("l").get<int>();
          n.right = nj.at("r").get<int>();
          n.value = nj.at("v").get<double>();
          n.cover = nj.at("c").get<double>();
          t.nodes.push_back(n);
        }
        t.check_well_formed();
        m->trees.push_back(std::move(t));
      }
      return m;
    }
    case ModelFamily::Ebm: {
      auto m = std::make_unique<EbmModel>();
      m->intercept = j.at("intercept").get<double>();
      m->n_features_ = j.at("n_features").get<std::size_t>();
      m->rounds_run = j.value("rounds_run", std::size_t{0});
      m->bin_edges = j.at("bin_edges").get<std::vector<std::vector<double>>>();
      m->shapes = j.at("shapes").get<std::vector<std::vector<double>>>();
      m->bin_counts = j.at("bin_counts").get<std::vector<std::vector<double>>>();
      for (const auto& pj : j.at("pairs")) {
        EbmModel::PairTerm term;
        term.a = pj.at("a").get<std::size_t>();
        term.b = pj.at("b").get<std::size_t>();
        term.grid = pj.at("grid").get<std::vector<double>>();
        m->pairs.push_back(std::move(term));
      }
      return m;
    }
    case ModelFamily::Stacking: {
      auto m = std::make_unique<StackingModel>();
      m->n_features_ = j.at("n_features").get<std::size_t>();
      m->meta_weights = j.at("meta_weights").get<std::vector<double>>();
      m->meta_bias = j.at("meta_bias").get<double>();
      m->base_names = j.value("base_names", std::vector<std::string>{});
      for (const auto& bj : j.at("bases")) {
        m->base_models.push_back(model_from_json_text(bj.dump()));
      }
      return m;
    }
  }
  throw ValidationError("unhandled model family in serialized model");
}

}  // namespace p2pbench
