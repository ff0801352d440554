#include <algorithm>
#include <cmath>

#include "p2pbench/explain.hpp"
#include "p2pbench/linear.hpp"

namespace p2pbench {

namespace {

// Path bookkeeping for the exact tree attribution (Lundberg's TreeSHAP).
// pweight of element i is the permutation weight of paths with i ones.
struct PathElement {
  int feature_index = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend_path(PathElement* path, int unique_depth, double zero_fraction,
                 double one_fraction, int feature_index) {
  path[unique_depth] = {feature_index, zero_fraction, one_fraction,
                        unique_depth == 0 ? 1.0 : 0.0};
  for (int i = unique_depth - 1; i >= 0; --i) {
    path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) /
                           static_cast<double>(unique_depth + 1);
    path[i].pweight = zero_fraction * path[i].pweight * (unique_depth - i) /
                      static_cast<double>(unique_depth + 1);
  }
}

void unwind_path(PathElement* path, int unique_depth, int path_index) {
  const double one_fraction = path[path_index].one_fraction;
  const double zero_fraction = path[path_index].zero_fraction;
  double next_one_portion = path[unique_depth].pweight;
  for (int i = unique_depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one_portion * (unique_depth + 1) /
                        ((i + 1) * one_fraction);
      next_one_portion = tmp - path[i].pweight * zero_fraction *
                                   (unique_depth - i) /
                                   static_cast<double>(unique_depth + 1);
    } else {
      path[i].pweight = path[i].pweight * (unique_depth + 1) /
                        (zero_fraction * (unique_depth - i));
    }
  }
  for (int i = path_index; i < unique_depth; ++i) {
    path[i].feature_index = path[i + 1].feature_index;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

double unwound_path_sum(const PathElement* path, int unique_depth,
                        int path_index) {
  const double one_fraction = path[path_index].one_fraction;
  const double zero_fraction = path[path_index].zero_fraction;
  double next_one_portion = path[unique_depth].pweight;
  double total = 0.0;
  for (int i = unique_depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = next_one_portion * (unique_depth + 1) /
                         ((i + 1) * one_fraction);
      total += tmp;
      next_one_portion = path[i].pweight - tmp * zero_fraction *
                                               (unique_depth - i) /
                                               static_cast<double>(unique_depth + 1);
    } else if (zero_fraction != 0.0) {
      total += (path[i].pweight / zero_fraction) /
               ((unique_depth - i) / static_cast<double>(unique_depth + 1));
    } else {
      throw ValidationError("tree shap: malformed path (zero fractions)");
    }
  }
  return total;
}

struct TreeShapWorker {
  const Tree& tree;
  std::span<const double> x;
  std::vector<double>& phi;
  double scale;  // 1 for sum, 1/n_trees for average
  std::vector<PathElement> buffer;

  void run() {
    int max_depth = compute_depth(0) + 2;
    buffer.assign(static_cast<std::size_t>((max_depth + 1) * (max_depth + 2)) / 2,
                  PathElement{});
    recurse(0, buffer.data(), 0, 1.0, 1.0, -1);
  }

  int compute_depth(int node) const {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.feature < 0) return 0;
    return 1 + std::max(compute_depth(n.left), compute_depth(n.right));
  }

  void recurse(int node_index, PathElement* parent_path, int unique_depth,
               double parent_zero_fraction, double parent_one_fraction,
               int parent_feature_index) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
    PathElement* path = parent_path + unique_depth + 1;
    std::copy(parent_path, parent_path + unique_depth + 1, path);
    extend_path(path, unique_depth, parent_zero_fraction, parent_one_fraction,
                parent_feature_index);

    if (node.feature < 0) {
      for (int i = 1; i <= unique_depth; ++i) {
        const double w = unwound_path_sum(path, unique_depth, i);
        const PathElement& el = path[i];
        phi[static_cast<std::size_t>(el.feature_index)] +=
            w * (el.one_fraction - el.zero_fraction) * node.value * scale;
      }
      return;
    }

    const int hot = x[static_cast<std::size_t>(node.feature)] < node.threshold
                        ? node.left
                        : node.right;
    const int cold = hot == node.left ? node.right : node.left;
    const double node_cover = tree.nodes[static_cast<std::size_t>(node_index)].cover;
    const double hot_zero =
        tree.nodes[static_cast<std::size_t>(hot)].cover / node_cover;
    const double cold_zero =
        tree.nodes[static_cast<std::size_t>(cold)].cover / node_cover;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    int path_index = 0;
    for (; path_index <= unique_depth; ++path_index) {
      if (path[path_index].feature_index == node.feature) break;
    }
    if (path_index != unique_depth + 1) {
      incoming_zero = path[path_index].zero_fraction;
      incoming_one = path[path_index].one_fraction;
      unwind_path(path, unique_depth, path_index);
      --unique_depth;
    }

    recurse(hot, path, unique_depth + 1, hot_zero * incoming_zero, incoming_one,
            node.feature);
    recurse(cold, path, unique_depth + 1, cold_zero * incoming_zero, 0.0,
            node.feature);
  }
};

}  // namespace

Attribution shap_linear(const LogRegModel& model, std::span<const double> x,
                        const Matrix& background) {
  if (background.rows == 0) {
    throw ValidationError("shap_linear: empty background");
  }
  if (background.cols != model.weights.size() || x.size() != model.weights.size()) {
    throw ValidationError("shap_linear: feature count mismatch");
  }
  Attribution a;
  a.scale = AttributionScale::Logit;
  a.phi.assign(model.weights.size(), 0.0);
  double base = model.bias;
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < background.rows; ++r) mean += background.at(r, j);
    mean /= static_cast<double>(background.rows);
    a.phi[j] = model.weights[j] * (x[j] - mean);
    base += model.weights[j] * mean;
  }
  a.base_value = base;
  double sum = base;
  for (double p : a.phi) sum += p;
  a.residual = std::abs(sum - model.margin(x));
  return a;
}

Attribution shap_tree(const TreeEnsembleView& ensemble, std::span<const double> x) {
  Attribution a;
  a.scale = AttributionScale::Margin;
  a.phi.assign(x.size(), 0.0);
  const double scale =
      ensemble.combine == TreeCombine::Average && !ensemble.trees.empty()
          ? 1.0 / static_cast<double>(ensemble.trees.size())
          : 1.0;
  for (const Tree& tree : ensemble.trees) {
    if (tree.nodes.empty()) throw ValidationError("tree shap: empty tree");
    if (tree.nodes[0].cover <= 0.0) {
      throw ValidationError("tree shap: tree lacks cover counts");
    }
    TreeShapWorker worker{tree, x, a.phi, scale, {}};
    worker.run();
  }
  a.base_value = ensemble.expected_margin();
  double sum = a.base_value;
  for (double p : a.phi) sum += p;
  a.residual = std::abs(sum - ensemble.margin(x));
  return a;
}

Attribution shap_stacking(const StackingModel& model, std::span<const double> x,
                          const Matrix& background) {
  Attribution out;
  out.scale = AttributionScale::Logit;
  out.phi.assign(x.size(), 0.0);
  double base = model.meta_bias;

  Matrix one(1, x.size());
  std::copy(x.begin(), x.end(), one.data.begin());

  for (std::size_t b = 0; b < model.base_models.size(); ++b) {
    const TrainedModel* base_model = model.base_models[b].get();
    Attribution phi_b;
    double margin_x = 0.0;
    double prob_x = base_model->predict_proba(one)[0];
    bool sigmoid_linked = true;
    if (const auto* lr = dynamic_cast<const LogRegModel*>(base_model)) {
      phi_b = shap_linear(*lr, x, background);
      margin_x = lr->margin(x);
    } else if (const auto* te = dynamic_cast<const TreeEnsembleModel*>(base_model)) {
      phi_b = shap_tree(te->view(), x);
      margin_x = te->margin(x);
      sigmoid_linked = te->sigmoid_link;
    } else if (const auto* ebm = dynamic_cast<const EbmModel*>(base_model)) {
      phi_b.phi = ebm->contributions(x);
      phi_b.base_value = ebm->intercept;
      margin_x = ebm->margin(x);
    } else {
      throw ValidationError("shap_stacking: unsupported base model");
    }
    // Local slope of the base probability against its margin. The secant
    // between the background margin and x keeps local accuracy exact; the
    // tangent is the fallback for coincident points.
    const double base_margin = phi_b.base_value;
    double slope = 1.0;
    double prob_at_base = base_margin;
    if (sigmoid_linked) {
      prob_at_base = sigmoid(base_margin);
      const double dm = margin_x - base_margin;
      if (std::abs(dm) > 1e-9) {
        slope = (prob_x - prob_at_base) / dm;
      } else {
        const double p = sigmoid(margin_x);
        slope = p * (1.0 - p);
      }
    } else {
      prob_at_base = std::clamp(base_margin, 0.0, 1.0);
      slope = 1.0;
    }
    const double m_b = model.meta_weights[b];
    for (std::size_t j = 0; j < out.phi.size(); ++j) {
      out.phi[j] += m_b * slope * phi_b.phi[j];
    }
    base += m_b * prob_at_base;
  }
  out.base_value = base;
  double sum = base;
  for (double p : out.phi) sum += p;
  out.residual = std::abs(sum - model.stack_logit(x));
  return out;
}

}  // namespace p2pbench
