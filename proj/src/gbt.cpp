#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "p2pbench/linear.hpp"
#include "p2pbench/model.hpp"

namespace p2pbench {

namespace {

constexpr double kLambda = 1.0;       // L2 on leaf values
constexpr double kMinGain = 1e-12;
constexpr std::size_t kMaxBins = 128;

struct SplitChoice {
  double gain = 0.0;
  std::size_t feature = 0;
  int threshold_index = -1;
  double g_left = 0.0, h_left = 0.0;
  std::size_t count_left = 0;
};

struct BuildNode {
  std::size_t begin = 0, end = 0;  // span in the row-index array
  int depth = 0;
  double g = 0.0, h = 0.0;
  int tree_index = -1;
  SplitChoice best;
};

struct HeapEntry {
  double gain;
  std::size_t node;
  bool operator<(const HeapEntry& o) const {
    if (gain != o.gain) return gain < o.gain;
    return node > o.node;  // lower node id wins ties
  }
};

class GbtTreeBuilder {
 public:
  GbtTreeBuilder(const BinnedMatrix& bins, const std::vector<double>& grad,
                 const std::vector<double>& hess, const ModelSpec& spec)
      : bins_(bins), grad_(grad), hess_(hess), spec_(spec) {}

  Tree build(std::vector<std::uint32_t>& rows) {
    Tree tree;
    nodes_.clear();
    BuildNode root;
    root.begin = 0;
    root.end = rows.size();
    root.depth = 0;
    for (std::uint32_t r : rows) {
      root.g += grad_[r];
      root.h += hess_[r];
    }
    root.tree_index = 0;
    tree.nodes.push_back({});
    nodes_.push_back(root);

    std::priority_queue<HeapEntry> heap;
    find_best(rows, 0);
    if (nodes_[0].best.threshold_index >= 0) heap.push({nodes_[0].best.gain, 0});

    std::size_t leaves = 1;
    while (!heap.empty() && leaves < spec_.num_leaves) {
      const HeapEntry top = heap.top();
      heap.pop();
      // Copies: growing nodes_ below would invalidate references.
      const BuildNode node = nodes_[top.node];
      const SplitChoice s = node.best;

      // Partition rows by the chosen threshold code.
      const std::size_t mid = partition_rows(rows, node, s);

      BuildNode left, right;
      left.begin = node.begin;
      left.end = mid;
      right.begin = mid;
      right.end = node.end;
      left.depth = right.depth = node.depth + 1;
      left.g = s.g_left;
      left.h = s.h_left;
      right.g = node.g - s.g_left;
      right.h = node.h - s.h_left;

      const std::size_t li = nodes_.size();
      nodes_.push_back(left);
      const std::size_t ri = nodes_.size();
      nodes_.push_back(right);

      const int left_index = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      const int right_index = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      nodes_[li].tree_index = left_index;
      nodes_[ri].tree_index = right_index;
      TreeNode& tn = tree.nodes[static_cast<std::size_t>(node.tree_index)];
      tn.feature = static_cast<int>(s.feature);
      tn.threshold =
          bins_.thresholds[s.feature][static_cast<std::size_t>(s.threshold_index)];
      tn.left = left_index;
      tn.right = right_index;

      gain_by_feature_[s.feature] += s.gain;
      ++leaves;

      if (leaves < spec_.num_leaves) {
        find_best(rows, li);
        if (nodes_[li].best.threshold_index >= 0) {
          heap.push({nodes_[li].best.gain, li});
        }
        find_best(rows, ri);
        if (nodes_[ri].best.threshold_index >= 0) {
          heap.push({nodes_[ri].best.gain, ri});
        }
      }
    }

    // Newton leaf values with shrinkage.
    for (const BuildNode& b : nodes_) {
      TreeNode& tn = tree.nodes[static_cast<std::size_t>(b.tree_index)];
      if (tn.feature < 0) {
        tn.value = -spec_.learning_rate * b.g / (b.h + kLambda);
      }
    }
    return tree;
  }

  const std::vector<double>& gains() const { return gain_by_feature_; }
  void reset_gains(std::size_t d) { gain_by_feature_.assign(d, 0.0); }

 private:
  void find_best(const std::vector<std::uint32_t>& rows, std::size_t node_id) {
    BuildNode& node = nodes_[node_id];
    node.best = SplitChoice{};
    node.best.threshold_index = -1;
    const std::size_t count = node.end - node.begin;
    if (count < 2 * spec_.min_samples_leaf) return;
    if (spec_.max_depth > 0 && node.depth >= spec_.max_depth) return;

    const double parent_score = node.g * node.g / (node.h + kLambda);
    for (std::size_t f = 0; f < bins_.cols; ++f) {
      const auto& thr = bins_.thresholds[f];
      if (thr.empty()) continue;
      const std::size_t n_codes = thr.size() + 1;
      g_hist_.assign(n_codes, 0.0);
      h_hist_.assign(n_codes, 0.0);
      c_hist_.assign(n_codes, 0);
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t r = rows[i];
        const std::uint16_t code = bins_.code(r, f);
        g_hist_[code] += grad_[r];
        h_hist_[code] += hess_[r];
        ++c_hist_[code];
      }
      double gl = 0.0, hl = 0.0;
      std::size_t cl = 0;
      for (std::size_t t = 0; t + 1 < n_codes; ++t) {
        gl += g_hist_[t];
        hl += h_hist_[t];
        cl += c_hist_[t];
        if (cl < spec_.min_samples_leaf) continue;
        if (count - cl < spec_.min_samples_leaf) break;
        const double gr = node.g - gl;
        const double hr = node.h - hl;
        const double gain = 0.5 * (gl * gl / (hl + kLambda) + gr * gr / (hr + kLambda) -
                                   parent_score);
        if (gain > node.best.gain + kMinGain ||
            (node.best.threshold_index < 0 && gain > kMinGain)) {
          node.best.gain = gain;
          node.best.feature = f;
          node.best.threshold_index = static_cast<int>(t);
          node.best.g_left = gl;
          node.best.h_left = hl;
          node.best.count_left = cl;
        }
      }
    }
  }

  std::size_t partition_rows(std::vector<std::uint32_t>& rows, const BuildNode& node,
                             const SplitChoice& s) {
    const auto code_limit = static_cast<std::uint16_t>(s.threshold_index);
    auto it = std::stable_partition(
        rows.begin() + static_cast<std::ptrdiff_t>(node.begin),
        rows.begin() + static_cast<std::ptrdiff_t>(node.end),
        [&](std::uint32_t r) { return bins_.code(r, s.feature) <= code_limit; });
    return static_cast<std::size_t>(it - rows.begin());
  }

  const BinnedMatrix& bins_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  const ModelSpec& spec_;
  std::vector<BuildNode> nodes_;
  std::vector<double> g_hist_, h_hist_;
  std::vector<std::size_t> c_hist_;
  std::vector<double> gain_by_feature_;
};

void recompute_covers(Tree& tree, const Matrix& x) {
  for (TreeNode& n : tree.nodes) n.cover = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto row = x.row(r);
    int i = 0;
    for (;;) {
      TreeNode& n = tree.nodes[static_cast<std::size_t>(i)];
      n.cover += 1.0;
      if (n.feature < 0) break;
      i = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
  }
}

double weighted_logloss(const std::vector<double>& margins,
                        const std::vector<std::uint8_t>& y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    loss += log1p_exp_neg((y[i] ? 1.0 : -1.0) * margins[i]);
  }
  return loss / static_cast<double>(y.size());
}

}  // namespace

std::unique_ptr<TrainedModel> train_gbt(const ModelSpec& spec, const Matrix& x,
                                        const std::vector<std::uint8_t>& y,
                                        const ClassWeights& weights, Rng& rng,
                                        const EarlyStop* early_stop) {
  auto model = std::make_unique<TreeEnsembleModel>();
  model->kind = ModelFamily::Gbt;
  model->combine = TreeCombine::Sum;
  model->sigmoid_link = true;
  model->n_features_ = x.cols;
  model->gain_importance.assign(x.cols, 0.0);

  const std::size_t n = x.rows;
  const auto sample_w = weights.per_sample(y);
  double wp = 0.0, wn = 0.0;
  for (std::size_t i = 0; i < n; ++i) (y[i] ? wp : wn) += sample_w[i];
  model->base_score = std::log(std::max(wp, 1e-12) / std::max(wn, 1e-12));

  const BinnedMatrix bins = BinnedMatrix::build(x, kMaxBins);
  std::vector<double> margins(n, model->base_score);
  std::vector<double> grad(n), hess(n);
  GbtTreeBuilder builder(bins, grad, hess, spec);
  builder.reset_gains(x.cols);

  std::vector<double> val_margins;
  if (early_stop && early_stop->x_val) {
    val_margins.assign(early_stop->x_val->rows, model->base_score);
  }
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_round = 0;
  std::size_t since_best = 0;
  Rng subsample_rng = rng.stream("subsample");

  for (std::size_t round = 0; round < spec.n_estimators; ++round) {
    std::vector<std::uint32_t> rows;
    rows.reserve(n);
    if (spec.subsample >= 1.0) {
      for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<std::uint32_t>(i));
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (subsample_rng.bernoulli(spec.subsample)) {
          rows.push_back(static_cast<std::uint32_t>(i));
        }
      }
      if (rows.size() < 2 * spec.min_samples_leaf) {
        for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<std::uint32_t>(i));
      }
    }
    for (std::uint32_t r : rows) {
      const double p = sigmoid(margins[r]);
      grad[r] = sample_w[r] * (p - (y[r] ? 1.0 : 0.0));
      hess[r] = std::max(sample_w[r] * p * (1.0 - p), 1e-16);
    }
    Tree tree = builder.build(rows);
    recompute_covers(tree, x);
    for (std::size_t i = 0; i < n; ++i) margins[i] += tree.predict(x.row(i));
    model->trees.push_back(std::move(tree));

    if (early_stop && early_stop->x_val) {
      const Tree& t = model->trees.back();
      for (std::size_t i = 0; i < val_margins.size(); ++i) {
        val_margins[i] += t.predict(early_stop->x_val->row(i));
      }
      const double val_loss = weighted_logloss(val_margins, *early_stop->y_val);
      if (val_loss < best_val - 1e-12) {
        best_val = val_loss;
        best_round = round + 1;
        since_best = 0;
      } else if (++since_best >= early_stop->patience) {
        break;
      }
    }
  }
  if (early_stop && early_stop->x_val && best_round > 0) {
    model->trees.resize(best_round);
    model->best_iteration = best_round;
  } else {
    model->best_iteration = model->trees.size();
  }
  model->gain_importance = builder.gains();
  return model;
}

}  // namespace p2pbench
