#include <algorithm>
#include <cmath>
#include <numeric>

#include "p2pbench/model.hpp"

namespace p2pbench {

namespace {

constexpr std::size_t kMaxBins = 128;
constexpr double kMinGain = 1e-12;

// Weighted Gini impurity mass: W * (1 - p0^2 - p1^2).
double gini_mass(double w0, double w1) {
  const double w = w0 + w1;
  if (w <= 0.0) return 0.0;
  const double p0 = w0 / w, p1 = w1 / w;
  return w * (1.0 - p0 * p0 - p1 * p1);
}

struct GiniBuilder {
  const BinnedMatrix& bins;
  const Matrix& x;
  const std::vector<std::uint8_t>& y;
  const std::vector<double>& sample_w;
  const ModelSpec& spec;
  bool subsample_features = false;
  Rng* rng = nullptr;
  std::vector<double> gain_by_feature;

  struct Frame {
    std::size_t begin, end;
    int depth;
    int tree_index;
  };

  Tree build(std::vector<std::uint32_t>& rows) {
    Tree tree;
    tree.nodes.push_back({});
    std::vector<Frame> stack = {{0, rows.size(), 0, 0}};
    std::vector<double> w0_hist, w1_hist;
    std::vector<std::size_t> c_hist;
    std::vector<std::size_t> feat_pool(bins.cols);
    std::iota(feat_pool.begin(), feat_pool.end(), std::size_t{0});
    const std::size_t mtry =
        subsample_features
            ? std::max<std::size_t>(
                  1, static_cast<std::size_t>(
                         std::floor(std::sqrt(static_cast<double>(bins.cols)))))
            : bins.cols;

    while (!stack.empty()) {
      const Frame fr = stack.back();
      stack.pop_back();
      double w0 = 0.0, w1 = 0.0;
      for (std::size_t i = fr.begin; i < fr.end; ++i) {
        const std::uint32_t r = rows[i];
        (y[r] ? w1 : w0) += sample_w[r];
      }
      const std::size_t count = fr.end - fr.begin;
      const bool depth_ok = spec.max_depth <= 0 || fr.depth < spec.max_depth;
      const bool pure = w0 <= 0.0 || w1 <= 0.0;

      double best_gain = 0.0;
      std::size_t best_feat = 0;
      int best_thr = -1;
      double parent_mass = gini_mass(w0, w1);

      if (depth_ok && !pure && count >= 2 * spec.min_samples_leaf) {
        // Feature pool: all features, or sqrt(d) sampled without
        // replacement per node for the forest.
        std::size_t pool_size = feat_pool.size();
        if (subsample_features && rng) {
          for (std::size_t i = 0; i < mtry; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng->next_below(pool_size - i));
            std::swap(feat_pool[i], feat_pool[j]);
          }
        }
        const std::size_t n_try = subsample_features ? mtry : pool_size;
        std::vector<std::size_t> tried(feat_pool.begin(),
                                       feat_pool.begin() + static_cast<std::ptrdiff_t>(n_try));
        std::sort(tried.begin(), tried.end());  // deterministic tie-breaks

        for (std::size_t f : tried) {
          const auto& thr = bins.thresholds[f];
          if (thr.empty()) continue;
          const std::size_t n_codes = thr.size() + 1;
          w0_hist.assign(n_codes, 0.0);
          w1_hist.assign(n_codes, 0.0);
          c_hist.assign(n_codes, 0);
          for (std::size_t i = fr.begin; i < fr.end; ++i) {
            const std::uint32_t r = rows[i];
            const std::uint16_t code = bins.code(r, f);
            (y[r] ? w1_hist : w0_hist)[code] += sample_w[r];
            ++c_hist[code];
          }
          double l0 = 0.0, l1 = 0.0;
          std::size_t cl = 0;
          for (std::size_t t = 0; t + 1 < n_codes; ++t) {
            l0 += w0_hist[t];
            l1 += w1_hist[t];
            cl += c_hist[t];
            if (cl < spec.min_samples_leaf) continue;
            if (count - cl < spec.min_samples_leaf) break;
            const double gain =
                parent_mass - gini_mass(l0, l1) - gini_mass(w0 - l0, w1 - l1);
            if (gain > best_gain + kMinGain) {
              best_gain = gain;
              best_feat = f;
              best_thr = static_cast<int>(t);
            }
          }
        }
      }

      if (best_thr < 0) {
        TreeNode& leaf = tree.nodes[static_cast<std::size_t>(fr.tree_index)];
        leaf.feature = -1;
        leaf.value = (w0 + w1) > 0.0 ? w1 / (w0 + w1) : 0.5;
        continue;
      }

      gain_by_feature[best_feat] += best_gain;
      const auto code_limit = static_cast<std::uint16_t>(best_thr);
      auto it = std::stable_partition(
          rows.begin() + static_cast<std::ptrdiff_t>(fr.begin),
          rows.begin() + static_cast<std::ptrdiff_t>(fr.end),
          [&](std::uint32_t r) { return bins.code(r, best_feat) <= code_limit; });
      const std::size_t mid = static_cast<std::size_t>(it - rows.begin());

      const int left_index = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      const int right_index = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      // Fresh reference: the push_backs above may reallocate the node array.
      TreeNode& tn = tree.nodes[static_cast<std::size_t>(fr.tree_index)];
      tn.feature = static_cast<int>(best_feat);
      tn.threshold = bins.thresholds[best_feat][static_cast<std::size_t>(best_thr)];
      tn.left = left_index;
      tn.right = right_index;
      // Right first so the left subtree is finished first (stable layout).
      stack.push_back({mid, fr.end, fr.depth + 1, right_index});
      stack.push_back({fr.begin, mid, fr.depth + 1, left_index});
    }
    return tree;
  }
};

void recompute_covers_full(Tree& tree, const Matrix& x) {
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

}  // namespace

std::unique_ptr<TrainedModel> train_forest(const ModelSpec& spec, const Matrix& x,
                                           const std::vector<std::uint8_t>& y,
                                           const ClassWeights& weights, Rng& rng,
                                           bool single_tree) {
  auto model = std::make_unique<TreeEnsembleModel>();
  model->kind = single_tree ? ModelFamily::DecisionTree : ModelFamily::RandomForest;
  model->combine = TreeCombine::Average;
  model->sigmoid_link = false;  // leaf values are class-1 probabilities
  model->base_score = 0.0;
  model->n_features_ = x.cols;
  model->gain_importance.assign(x.cols, 0.0);

  const std::size_t n = x.rows;
  const auto sample_w = weights.per_sample(y);
  const BinnedMatrix bins = BinnedMatrix::build(x, kMaxBins);

  const std::size_t n_trees = single_tree ? 1 : spec.n_estimators;
  for (std::size_t t = 0; t < n_trees; ++t) {
    Rng tree_rng = rng.stream(t);
    std::vector<std::uint32_t> rows;
    rows.reserve(n);
    if (single_tree) {
      for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<std::uint32_t>(i));
    } else {
      // Bootstrap sample.
      for (std::size_t i = 0; i < n; ++i) {
        rows.push_back(static_cast<std::uint32_t>(tree_rng.next_below(n)));
      }
    }
    GiniBuilder builder{bins,  x,        y, sample_w, spec, !single_tree,
                        &tree_rng, {}};
    builder.gain_by_feature.assign(x.cols, 0.0);
    Tree tree = builder.build(rows);
    recompute_covers_full(tree, x);
    tree.check_well_formed();
    for (std::size_t f = 0; f < x.cols; ++f) {
      model->gain_importance[f] += builder.gain_by_feature[f];
    }
    model->trees.push_back(std::move(tree));
  }
  model->best_iteration = model->trees.size();
  return model;
}

}  // namespace p2pbench
