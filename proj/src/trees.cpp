#include "p2pbench/trees.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace p2pbench {

double Tree::expected_value() const {
  const double root_cover = nodes.empty() ? 0.0 : nodes[0].cover;
  if (root_cover <= 0.0) return 0.0;
  double e = 0.0;
  for (const TreeNode& n : nodes) {
    if (n.feature < 0) e += n.value * n.cover;
  }
  return e / root_cover;
}

void Tree::check_well_formed() const {
  if (nodes.empty()) throw ValidationError("empty tree");
  std::vector<int> seen(nodes.size(), 0);
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (i < 0 || i >= static_cast<int>(nodes.size())) {
      throw ValidationError("tree child index out of range");
    }
    if (seen[static_cast<std::size_t>(i)]++) {
      throw ValidationError("tree node visited twice; not a tree");
    }
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    if (n.feature >= 0) {
      stack.push_back(n.left);
      stack.push_back(n.right);
    } else if (!std::isfinite(n.value)) {
      throw ValidationError("non-finite leaf value");
    }
  }
}

double TreeEnsembleView::expected_margin() const {
  double e = 0.0;
  for (const Tree& t : trees) e += t.expected_value();
  if (combine == TreeCombine::Average && !trees.empty()) {
    e /= static_cast<double>(trees.size());
  }
  return e + base_score;
}

BinnedMatrix BinnedMatrix::build(const Matrix& x, std::size_t max_bins) {
  BinnedMatrix b;
  b.rows = x.rows;
  b.cols = x.cols;
  b.thresholds.resize(x.cols);
  b.codes.assign(x.rows * x.cols, 0);
  std::vector<double> vals;
  for (std::size_t f = 0; f < x.cols; ++f) {
    vals.clear();
    vals.reserve(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) vals.push_back(x.at(r, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    auto& thr = b.thresholds[f];
    if (vals.size() >= 2) {
      if (vals.size() <= max_bins) {
        thr.reserve(vals.size() - 1);
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
          thr.push_back((vals[i] + vals[i + 1]) / 2.0);
        }
      } else {
        // Quantile-thinned subset of the unique-value midpoints.
        thr.reserve(max_bins - 1);
        for (std::size_t q = 1; q < max_bins; ++q) {
          const std::size_t i = q * (vals.size() - 1) / max_bins;
          const double t = (vals[i] + vals[i + 1]) / 2.0;
          if (thr.empty() || t > thr.back()) thr.push_back(t);
        }
      }
    }
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double v = x.at(r, f);
      const std::size_t code = static_cast<std::size_t>(
          std::upper_bound(thr.begin(), thr.end(), v) - thr.begin());
      b.codes[r * x.cols + f] = static_cast<std::uint16_t>(code);
    }
  }
  return b;
}

}  // namespace p2pbench
