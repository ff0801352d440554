#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "p2pbench/common.hpp"

namespace p2pbench {

// Array-encoded binary tree. feature < 0 marks a leaf. Decision rule:
// x[feature] < threshold goes left. cover is the training row count at the
// node, which the SHAP path algorithm uses as conditional weights.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double cover = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(i)];
      i = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  // Cover-weighted expectation of the leaf values.
  double expected_value() const;

  // Well-formed binary tree: children in range, no cycles, finite leaves.
  void check_well_formed() const;
};

// How per-tree outputs combine into the ensemble margin.
enum class TreeCombine { Sum, Average };

struct TreeEnsembleView {
  std::span<const Tree> trees;
  double base_score = 0.0;  // added after combination
  TreeCombine combine = TreeCombine::Sum;

  double margin(std::span<const double> row) const {
    double s = 0.0;
    for (const Tree& t : trees) s += t.predict(row);
    if (combine == TreeCombine::Average && !trees.empty()) {
      s /= static_cast<double>(trees.size());
    }
    return s + base_score;
  }

  double expected_margin() const;
};

// Candidate split thresholds per feature: midpoints of consecutive sorted
// unique values, quantile-thinned to at most max_bins-1 candidates for
// wide columns. Rows are coded once so node histograms are O(rows).
struct BinnedMatrix {
  std::vector<std::vector<double>> thresholds;  // per feature, ascending
  std::vector<std::uint16_t> codes;             // row-major, rows x cols
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::uint16_t code(std::size_t r, std::size_t f) const {
    return codes[r * cols + f];
  }

  static BinnedMatrix build(const Matrix& x, std::size_t max_bins);
};

}  // namespace p2pbench
