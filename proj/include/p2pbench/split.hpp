#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "p2pbench/rng.hpp"
#include "p2pbench/table.hpp"

namespace p2pbench {

enum class SplitStrategy { TimePlusGroup, RandomStratified, GroupOnly, TimeForward };

std::string to_string(SplitStrategy s);
SplitStrategy split_strategy_from_string(const std::string& s);

struct SplitSpec {
  SplitStrategy strategy = SplitStrategy::TimePlusGroup;
  double phts_fraction = 0.20;
  std::uint64_t seed = 20260301;
};

// Chronological holdout: the last ceil(fraction * n) rows by time. A tied
// boundary timestamp moves wholesale into the holdout so no timestamp
// straddles the line. Returns (train_rows, phts_rows) as row indices.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> make_phts(
    const CaseTable& table, double fraction);

// Partition of all table rows into k folds under the given strategy.
// Throws InfeasibleStratificationError when a fold gets zero positives.
// A group larger than n/k under a group strategy is assigned anyway and
// reported through `warnings` when provided.
std::vector<std::vector<std::size_t>> make_folds(
    const CaseTable& table, SplitStrategy strategy, std::size_t k, Rng& rng,
    std::vector<std::string>* warnings = nullptr);

struct CvPlan {
  std::vector<std::size_t> phts_indices;
  // Original-table row indices throughout.
  std::vector<std::vector<std::size_t>> outer_folds;
  // inner_folds[outer][inner]: partitions of that outer pair's train rows.
  std::vector<std::vector<std::vector<std::size_t>>> inner_folds;
  SplitStrategy strategy = SplitStrategy::TimePlusGroup;
  std::size_t k_outer = 5;
  std::size_t k_inner = 3;
  std::vector<std::string> group_keys;
  std::vector<std::string> warnings;
  std::string note;

  struct EvalPair {
    std::vector<std::size_t> train;
    std::vector<std::size_t> eval;
  };

  // Strategy-aware train/eval pairs. Group and stratified strategies give
  // the usual K pairs; TimeForward gives expanding-window pairs (fold f
  // evaluated against all earlier folds), so K-1 pairs.
  std::vector<EvalPair> outer_pairs() const;
  static std::vector<EvalPair> pairs_from_folds(
      const std::vector<std::vector<std::size_t>>& folds, SplitStrategy strategy);
  std::vector<EvalPair> inner_pairs(std::size_t outer_index) const;

  void check_invariants(const CaseTable& table) const;
  std::uint64_t plan_hash() const;
  std::string to_json_text() const;
  static CvPlan parse_json_text(const std::string& text);
};

// PHTS split plus nested folds. Inner folds reuse the strategy on each
// outer-train subset with a derived rng stream; under group strategies the
// inner level enforces group purity (time ordering is an outer-level
// concern, recorded in the plan note).
CvPlan make_cv_plan(const CaseTable& table, const SplitSpec& spec,
                    std::size_t k_outer, std::size_t k_inner, Rng& rng);

}  // namespace p2pbench
