#include "p2pbench/split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

namespace p2pbench {

namespace {

using json = nlohmann::ordered_json;

struct Group {
  std::string key;
  std::vector<std::size_t> rows;
  std::size_t positives = 0;
  std::int64_t first_time = std::numeric_limits<std::int64_t>::max();
};

std::vector<Group> collect_groups(const CaseTable& table,
                                  const std::vector<std::uint8_t>& y,
                                  bool with_time) {
  std::map<std::string, std::size_t> index;
  std::vector<Group> groups;
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    const std::string key = table.group_key(r);
    auto it = index.find(key);
    std::size_t g;
    if (it == index.end()) {
      g = groups.size();
      index.emplace(key, g);
      groups.push_back({key, {}, 0, std::numeric_limits<std::int64_t>::max()});
    } else {
      g = it->second;
    }
    groups[g].rows.push_back(r);
    groups[g].positives += y[r];
    if (with_time) {
      groups[g].first_time = std::min(groups[g].first_time, table.time_value(r));
    }
  }
  return groups;
}

// Greedy balancing: each group goes to the fold with the fewest positives,
// ties broken by fewest rows, then lowest fold index.
std::vector<std::vector<std::size_t>> assign_groups(
    const std::vector<const Group*>& ordered, std::size_t k,
    std::vector<std::string>* warnings, std::size_t n_rows) {
  std::vector<std::vector<std::size_t>> folds(k);
  std::vector<std::size_t> fold_pos(k, 0);
  for (const Group* g : ordered) {
    if (warnings && g->rows.size() > n_rows / k) {
      warnings->push_back("group '" + g->key + "' has " +
                          std::to_string(g->rows.size()) +
                          " rows, more than n/k; assigned anyway");
    }
    std::size_t best = 0;
    for (std::size_t f = 1; f < k; ++f) {
      if (fold_pos[f] < fold_pos[best] ||
          (fold_pos[f] == fold_pos[best] &&
           folds[f].size() < folds[best].size())) {
        best = f;
      }
    }
    folds[best].insert(folds[best].end(), g->rows.begin(), g->rows.end());
    fold_pos[best] += g->positives;
  }
  return folds;
}

void check_fold_positives(const std::vector<std::vector<std::size_t>>& folds,
                          const std::vector<std::uint8_t>& y) {
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::size_t pos = 0;
    for (std::size_t r : folds[f]) pos += y[r];
    if (pos == 0) {
      throw InfeasibleStratificationError(
          "fold " + std::to_string(f) +
          " received zero positives; stratification infeasible");
    }
  }
}

}  // namespace

std::string to_string(SplitStrategy s) {
  switch (s) {
    case SplitStrategy::TimePlusGroup: return "time_plus_group";
    case SplitStrategy::RandomStratified: return "random_stratified";
    case SplitStrategy::GroupOnly: return "group_only";
    case SplitStrategy::TimeForward: return "time_forward";
  }
  return "time_plus_group";
}

SplitStrategy split_strategy_from_string(const std::string& s) {
  if (s == "time_plus_group") return SplitStrategy::TimePlusGroup;
  if (s == "random_stratified") return SplitStrategy::RandomStratified;
  if (s == "group_only") return SplitStrategy::GroupOnly;
  if (s == "time_forward") return SplitStrategy::TimeForward;
  throw ValidationError("unknown split strategy: " + s);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> make_phts(
    const CaseTable& table, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("phts fraction must be in (0, 1)");
  }
  const std::size_t n = table.n_rows();
  if (n < 5) throw ValidationError("need at least 5 rows for a holdout split");
  std::vector<std::int64_t> times(n);
  for (std::size_t i = 0; i < n; ++i) times[i] = table.time_value(i);
  std::vector<std::int64_t> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t target =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  // Boundary timestamp; the entire tied block moves into the holdout.
  const std::int64_t boundary = sorted[n - target];
  std::vector<std::size_t> train, phts;
  for (std::size_t i = 0; i < n; ++i) {
    (times[i] >= boundary ? phts : train).push_back(i);
  }
  if (train.empty()) {
    throw ValidationError(
        "no time boundary exists: every row ties with the holdout boundary");
  }
  return {std::move(train), std::move(phts)};
}

std::vector<std::vector<std::size_t>> make_folds(
    const CaseTable& table, SplitStrategy strategy, std::size_t k, Rng& rng,
    std::vector<std::string>* warnings) {
  if (k < 2) throw ValidationError("need k >= 2 folds");
  const std::size_t n = table.n_rows();
  if (n < k) throw ValidationError("fewer rows than folds");
  const auto y = table.labels();

  std::vector<std::vector<std::size_t>> folds;
  switch (strategy) {
    case SplitStrategy::RandomStratified: {
      std::vector<std::size_t> pos, neg;
      for (std::size_t i = 0; i < n; ++i) (y[i] ? pos : neg).push_back(i);
      rng.shuffle(pos);
      rng.shuffle(neg);
      folds.assign(k, {});
      for (std::size_t i = 0; i < pos.size(); ++i) folds[i % k].push_back(pos[i]);
      for (std::size_t i = 0; i < neg.size(); ++i) folds[i % k].push_back(neg[i]);
      for (auto& f : folds) std::sort(f.begin(), f.end());
      break;
    }
    case SplitStrategy::TimeForward: {
      const auto order = time_sort_order(table);
      folds.assign(k, {});
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t f = std::min(k - 1, i * k / n);
        folds[f].push_back(order[i]);
      }
      break;
    }
    case SplitStrategy::TimePlusGroup:
    case SplitStrategy::GroupOnly: {
      if (table.group_key_columns.empty()) {
        throw ValidationError("group strategy requires declared group keys");
      }
      const bool with_time = strategy == SplitStrategy::TimePlusGroup;
      auto groups = collect_groups(table, y, with_time);
      if (groups.size() < k) {
        throw ValidationError("fewer groups than folds under a group strategy");
      }
      std::vector<const Group*> ordered;
      ordered.reserve(groups.size());
      for (const auto& g : groups) ordered.push_back(&g);
      if (with_time) {
        // Groups enter in first-activity order so assignment is stable
        // and early groups spread across folds.
        std::sort(ordered.begin(), ordered.end(),
                  [](const Group* a, const Group* b) {
                    if (a->first_time != b->first_time) {
                      return a->first_time < b->first_time;
                    }
                    return a->key < b->key;
                  });
      } else {
        // Largest positive mass first gives the greedy balancer room.
        std::sort(ordered.begin(), ordered.end(),
                  [](const Group* a, const Group* b) {
                    if (a->positives != b->positives) return a->positives > b->positives;
                    if (a->rows.size() != b->rows.size()) {
                      return a->rows.size() > b->rows.size();
                    }
                    return a->key < b->key;
                  });
      }
      folds = assign_groups(ordered, k, warnings, n);
      for (auto& f : folds) std::sort(f.begin(), f.end());
      break;
    }
  }
  for (const auto& f : folds) {
    if (f.empty()) throw ValidationError("a fold ended up empty");
  }
  check_fold_positives(folds, y);
  return folds;
}

std::vector<CvPlan::EvalPair> CvPlan::pairs_from_folds(
    const std::vector<std::vector<std::size_t>>& folds, SplitStrategy strategy) {
  std::vector<EvalPair> pairs;
  if (strategy == SplitStrategy::TimeForward) {
    // Expanding window: evaluate fold f against everything earlier.
    for (std::size_t f = 1; f < folds.size(); ++f) {
      EvalPair p;
      for (std::size_t g = 0; g < f; ++g) {
        p.train.insert(p.train.end(), folds[g].begin(), folds[g].end());
      }
      p.eval = folds[f];
      pairs.push_back(std::move(p));
    }
    return pairs;
  }
  for (std::size_t f = 0; f < folds.size(); ++f) {
    EvalPair p;
    p.eval = folds[f];
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g == f) continue;
      p.train.insert(p.train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(p.train.begin(), p.train.end());
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<CvPlan::EvalPair> CvPlan::outer_pairs() const {
  return pairs_from_folds(outer_folds, strategy);
}

std::vector<CvPlan::EvalPair> CvPlan::inner_pairs(std::size_t outer_index) const {
  return pairs_from_folds(inner_folds[outer_index], strategy);
}

CvPlan make_cv_plan(const CaseTable& table, const SplitSpec& spec,
                    std::size_t k_outer, std::size_t k_inner, Rng& rng) {
  CvPlan plan;
  plan.strategy = spec.strategy;
  plan.k_outer = k_outer;
  plan.k_inner = k_inner;
  plan.group_keys = table.group_key_columns;
  plan.note =
      "inner folds enforce group purity only; time ordering is applied at "
      "the holdout boundary and outer level";

  auto [train_rows, phts_rows] = make_phts(table, spec.phts_fraction);
  plan.phts_indices = phts_rows;

  const CaseTable dev = table.take_rows(train_rows);
  Rng outer_rng = rng.stream("outer");
  auto outer_local = make_folds(dev, spec.strategy, k_outer, outer_rng,
                                &plan.warnings);
  for (const auto& fold : outer_local) {
    std::vector<std::size_t> mapped;
    mapped.reserve(fold.size());
    for (std::size_t r : fold) mapped.push_back(train_rows[r]);
    plan.outer_folds.push_back(std::move(mapped));
  }

  const auto pairs = CvPlan::pairs_from_folds(plan.outer_folds, spec.strategy);
  for (std::size_t o = 0; o < pairs.size(); ++o) {
    const auto& train = pairs[o].train;
    const CaseTable sub = table.take_rows(train);
    Rng inner_rng = rng.stream("inner-" + std::to_string(o));
    auto inner_local =
        make_folds(sub, spec.strategy, k_inner, inner_rng, &plan.warnings);
    std::vector<std::vector<std::size_t>> mapped_folds;
    for (const auto& fold : inner_local) {
      std::vector<std::size_t> mapped;
      mapped.reserve(fold.size());
      for (std::size_t r : fold) mapped.push_back(train[r]);
      mapped_folds.push_back(std::move(mapped));
    }
    plan.inner_folds.push_back(std::move(mapped_folds));
  }
  plan.check_invariants(table);
  return plan;
}

void CvPlan::check_invariants(const CaseTable& table) const {
  const std::size_t n = table.n_rows();
  std::vector<std::uint8_t> seen(n, 0);
  for (std::size_t r : phts_indices) seen[r] = 1;
  std::size_t covered = phts_indices.size();
  for (const auto& fold : outer_folds) {
    if (fold.empty()) throw ValidationError("empty outer fold in plan");
    for (std::size_t r : fold) {
      if (seen[r]) {
        throw ValidationError("row " + std::to_string(r) +
                              " appears in PHTS or two outer folds");
      }
      seen[r] = 1;
      ++covered;
    }
  }
  if (covered != n) throw ValidationError("plan does not cover all rows");

  if (strategy == SplitStrategy::TimePlusGroup ||
      strategy == SplitStrategy::GroupOnly) {
    std::map<std::string, std::size_t> group_fold;
    for (std::size_t f = 0; f < outer_folds.size(); ++f) {
      for (std::size_t r : outer_folds[f]) {
        const std::string key = table.group_key(r);
        auto it = group_fold.find(key);
        if (it == group_fold.end()) {
          group_fold.emplace(key, f);
        } else if (it->second != f) {
          throw ValidationError("group '" + key + "' straddles outer folds");
        }
      }
    }
  }
  if (strategy == SplitStrategy::TimeForward) {
    for (const auto& p : pairs_from_folds(outer_folds, strategy)) {
      std::int64_t train_max = std::numeric_limits<std::int64_t>::min();
      std::int64_t eval_min = std::numeric_limits<std::int64_t>::max();
      for (std::size_t r : p.train) train_max = std::max(train_max, table.time_value(r));
      for (std::size_t r : p.eval) eval_min = std::min(eval_min, table.time_value(r));
      if (train_max > eval_min) {
        throw ValidationError("time-forward pair has training after evaluation");
      }
    }
  }
  // The holdout boundary must sit after every development-fold timestamp.
  if (!phts_indices.empty() && !table.time_column.empty()) {
    std::int64_t phts_min = std::numeric_limits<std::int64_t>::max();
    for (std::size_t r : phts_indices) phts_min = std::min(phts_min, table.time_value(r));
    for (const auto& fold : outer_folds) {
      for (std::size_t r : fold) {
        if (table.time_value(r) >= phts_min) {
          throw ValidationError("development row at or after the holdout boundary");
        }
      }
    }
  }
}

std::uint64_t CvPlan::plan_hash() const {
  Hasher h;
  h.add(to_string(strategy));
  h.add_u64(k_outer);
  h.add_u64(k_inner);
  h.add_u64(phts_indices.size());
  for (std::size_t r : phts_indices) h.add_u64(r);
  for (const auto& fold : outer_folds) {
    h.add("fold");
    for (std::size_t r : fold) h.add_u64(r);
  }
  for (const auto& inner : inner_folds) {
    for (const auto& fold : inner) {
      h.add("inner");
      for (std::size_t r : fold) h.add_u64(r);
    }
  }
  return h.digest();
}

std::string CvPlan::to_json_text() const {
  json j;
  j["strategy"] = to_string(strategy);
  j["k_outer"] = k_outer;
  j["k_inner"] = k_inner;
  j["group_keys"] = group_keys;
  j["note"] = note;
  j["plan_hash"] = hex64(plan_hash());
  j["phts_indices"] = phts_indices;
  j["outer_folds"] = outer_folds;
  j["inner_folds"] = inner_folds;
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

CvPlan CvPlan::parse_json_text(const std::string& text) {
  json j = json::parse(text);
  CvPlan plan;
  plan.strategy = split_strategy_from_string(j.at("strategy").get<std::string>());
  plan.k_outer = j.at("k_outer").get<std::size_t>();
  plan.k_inner = j.at("k_inner").get<std::size_t>();
  plan.group_keys = j.value("group_keys", std::vector<std::string>{});
  plan.note = j.value("note", std::string());
  plan.phts_indices = j.at("phts_indices").get<std::vector<std::size_t>>();
  plan.outer_folds =
      j.at("outer_folds").get<std::vector<std::vector<std::size_t>>>();
  plan.inner_folds =
      j.at("inner_folds")
          .get<std::vector<std::vector<std::vector<std::size_t>>>>();
  plan.warnings = j.value("warnings", std::vector<std::string>{});
  return plan;
}

}  // namespace p2pbench
