#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "p2pbench/split.hpp"
#include "p2pbench/synth.hpp"
#include "test_util.hpp"

using namespace p2pbench;

TEST_CASE("phts takes the final fraction by time") {
  std::vector<double> x(10, 0.0);
  std::vector<std::uint8_t> y(10, 0);
  std::vector<std::int64_t> ts;
  for (int i = 1; i <= 10; ++i) ts.push_back(i);
  const auto t = testutil::tiny_table(x, y, ts);
  const auto [train, phts] = make_phts(t, 0.2);
  CHECK(phts.size() == 2);
  std::set<std::int64_t> phts_times;
  for (std::size_t r : phts) phts_times.insert(t.time_value(r));
  CHECK(phts_times == std::set<std::int64_t>{9, 10});
  CHECK(train.size() == 8);
}

TEST_CASE("a tied boundary timestamp moves wholesale into the holdout") {
  const auto t = testutil::tiny_table({1, 1, 1, 1, 1}, {0, 0, 0, 0, 0},
                                      {1, 1, 1, 1, 2});
  const auto [train, phts] = make_phts(t, 0.2);
  CHECK(phts.size() == 1);
  CHECK(t.time_value(phts[0]) == 2);

  const auto tied = testutil::tiny_table({1, 1, 1, 1, 1}, {0, 0, 0, 0, 0},
                                         {1, 1, 2, 2, 3});
  const auto [train2, phts2] = make_phts(tied, 0.4);
  // ceil(0.4*5)=2 targets {2,3}; the tied 2-block joins the holdout whole.
  CHECK(phts2.size() == 3);
}

TEST_CASE("degenerate time columns are rejected") {
  const auto all_equal =
      testutil::tiny_table({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}, {7, 7, 7, 7, 7});
  CHECK_THROWS_AS(make_phts(all_equal, 0.2), ValidationError);
  const auto tiny = testutil::tiny_table({1, 2}, {0, 0}, {1, 2});
  CHECK_THROWS_AS(make_phts(tiny, 0.2), ValidationError);
}

TEST_CASE("group-only folds keep groups whole") {
  const auto t = testutil::tiny_table({1, 2, 3, 4, 5, 6}, {1, 0, 1, 0, 1, 0},
                                      {1, 2, 3, 4, 5, 6},
                                      {"a", "a", "b", "b", "c", "c"});
  Rng rng(1);
  const auto folds = make_folds(t, SplitStrategy::GroupOnly, 3, rng);
  REQUIRE(folds.size() == 3);
  for (const auto& f : folds) {
    REQUIRE(f.size() == 2);
    CHECK(t.group_key(f[0]) == t.group_key(f[1]));
  }
}

TEST_CASE("random stratified folds balance positives exactly") {
  std::vector<double> x(100);
  std::vector<std::uint8_t> y(100, 0);
  std::vector<std::int64_t> ts(100);
  for (int i = 0; i < 100; ++i) {
    x[i] = i;
    ts[i] = i;
    y[i] = i < 10 ? 1 : 0;
  }
  const auto t = testutil::tiny_table(x, y, ts);
  Rng rng(5);
  const auto folds = make_folds(t, SplitStrategy::RandomStratified, 5, rng);
  for (const auto& f : folds) {
    std::size_t pos = 0;
    for (std::size_t r : f) pos += y[r];
    CHECK(pos == 2);
    CHECK(f.size() == 20);
  }
}

TEST_CASE("time-forward folds are contiguous blocks") {
  std::vector<double> x(100);
  std::vector<std::uint8_t> y(100);
  std::vector<std::int64_t> ts(100);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    x[i] = i;
    ts[i] = i + 1;  // times 1..100
    y[i] = (i % 10) == 0 ? 1 : 0;
  }
  const auto t = testutil::tiny_table(x, y, ts);
  Rng rng2(3);
  const auto folds = make_folds(t, SplitStrategy::TimeForward, 5, rng2);
  for (std::size_t f = 0; f < 5; ++f) {
    for (std::size_t r : folds[f]) {
      const std::int64_t time = t.time_value(r);
      CHECK(time > static_cast<std::int64_t>(20 * f));
      CHECK(time <= static_cast<std::int64_t>(20 * (f + 1)));
    }
  }
}

TEST_CASE("a fold with zero positives is an infeasibility error") {
  // 3 positives cannot stratify into 4 folds.
  std::vector<double> x(40);
  std::vector<std::uint8_t> y(40, 0);
  std::vector<std::int64_t> ts(40);
  for (int i = 0; i < 40; ++i) {
    x[i] = i;
    ts[i] = i;
  }
  y[0] = y[1] = y[2] = 1;
  const auto t = testutil::tiny_table(x, y, ts);
  Rng rng(7);
  CHECK_THROWS_AS(make_folds(t, SplitStrategy::RandomStratified, 4, rng),
                  InfeasibleStratificationError);
}

TEST_CASE("nested plans on synthetic data satisfy every invariant") {
  GenConfig gen;
  gen.n_cases = 1000;
  gen.n_vendors = 40;
  gen.n_users = 20;
  gen.risk_rate = 0.05;
  const CaseTable data = sort_by_time(generate_dataset(gen));

  for (SplitStrategy strategy :
       {SplitStrategy::TimePlusGroup, SplitStrategy::RandomStratified,
        SplitStrategy::GroupOnly, SplitStrategy::TimeForward}) {
    CAPTURE(to_string(strategy));
    SplitSpec spec{strategy, 0.2, 20260301};
    Rng rng(spec.seed, "plan");
    const CvPlan plan = make_cv_plan(data, spec, 5, 3, rng);
    plan.check_invariants(data);  // disjoint, covering, group purity, time
    CHECK(plan.outer_folds.size() == 5);
    for (const auto& inner : plan.inner_folds) CHECK(inner.size() == 3);

    // PHTS rows appear in no fold.
    std::set<std::size_t> phts(plan.phts_indices.begin(), plan.phts_indices.end());
    for (const auto& fold : plan.outer_folds) {
      for (std::size_t r : fold) CHECK(!phts.count(r));
    }

    // Inner folds partition their outer-train universe.
    const auto pairs = plan.outer_pairs();
    for (std::size_t o = 0; o < pairs.size(); ++o) {
      std::set<std::size_t> train(pairs[o].train.begin(), pairs[o].train.end());
      std::size_t covered = 0;
      for (const auto& fold : plan.inner_folds[o]) {
        for (std::size_t r : fold) {
          CHECK(train.count(r));
          ++covered;
        }
      }
      CHECK(covered == train.size());
    }
  }
}

TEST_CASE("plans are deterministic under a fixed seed") {
  GenConfig gen;
  gen.n_cases = 800;
  gen.n_vendors = 30;
  gen.n_users = 15;
  gen.risk_rate = 0.05;
  const CaseTable data = sort_by_time(generate_dataset(gen));
  SplitSpec spec{SplitStrategy::TimePlusGroup, 0.2, 77};
  Rng r1(spec.seed, "plan");
  Rng r2(spec.seed, "plan");
  const CvPlan a = make_cv_plan(data, spec, 5, 3, r1);
  const CvPlan b = make_cv_plan(data, spec, 5, 3, r2);
  CHECK(a.plan_hash() == b.plan_hash());
  CHECK(a.to_json_text() == b.to_json_text());

  const CvPlan parsed = CvPlan::parse_json_text(a.to_json_text());
  CHECK(parsed.plan_hash() == a.plan_hash());
}

TEST_CASE("random stratified splitting lets groups straddle folds") {
  GenConfig gen;
  gen.n_cases = 1000;
  gen.n_vendors = 20;  // few vendors, many rows each
  gen.n_users = 10;
  gen.risk_rate = 0.05;
  const CaseTable data = sort_by_time(generate_dataset(gen));
  SplitSpec spec{SplitStrategy::RandomStratified, 0.2, 20260301};
  Rng rng(spec.seed, "plan");
  const CvPlan plan = make_cv_plan(data, spec, 5, 3, rng);
  std::map<std::string, std::set<std::size_t>> folds_of_group;
  for (std::size_t f = 0; f < plan.outer_folds.size(); ++f) {
    for (std::size_t r : plan.outer_folds[f]) {
      folds_of_group[data.group_key(r)].insert(f);
    }
  }
  bool any_straddle = false;
  for (const auto& [g, folds] : folds_of_group) any_straddle |= folds.size() > 1;
  CHECK(any_straddle);
}

TEST_CASE("time-forward outer pairs are expanding windows") {
  std::vector<double> x(200);
  std::vector<std::uint8_t> y(200);
  std::vector<std::int64_t> ts(200);
  for (int i = 0; i < 200; ++i) {
    x[i] = i;
    ts[i] = i;
    y[i] = (i % 7) == 0;
  }
  const auto t = testutil::tiny_table(x, y, ts);
  SplitSpec spec{SplitStrategy::TimeForward, 0.2, 1};
  Rng rng(1, "plan");
  const CvPlan plan = make_cv_plan(t, spec, 5, 2, rng);
  const auto pairs = plan.outer_pairs();
  CHECK(pairs.size() == 4);  // fold 0 is never evaluated
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::int64_t train_max = -1, eval_min = 1 << 30;
    for (std::size_t r : pairs[i].train) {
      train_max = std::max(train_max, t.time_value(r));
    }
    for (std::size_t r : pairs[i].eval) {
      eval_min = std::min<std::int64_t>(eval_min, t.time_value(r));
    }
    CHECK(train_max < eval_min);
    if (i > 0) CHECK(pairs[i].train.size() > pairs[i - 1].train.size());
  }
}

TEST_CASE("oversized groups are assigned with a warning") {
  // One group holds half the rows.
  std::vector<double> x(40);
  std::vector<std::uint8_t> y(40);
  std::vector<std::int64_t> ts(40);
  std::vector<std::string> g(40);
  for (int i = 0; i < 40; ++i) {
    x[i] = i;
    ts[i] = i;
    y[i] = (i % 5) == 0;
    g[i] = i < 21 ? "big" : "g" + std::to_string(i);
  }
  const auto t = testutil::tiny_table(x, y, ts, g);
  Rng rng(2);
  std::vector<std::string> warnings;
  const auto folds = make_folds(t, SplitStrategy::GroupOnly, 2, rng, &warnings);
  CHECK(folds.size() == 2);
  REQUIRE(!warnings.empty());
  CHECK(warnings[0].find("big") != std::string::npos);
}
