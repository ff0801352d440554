#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "p2pbench/bench.hpp"
#include "test_util.hpp"

using namespace p2pbench;

namespace {

// Small, fast experiment: two light models, tiny data.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.gen.n_cases = 1200;
  cfg.gen.n_vendors = 40;
  cfg.gen.n_users = 20;
  cfg.gen.risk_rate = 0.05;
  cfg.stages.selector = SelectorKind::MIFilter;
  cfg.stages.mi_top_q = 0.3;
  cfg.stages.resampler = ResamplerKind::Smote;
  cfg.models.clear();
  ModelSpec lr = default_spec(ModelFamily::LogReg);
  lr.max_iter = 300;
  ModelSpec dt = default_spec(ModelFamily::DecisionTree);
  cfg.models = {lr, dt};
  cfg.ablations = {"A0", "A1"};
  cfg.explain_stability = true;
  cfg.explain_sample = 50;
  return cfg;
}

}  // namespace

TEST_CASE("experiment configs round-trip through json") {
  const ExperimentConfig cfg = ExperimentConfig::defaults();
  const ExperimentConfig back = ExperimentConfig::parse_json_text(cfg.to_json_text());
  CHECK(back.to_json_text() == cfg.to_json_text());
  CHECK(back.config_hash() == cfg.config_hash());
  CHECK(back.models.size() == 5);
}

TEST_CASE("config validation rejects malformed ablation lists") {
  ExperimentConfig cfg = tiny_config();
  cfg.ablations = {"A9"};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.ablations = {"A0"};
  cfg.a3_mode = "other";
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("loguniform sampling is uniform on the log scale") {
  // Kolmogorov-Smirnov against U(log lo, log hi) at n = 10,000.
  Rng rng(20260301, "ks");
  const double lo = 1e-4, hi = 1e2;
  const std::size_t n = 10000;
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = sample_loguniform(rng, lo, hi);
    CHECK(v >= lo);
    CHECK(v <= hi);
    u[i] = (std::log(v) - std::log(lo)) / (std::log(hi) - std::log(lo));
  }
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ecdf_hi = static_cast<double>(i + 1) / static_cast<double>(n);
    const double ecdf_lo = static_cast<double>(i) / static_cast<double>(n);
    ks = std::max(ks, std::max(std::abs(ecdf_hi - u[i]), std::abs(u[i] - ecdf_lo)));
  }
  // 1.63 / sqrt(n) is the 1% critical value.
  CHECK(ks < 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sampled specs stay inside the declared bounds") {
  Rng rng(77, "bounds");
  for (ModelFamily family :
       {ModelFamily::LogReg, ModelFamily::RandomForest, ModelFamily::Gbt,
        ModelFamily::Ebm, ModelFamily::DecisionTree}) {
    for (int i = 0; i < 50; ++i) {
      CHECK_NOTHROW(sample_model_spec(family, rng).validate());
    }
  }
}

TEST_CASE("a single-point space returns its point regardless of budget") {
  // The stacking space is degenerate: nothing is drawn.
  Rng r1(1, "one"), r2(2, "two");
  const ModelSpec a = sample_model_spec(ModelFamily::Stacking, r1);
  const ModelSpec b = sample_model_spec(ModelFamily::Stacking, r2);
  CHECK(a.to_json_text() == b.to_json_text());
}

TEST_CASE("random search scores trials by inner mcc and keeps a full log") {
  GenConfig gen;
  gen.n_cases = 900;
  gen.n_vendors = 30;
  gen.n_users = 15;
  gen.risk_rate = 0.06;
  const CaseTable data = sort_by_time(generate_dataset(gen));
  SplitSpec spec{SplitStrategy::TimePlusGroup, 0.2, 11};
  Rng plan_rng(11, "plan");
  const CvPlan plan = make_cv_plan(data, spec, 3, 3, plan_rng);
  const auto pairs = plan.outer_pairs();
  const CaseTable outer_train = data.take_rows(pairs[0].train);

  // Localize inner folds of outer pair 0 to the outer-train table.
  std::vector<CvPlan::EvalPair> inner;
  {
    std::map<std::size_t, std::size_t> local;
    for (std::size_t i = 0; i < pairs[0].train.size(); ++i) {
      local[pairs[0].train[i]] = i;
    }
    for (const auto& p : plan.inner_pairs(0)) {
      CvPlan::EvalPair lp;
      for (std::size_t r : p.train) lp.train.push_back(local.at(r));
      for (std::size_t r : p.eval) lp.eval.push_back(local.at(r));
      inner.push_back(std::move(lp));
    }
  }

  StageSpec stages;
  stages.selector = SelectorKind::MIFilter;
  stages.mi_top_q = 0.3;
  Rng rng(12, "search");
  const SearchResult result =
      random_search(ModelFamily::DecisionTree, 5, outer_train, inner, stages, rng);
  CHECK(result.trials.size() == 5);  // budget accounting
  double best = -2.0;
  for (const auto& t : result.trials) {
    if (!t.failed) best = std::max(best, t.mean_inner_mcc);
  }
  bool found = false;
  for (const auto& t : result.trials) {
    if (!t.failed && t.mean_inner_mcc == best) {
      found = found || t.spec.to_json_text() == result.best.to_json_text();
      break;  // earlier trial wins ties
    }
  }
  CHECK(found);
}

TEST_CASE("run_condition produces per-fold metrics and comparisons") {
  ExperimentConfig cfg = tiny_config();
  const CaseTable data = materialize_dataset(cfg);
  ConditionSettings cs;
  cs.name = "unit";
  cs.strategy = SplitStrategy::TimePlusGroup;
  cs.stages = cfg.stages;
  cs.platt = true;
  cs.cost_optimal_threshold = true;
  const ConditionResult r = run_condition(data, cs, cfg);
  REQUIRE(r.models.size() == 2);
  for (const auto& m : r.models) {
    CHECK(m.folds.size() == cfg.k_outer);
    CHECK(m.has_phts);
    for (const auto& f : m.folds) {
      CHECK(f.tau == doctest::Approx(cfg.cost.optimal_threshold()));
      CHECK(f.auprc > 0.0);
      CHECK(f.n_eval > 0);
    }
  }
  REQUIRE(r.comparisons.size() == 1);
  CHECK(r.comparisons[0].holm_p >= r.comparisons[0].wilcoxon_p);
  CHECK(r.threshold_policy == "cost_optimal");
}

TEST_CASE("ablation reports are deterministic byte for byte") {
  ExperimentConfig cfg = tiny_config();
  cfg.explain_stability = false;  // keep the double run fast
  const AblationReport a = run_ablation(cfg);
  const AblationReport b = run_ablation(cfg);
  CHECK(a.to_json_text() == b.to_json_text());
  CHECK(a.dataset_hash == b.dataset_hash);
}

TEST_CASE("the ablation matrix carries substituted and failed conditions") {
  ExperimentConfig cfg = tiny_config();
  cfg.explain_stability = false;
  cfg.ablations = {"A0", "A3"};
  const AblationReport report = run_ablation(cfg);
  REQUIRE(report.conditions.size() == 2);
  CHECK(report.conditions[0].status == "ok");
  CHECK(report.conditions[1].status == "substituted");
  CHECK(report.conditions[1].note.find("smote") != std::string::npos);

  ExperimentConfig skip = cfg;
  skip.a3_mode = "skip";
  const AblationReport skipped = run_ablation(skip);
  CHECK(skipped.conditions[1].status == "skipped");
  CHECK(skipped.conditions[1].models.empty());
}

TEST_CASE("emitted report files embed the manifest hash") {
  ExperimentConfig cfg = tiny_config();
  cfg.explain_stability = false;
  cfg.ablations = {"A0"};
  const AblationReport report = run_ablation(cfg);
  RunManifest manifest;
  manifest.config_hash = report.config_hash;
  manifest.dataset_hash = report.dataset_hash;
  manifest.seed = cfg.seed;
  manifest.plan_hashes.emplace_back("A0", report.conditions[0].plan_hash);

  const std::string dir =
      (std::filesystem::temp_directory_path() / "p2p_report_test").string();
  std::filesystem::remove_all(dir);
  emit_reports(report, manifest, dir);

  const std::string mh = hex64(manifest.manifest_hash());
  for (const char* name : {"results.json", "metrics.csv", "summary.md",
                           "reliability_bins.csv", "stability.csv",
                           "manifest.json"}) {
    const std::string text = testutil::read_file(dir + "/" + std::string(name));
    CHECK(text.find(mh) != std::string::npos);
  }
  // One row per (dataset, model, condition, fold) plus holdout rows.
  const std::string csv = testutil::read_file(dir + "/metrics.csv");
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 2 + 2 * (cfg.k_outer + 1));  // header+comment, 2 models
  std::filesystem::remove_all(dir);
}

TEST_CASE("the leak demo refuses to run unacknowledged and flags its output") {
  ExperimentConfig cfg = tiny_config();
  cfg.strategy = SplitStrategy::RandomStratified;
  cfg.models = {default_spec(ModelFamily::DecisionTree)};
  const CaseTable data = materialize_dataset(cfg);
  CHECK_THROWS_AS(run_leak_demo(data, cfg, false), ValidationError);

  const LeakDemoResult r = run_leak_demo(data, cfg, true);
  CHECK(r.leaky);
  const auto j = nlohmann::json::parse(r.to_json_text());
  CHECK(j.at("leaky").get<bool>());
  CHECK(r.safe_fold_auprc.size() == cfg.k_outer);
}

TEST_CASE("without a resampler the safe and leaky paths coincide exactly") {
  ExperimentConfig cfg = tiny_config();
  cfg.strategy = SplitStrategy::RandomStratified;
  cfg.stages.resampler = ResamplerKind::None;
  cfg.models = {default_spec(ModelFamily::DecisionTree)};
  const CaseTable data = materialize_dataset(cfg);
  const LeakDemoResult r = run_leak_demo(data, cfg, true);
  for (std::size_t f = 0; f < r.safe_fold_auprc.size(); ++f) {
    CHECK(r.safe_fold_auprc[f] == r.leaky_fold_auprc[f]);
  }
}

TEST_CASE("the leak sentinel passes on every non-leaky condition") {
  ExperimentConfig cfg = tiny_config();
  const CaseTable data = materialize_dataset(cfg);
  for (const char* id : {"A0", "A2"}) {
    ConditionSettings cs;
    cs.name = id;
    cs.stages = cfg.stages;
    if (std::string(id) == "A0") {
      cs.stages.selector = SelectorKind::None;
      cs.stages.resampler = ResamplerKind::None;
    }
    std::string detail;
    CHECK(leak_sentinel_check(data, cs, cfg, &detail));
  }
}
