#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "p2pbench/calibration.hpp"
#include "p2pbench/explain.hpp"
#include "p2pbench/metrics.hpp"
#include "p2pbench/model.hpp"
#include "p2pbench/pipeline.hpp"
#include "p2pbench/split.hpp"
#include "p2pbench/stats.hpp"
#include "p2pbench/synth.hpp"

namespace p2pbench {

struct ExperimentConfig {
  // Dataset: generate from GenConfig, or ingest a canonical-schema CSV.
  bool generate = true;
  GenConfig gen;
  std::string csv_path;
  std::string schema_path;
  bool stress_enabled = false;
  StressConfig stress;

  SplitStrategy strategy = SplitStrategy::TimePlusGroup;
  double phts_fraction = 0.20;
  std::size_t k_outer = 5;
  std::size_t k_inner = 3;

  StageSpec stages;
  std::vector<ModelSpec> models;
  bool hpo_enabled = false;
  std::size_t hpo_budget = 100;
  std::size_t patience = 50;

  CostModel cost;
  std::vector<std::string> ablations = {"A0", "A1", "A2", "A3", "A4",
                                        "A5", "A6", "A7", "A8"};
  std::string a3_mode = "substitute";  // or "skip"
  std::uint64_t seed = 20260301;
  std::string out_dir = "out";
  bool leak_check = false;
  bool explain_stability = true;
  std::size_t explain_sample = 200;

  static ExperimentConfig defaults();
  void validate() const;
  std::string to_json_text() const;
  static ExperimentConfig parse_json_text(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::uint64_t config_hash() const;
};

// Desk-scale default model portfolio (within the declared search bounds).
std::vector<ModelSpec> default_model_suite();
ModelSpec default_spec(ModelFamily family);

// Random-search HPO over the per-family spaces.
double sample_loguniform(Rng& rng, double lo, double hi);
ModelSpec sample_model_spec(ModelFamily family, Rng& rng);

struct TrialRecord {
  ModelSpec spec;
  double mean_inner_mcc = 0.0;
  bool failed = false;
  std::string error;
};

struct SearchResult {
  ModelSpec best;
  std::vector<TrialRecord> trials;
};

// Draws `budget` specs, scores each by leakage-safe inner CV (mean MCC at
// tau 0.5), returns the argmax with ties going to the earlier trial.
// Failed trials stay in the log; throws if every trial failed.
SearchResult random_search(ModelFamily family, std::size_t budget,
                           const CaseTable& outer_train,
                           const std::vector<CvPlan::EvalPair>& inner_pairs,
                           const StageSpec& stages, Rng& rng);

struct FoldMetrics {
  double mcc = 0.0;
  double bal_acc = 0.0;
  double auprc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double expected_cost = 0.0;
  double ece = 0.0;
  double roc_auc = 0.0;
  double tau = 0.5;
  std::size_t n_eval = 0;
};

struct ModelConditionResult {
  std::string model;
  std::vector<FoldMetrics> folds;
  std::vector<double> phts_raw_scores;  // kept out of reports
  FoldMetrics phts;
  bool has_phts = false;
  CalibrationReport phts_calibration;
};

struct ComparisonRow {
  std::string model_a;
  std::string model_b;
  double wilcoxon_p = 1.0;
  double holm_p = 1.0;
  double cliffs = 0.0;
  std::string magnitude;
};

struct ConditionResult {
  std::string condition;
  std::string status = "ok";  // ok | substituted | skipped | failed
  std::string note;
  bool leaky = false;
  SplitStrategy strategy = SplitStrategy::TimePlusGroup;
  StageSpec stages;
  bool platt = false;
  std::string threshold_policy = "fixed_0.5";
  std::uint64_t plan_hash = 0;
  std::vector<ModelConditionResult> models;
  std::vector<ComparisonRow> comparisons;
  std::vector<std::pair<std::string, StabilityReport>> stability;
  bool leak_guard_passed = false;
  bool leak_guard_ran = false;
};

struct AblationReport {
  std::uint64_t config_hash = 0;
  std::uint64_t dataset_hash = 0;
  std::uint64_t seed = 0;
  std::vector<ConditionResult> conditions;
  std::string to_json_text() const;  // deterministic, excludes wall clock
};

// Dataset materialization per the config (generate or CSV ingest, plus
// optional stress), sorted by time.
CaseTable materialize_dataset(const ExperimentConfig& config);

// One experimental condition end to end: nested plan, per-fold leakage-
// safe training, holdout scoring, metrics.
struct ConditionSettings {
  std::string name = "run";
  SplitStrategy strategy = SplitStrategy::TimePlusGroup;
  StageSpec stages;
  bool platt = false;
  bool cost_optimal_threshold = false;
  bool compute_stability = false;
};

ConditionResult run_condition(const CaseTable& data, const ConditionSettings& cs,
                              const ExperimentConfig& config);

// The A0..A8 matrix; failures mark the condition and continue.
AblationReport run_ablation(const ExperimentConfig& config);

// Deliberately leaky resampling demonstration: identical to the safe path
// except the resampler sees evaluation rows and its synthetic output lands
// in training. Refuses to run without the acknowledge flag.
struct LeakDemoResult {
  std::vector<double> safe_fold_auprc;
  std::vector<double> leaky_fold_auprc;
  double safe_cv_auprc = 0.0;
  double leaky_cv_auprc = 0.0;
  double phts_auprc = 0.0;  // holdout protocol is identical for both paths
  bool leaky = true;
  std::string model;
  std::string to_json_text() const;
};

LeakDemoResult run_leak_demo(const CaseTable& data, const ExperimentConfig& config,
                             bool acknowledge_leaky);

// Sentinel poisoning: refit every fitted statistic of a condition with the
// evaluation rows garbled and compare fingerprints. True means nothing
// fitted depends on evaluation rows.
bool leak_sentinel_check(const CaseTable& data, const ConditionSettings& cs,
                         const ExperimentConfig& config, std::string* detail);

struct RunManifest {
  std::uint64_t config_hash = 0;
  std::uint64_t dataset_hash = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::uint64_t>> component_seeds;
  std::vector<std::pair<std::string, std::uint64_t>> plan_hashes;
  bool leaky = false;
  std::string software = "p2pbench 0.1.0";
  std::vector<std::pair<std::string, double>> wall_clock_seconds;  // not hashed
  std::uint64_t manifest_hash() const;  // over the deterministic core
  std::string to_json_text() const;
};

// Files: results.json, metrics.csv, summary.md, reliability_bins.csv,
// stability.csv, manifest.json, plan_<condition>.json. Every file header
// carries the manifest hash.
void emit_reports(const AblationReport& report, const RunManifest& manifest,
                  const std::string& out_dir);

}  // namespace p2pbench
