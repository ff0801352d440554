#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "p2pbench/bench.hpp"
#include "p2pbench/compliance.hpp"
#include "p2pbench/csv.hpp"

namespace {

using p2pbench::CaseTable;
using p2pbench::ExperimentConfig;
using json = nlohmann::ordered_json;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

ExperimentConfig load_config(const std::string& path, std::uint64_t seed_override,
                             bool has_seed) {
  ExperimentConfig cfg =
      path.empty() ? ExperimentConfig::defaults() : ExperimentConfig::load(path);
  if (has_seed) cfg.seed = seed_override;
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw p2pbench::Error("cannot write " + path);
  out << content;
}

p2pbench::RunManifest build_manifest(const ExperimentConfig& cfg,
                                     const p2pbench::AblationReport& report) {
  p2pbench::RunManifest m;
  m.config_hash = report.config_hash;
  m.dataset_hash = report.dataset_hash;
  m.seed = cfg.seed;
  m.component_seeds = {{"global", cfg.seed}, {"generator", cfg.gen.seed}};
  if (cfg.stress_enabled) m.component_seeds.emplace_back("stress", cfg.stress.seed);
  for (const auto& c : report.conditions) {
    m.plan_hashes.emplace_back(c.condition, c.plan_hash);
    m.leaky |= c.leaky;
  }
  return m;
}

int cmd_generate(const std::string& config_path, const std::string& out_prefix,
                 std::uint64_t seed, bool has_seed) {
  p2pbench::GenConfig gen = config_path.empty()
                                ? p2pbench::GenConfig{}
                                : p2pbench::GenConfig::load(config_path);
  if (has_seed) gen.seed = seed;
  gen.validate();
  const CaseTable table = p2pbench::generate_dataset(gen);
  p2pbench::check_label_consistency(table);

  std::filesystem::create_directories(
      std::filesystem::path(out_prefix).parent_path().empty()
          ? "."
          : std::filesystem::path(out_prefix).parent_path().string());
  p2pbench::write_csv(table, out_prefix + ".csv");
  p2pbench::SchemaDescriptor::from_table(table).save(out_prefix + ".schema.json");

  json manifest;
  manifest["seed"] = gen.seed;
  manifest["config_hash"] = p2pbench::hex64(gen.config_hash());
  manifest["content_hash"] = p2pbench::hex64(table.content_hash());
  manifest["n_rows"] = table.n_rows();
  std::size_t positives = 0;
  for (std::uint8_t v : table.labels()) positives += v;
  manifest["n_positive"] = positives;
  manifest["config"] = json::parse(gen.to_json_text());
  write_text(out_prefix + ".manifest.json", manifest.dump(2) + "\n");

  std::cout << "wrote " << out_prefix << ".csv (" << table.n_rows() << " rows, "
            << positives << " positives), content hash "
            << p2pbench::hex64(table.content_hash()) << "\n";
  return 0;
}

int cmd_label(const std::string& csv_path, const std::string& schema_path,
              const std::string& compliance_path, const std::string& out_prefix) {
  const auto schema = p2pbench::SchemaDescriptor::load(schema_path);
  const CaseTable table = p2pbench::read_csv(csv_path, schema);
  const p2pbench::ComplianceConfig cfg =
      compliance_path.empty() ? p2pbench::ComplianceConfig{}
                              : p2pbench::ComplianceConfig::load(compliance_path);
  auto [labeled, summary] = p2pbench::label_table(table, cfg);
  p2pbench::write_csv(labeled, out_prefix + ".csv");
  write_text(out_prefix + ".labels.json", summary.to_json_text());
  std::cout << "labeled " << summary.n_rows << " rows, " << summary.n_positive
            << " positives\n";
  for (const auto& [rule, count] : summary.rule_counts) {
    std::cout << "  " << rule << ": " << count << "\n";
  }
  return 0;
}

int cmd_split(const std::string& config_path, const std::string& out_path,
              std::uint64_t seed, bool has_seed) {
  const ExperimentConfig cfg = load_config(config_path, seed, has_seed);
  const CaseTable data = p2pbench::materialize_dataset(cfg);
  p2pbench::Rng rng(cfg.seed, "cli-split");
  p2pbench::SplitSpec spec{cfg.strategy, cfg.phts_fraction, cfg.seed};
  const p2pbench::CvPlan plan =
      p2pbench::make_cv_plan(data, spec, cfg.k_outer, cfg.k_inner, rng);
  write_text(out_path, plan.to_json_text());
  std::cout << "plan hash " << p2pbench::hex64(plan.plan_hash()) << ", "
            << plan.outer_folds.size() << " outer folds, PHTS "
            << plan.phts_indices.size() << " rows -> " << out_path << "\n";
  return 0;
}

int run_conditions(const ExperimentConfig& cfg,
                   const std::vector<std::string>& only_ids) {
  Timer timer;
  ExperimentConfig scoped = cfg;
  if (!only_ids.empty()) scoped.ablations = only_ids;
  const p2pbench::AblationReport report = p2pbench::run_ablation(scoped);
  p2pbench::RunManifest manifest = build_manifest(scoped, report);
  manifest.wall_clock_seconds.emplace_back("total", timer.seconds());
  p2pbench::emit_reports(report, manifest, scoped.out_dir);

  bool all_ok = true;
  for (const auto& c : report.conditions) {
    std::cout << c.condition << ": " << c.status;
    if (!c.models.empty()) {
      std::cout << " (";
      for (std::size_t i = 0; i < c.models.size(); ++i) {
        const auto& m = c.models[i];
        double mean = 0.0;
        for (const auto& f : m.folds) mean += f.mcc;
        if (!m.folds.empty()) mean /= static_cast<double>(m.folds.size());
        std::cout << (i ? ", " : "") << m.model << " mcc=" << std::fixed
                  << std::setprecision(3) << mean;
      }
      std::cout << ")";
    }
    if (!c.note.empty()) std::cout << " -- " << c.note;
    std::cout << "\n";
    all_ok &= c.status == "ok" || c.status == "substituted" || c.status == "skipped";
  }
  std::cout << "reports in " << scoped.out_dir << ", manifest hash "
            << p2pbench::hex64(manifest.manifest_hash()) << "\n";
  return all_ok ? 0 : 1;
}

int cmd_report(const std::string& results_path, const std::string& out_dir) {
  std::ifstream in(results_path);
  if (!in) throw p2pbench::Error("cannot open " + results_path);
  std::stringstream ss;
  ss << in.rdbuf();
  const json j = json::parse(ss.str());

  // Rebuild the pieces the emitters need from the stored report.
  p2pbench::AblationReport report;
  report.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  report.dataset_hash =
      std::stoull(j.at("dataset_hash").get<std::string>(), nullptr, 16);
  report.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& cj : j.at("conditions")) {
    p2pbench::ConditionResult c;
    c.condition = cj.at("condition").get<std::string>();
    c.status = cj.at("status").get<std::string>();
    c.note = cj.value("note", std::string());
    c.leaky = cj.value("leaky", false);
    if (cj.contains("strategy")) {
      c.strategy =
          p2pbench::split_strategy_from_string(cj["strategy"].get<std::string>());
    }
    if (cj.contains("plan_hash")) {
      c.plan_hash = std::stoull(cj["plan_hash"].get<std::string>(), nullptr, 16);
    }
    if (cj.contains("models")) {
      for (const auto& mj : cj["models"]) {
        p2pbench::ModelConditionResult m;
        m.model = mj.at("model").get<std::string>();
        for (const auto& fj : mj.at("folds")) {
          p2pbench::FoldMetrics f;
          f.mcc = fj.at("mcc").get<double>();
          f.bal_acc = fj.at("bal_acc").get<double>();
          f.auprc = fj.at("auprc").get<double>();
          f.f1 = fj.at("f1").get<double>();
          f.precision = fj.at("precision").get<double>();
          f.recall = fj.at("recall").get<double>();
          f.expected_cost = fj.at("expected_cost").get<double>();
          f.ece = fj.at("ece").get<double>();
          f.roc_auc = fj.at("roc_auc_aux").get<double>();
          f.tau = fj.at("tau").get<double>();
          f.n_eval = fj.at("n_eval").get<std::size_t>();
          m.folds.push_back(f);
        }
        if (mj.value("has_phts", false)) {
          m.has_phts = true;
          const auto& fj = mj.at("phts");
          m.phts.mcc = fj.at("mcc").get<double>();
          m.phts.bal_acc = fj.at("bal_acc").get<double>();
          m.phts.auprc = fj.at("auprc").get<double>();
          m.phts.f1 = fj.at("f1").get<double>();
          m.phts.precision = fj.at("precision").get<double>();
          m.phts.recall = fj.at("recall").get<double>();
          m.phts.expected_cost = fj.at("expected_cost").get<double>();
          m.phts.ece = fj.at("ece").get<double>();
          m.phts.roc_auc = fj.at("roc_auc_aux").get<double>();
          m.phts.tau = fj.at("tau").get<double>();
          m.phts.n_eval = fj.at("n_eval").get<std::size_t>();
          if (mj.contains("phts_calibration")) {
            const auto& pc = mj["phts_calibration"];
            m.phts_calibration.has_platt = pc.value("has_platt", false);
            m.phts_calibration.ece = pc.value("ece", 0.0);
            for (const auto& bj : pc.at("bins")) {
              p2pbench::ReliabilityBin bin;
              bin.mean_predicted = bj.at("mean_predicted").get<double>();
              bin.fraction_positive = bj.at("fraction_positive").get<double>();
              bin.count = bj.at("count").get<std::size_t>();
              m.phts_calibration.bins.push_back(bin);
            }
          }
        }
        c.models.push_back(std::move(m));
      }
    }
    if (cj.contains("comparisons")) {
      for (const auto& pj : cj["comparisons"]) {
        p2pbench::ComparisonRow row;
        row.model_a = pj.at("model_a").get<std::string>();
        row.model_b = pj.at("model_b").get<std::string>();
        row.wilcoxon_p = pj.at("wilcoxon_p").get<double>();
        row.holm_p = pj.at("holm_p").get<double>();
        row.cliffs = pj.at("cliffs_delta").get<double>();
        row.magnitude = pj.at("magnitude").get<std::string>();
        c.comparisons.push_back(std::move(row));
      }
    }
    report.conditions.push_back(std::move(c));
  }
  p2pbench::RunManifest manifest;
  manifest.config_hash = report.config_hash;
  manifest.dataset_hash = report.dataset_hash;
  manifest.seed = report.seed;
  p2pbench::emit_reports(report, manifest, out_dir);
  std::cout << "re-emitted reports to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic benchmark engine for procure-to-pay risk detection"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  bool has_seed = false;
  app.add_option("--config", config_path, "experiment config JSON");
  auto* seed_opt = app.add_option("--seed", seed, "seed override");

  // generate
  auto* generate = app.add_subcommand("generate", "generate a synthetic dataset");
  std::string gen_config, gen_out = "dataset";
  generate->add_option("--gen-config", gen_config, "generator config JSON");
  generate->add_option("--out", gen_out, "output prefix");

  // label
  auto* label = app.add_subcommand("label", "derive compliance labels for a CSV");
  std::string label_csv, label_schema, label_compliance, label_out = "labeled";
  label->add_option("--csv", label_csv, "input CSV")->required();
  label->add_option("--schema", label_schema, "schema descriptor JSON")->required();
  label->add_option("--compliance", label_compliance, "compliance config JSON");
  label->add_option("--out", label_out, "output prefix");

  // split
  auto* split = app.add_subcommand("split", "materialize a nested CV plan");
  std::string split_out = "cvplan.json";
  split->add_option("--out", split_out, "plan output path");

  // run
  auto* run = app.add_subcommand("run", "run the configured conditions once");
  std::vector<std::string> run_conditions_list;
  run->add_option("--conditions", run_conditions_list,
                  "condition ids to run (default: config list)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the A0..A8 ablation matrix");

  // report
  auto* report_cmd = app.add_subcommand("report", "re-emit reports from results.json");
  std::string report_results = "out/results.json", report_out = "out";
  report_cmd->add_option("--results", report_results, "results.json path");
  report_cmd->add_option("--out", report_out, "output directory");

  // leak-demo
  auto* leak = app.add_subcommand("leak-demo",
                                  "resampling-before-split demonstration");
  bool acknowledge = false;
  std::string leak_out = "leak_demo.json";
  leak->add_flag("--acknowledge-leaky", acknowledge,
                 "confirm the run is intentionally leaky");
  leak->add_option("--out", leak_out, "result JSON path");

  CLI11_PARSE(app, argc, argv);
  has_seed = seed_opt->count() > 0;

  try {
    if (generate->parsed()) return cmd_generate(gen_config, gen_out, seed, has_seed);
    if (label->parsed()) {
      return cmd_label(label_csv, label_schema, label_compliance, label_out);
    }
    if (split->parsed()) return cmd_split(config_path, split_out, seed, has_seed);
    if (run->parsed()) {
      const ExperimentConfig cfg = load_config(config_path, seed, has_seed);
      return run_conditions(cfg, run_conditions_list);
    }
    if (ablate->parsed()) {
      const ExperimentConfig cfg = load_config(config_path, seed, has_seed);
      return run_conditions(cfg, {});
    }
    if (report_cmd->parsed()) return cmd_report(report_results, report_out);
    if (leak->parsed()) {
      const ExperimentConfig cfg = load_config(config_path, seed, has_seed);
      const CaseTable data = p2pbench::materialize_dataset(cfg);
      const auto result = p2pbench::run_leak_demo(data, cfg, acknowledge);
      write_text(leak_out, result.to_json_text());
      std::cout << "safe CV AUPRC " << result.safe_cv_auprc << ", leaky CV AUPRC "
                << result.leaky_cv_auprc << ", holdout AUPRC " << result.phts_auprc
                << " -> " << leak_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
