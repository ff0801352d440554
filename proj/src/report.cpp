#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "p2pbench/bench.hpp"

namespace p2pbench {

namespace {

using json = nlohmann::ordered_json;

json fold_metrics_to_json(const FoldMetrics& m) {
  json j;
  j["mcc"] = m.mcc;
  j["bal_acc"] = m.bal_acc;
  j["auprc"] = m.auprc;
  j["f1"] = m.f1;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["expected_cost"] = m.expected_cost;
  j["ece"] = m.ece;
  j["roc_auc_aux"] = m.roc_auc;
  j["tau"] = m.tau;
  j["n_eval"] = m.n_eval;
  return j;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report file: " + path);
  out << content;
  if (!out) throw Error("I/O error writing report file: " + path);
}

}  // namespace

std::string AblationReport::to_json_text() const {
  json j;
  j["report"] = "ablation";
  j["config_hash"] = hex64(config_hash);
  j["dataset_hash"] = hex64(dataset_hash);
  j["seed"] = seed;
  j["conditions"] = json::array();
  for (const auto& c : conditions) {
    json cj;
    cj["condition"] = c.condition;
    cj["status"] = c.status;
    cj["note"] = c.note;
    cj["leaky"] = c.leaky;
    cj["strategy"] = to_string(c.strategy);
    cj["stages"] = json::parse(c.stages.to_json_text());
    cj["platt"] = c.platt;
    cj["threshold_policy"] = c.threshold_policy;
    cj["plan_hash"] = hex64(c.plan_hash);
    cj["leak_guard_ran"] = c.leak_guard_ran;
    cj["leak_guard_passed"] = c.leak_guard_passed;
    cj["models"] = json::array();
    for (const auto& m : c.models) {
      json mj;
      mj["model"] = m.model;
      mj["folds"] = json::array();
      for (const auto& f : m.folds) mj["folds"].push_back(fold_metrics_to_json(f));
      mj["has_phts"] = m.has_phts;
      if (m.has_phts) {
        mj["phts"] = fold_metrics_to_json(m.phts);
        mj["phts_calibration"] = json::parse(m.phts_calibration.to_json_text());
      }
      cj["models"].push_back(std::move(mj));
    }
    cj["comparisons"] = json::array();
    for (const auto& cmp : c.comparisons) {
      cj["comparisons"].push_back({{"model_a", cmp.model_a},
                                   {"model_b", cmp.model_b},
                                   {"wilcoxon_p", cmp.wilcoxon_p},
                                   {"holm_p", cmp.holm_p},
                                   {"cliffs_delta", cmp.cliffs},
                                   {"magnitude", cmp.magnitude}});
    }
    cj["stability"] = json::array();
    for (const auto& [model, rep] : c.stability) {
      json sj;
      sj["model"] = model;
      sj["k"] = rep.k;
      sj["mean_rho"] = rep.mean_rho;
      sj["top_features"] = rep.top_features;
      json rows = json::array();
      for (std::size_t f = 0; f < rep.rho.rows; ++f) {
        json row = json::array();
        for (std::size_t g = 0; g < rep.rho.cols; ++g) row.push_back(rep.rho.at(f, g));
        rows.push_back(std::move(row));
      }
      sj["rho"] = std::move(rows);
      cj["stability"].push_back(std::move(sj));
    }
    j["conditions"].push_back(std::move(cj));
  }
  return j.dump(2) + "\n";
}

std::uint64_t RunManifest::manifest_hash() const {
  Hasher h;
  h.add_u64(config_hash);
  h.add_u64(dataset_hash);
  h.add_u64(seed);
  for (const auto& [name, value] : component_seeds) {
    h.add(name);
    h.add_u64(value);
  }
  for (const auto& [name, value] : plan_hashes) {
    h.add(name);
    h.add_u64(value);
  }
  h.add_u64(leaky ? 1 : 0);
  h.add(software);
  return h.digest();
}

std::string RunManifest::to_json_text() const {
  json j;
  j["manifest_hash"] = hex64(manifest_hash());
  j["config_hash"] = hex64(config_hash);
  j["dataset_hash"] = hex64(dataset_hash);
  j["seed"] = seed;
  j["component_seeds"] = json::object();
  for (const auto& [name, value] : component_seeds) {
    j["component_seeds"][name] = value;
  }
  j["plan_hashes"] = json::object();
  for (const auto& [name, value] : plan_hashes) {
    j["plan_hashes"][name] = hex64(value);
  }
  j["leaky"] = leaky;
  j["software"] = software;
  // Wall clock is informational only and excluded from the hash.
  j["wall_clock_seconds"] = json::object();
  for (const auto& [name, value] : wall_clock_seconds) {
    j["wall_clock_seconds"][name] = value;
  }
  return j.dump(2) + "\n";
}

void emit_reports(const AblationReport& report, const RunManifest& manifest,
                  const std::string& out_dir) {
  if (report.conditions.empty()) throw ValidationError("emit_reports: no results");
  std::filesystem::create_directories(out_dir);
  const std::string mh = hex64(manifest.manifest_hash());

  // Full JSON report.
  {
    json j = json::parse(report.to_json_text());
    j["manifest_hash"] = mh;
    write_file(out_dir + "/results.json", j.dump(2) + "\n");
  }
  write_file(out_dir + "/manifest.json", manifest.to_json_text());

  // Per-fold metrics, one row per (dataset, model, condition, fold).
  {
    std::ostringstream os;
    os << "# manifest_hash=" << mh << "\n";
    os << "dataset,model,condition,fold,mcc,bal_acc,auprc,f1,precision,recall,"
          "expected_cost,ece,roc_auc_aux,tau,n_eval\n";
    const std::string dataset = hex64(report.dataset_hash);
    for (const auto& c : report.conditions) {
      for (const auto& m : c.models) {
        for (std::size_t f = 0; f < m.folds.size(); ++f) {
          const auto& fm = m.folds[f];
          os << dataset << ',' << m.model << ',' << c.condition << ',' << f << ','
             << format_double(fm.mcc) << ',' << format_double(fm.bal_acc) << ','
             << format_double(fm.auprc) << ',' << format_double(fm.f1) << ','
             << format_double(fm.precision) << ',' << format_double(fm.recall)
             << ',' << format_double(fm.expected_cost) << ','
             << format_double(fm.ece) << ',' << format_double(fm.roc_auc) << ','
             << format_double(fm.tau) << ',' << fm.n_eval << "\n";
        }
        if (m.has_phts) {
          const auto& fm = m.phts;
          os << dataset << ',' << m.model << ',' << c.condition << ",phts,"
             << format_double(fm.mcc) << ',' << format_double(fm.bal_acc) << ','
             << format_double(fm.auprc) << ',' << format_double(fm.f1) << ','
             << format_double(fm.precision) << ',' << format_double(fm.recall)
             << ',' << format_double(fm.expected_cost) << ','
             << format_double(fm.ece) << ',' << format_double(fm.roc_auc) << ','
             << format_double(fm.tau) << ',' << fm.n_eval << "\n";
        }
      }
    }
    write_file(out_dir + "/metrics.csv", os.str());
  }

  // Markdown summary: mean +/- std across folds, three decimals.
  {
    std::ostringstream os;
    os << "<!-- manifest_hash=" << mh << " -->\n";
    os << "# Benchmark summary\n\n";
    for (const auto& c : report.conditions) {
      os << "## Condition " << c.condition << " (" << c.status << ")\n\n";
      if (c.status == "skipped" || c.status == "failed") {
        os << c.note << "\n\n";
        continue;
      }
      os << "| Model | MCC | Bal. Acc. | AUPRC | F1 (risk) | Prec. (risk) | "
            "Rec. (risk) | Exp. Cost |\n";
      os << "|---|---|---|---|---|---|---|---|\n";
      for (const auto& m : c.models) {
        std::vector<double> mcc_v, bal_v, pr_v, f1_v, p_v, r_v, cost_v;
        for (const auto& f : m.folds) {
          mcc_v.push_back(f.mcc);
          bal_v.push_back(f.bal_acc);
          pr_v.push_back(f.auprc);
          f1_v.push_back(f.f1);
          p_v.push_back(f.precision);
          r_v.push_back(f.recall);
          cost_v.push_back(f.expected_cost);
        }
        auto cell = [&](const std::vector<double>& v) {
          const auto [mean, sd] = mean_std(v);
          return fmt3(mean) + " ± " + fmt3(sd);
        };
        os << "| " << m.model << " | " << cell(mcc_v) << " | " << cell(bal_v)
           << " | " << cell(pr_v) << " | " << cell(f1_v) << " | " << cell(p_v)
           << " | " << cell(r_v) << " | " << cell(cost_v) << " |\n";
      }
      os << "\n";
      if (!c.comparisons.empty()) {
        os << "| Model A | Model B | Wilcoxon p | Holm adj. p | Cliff's "
              "delta |\n|---|---|---|---|---|\n";
        for (const auto& cmp : c.comparisons) {
          os << "| " << cmp.model_a << " | " << cmp.model_b << " | "
             << fmt3(cmp.wilcoxon_p) << " | " << fmt3(cmp.holm_p) << " | "
             << fmt3(cmp.cliffs) << " (" << cmp.magnitude << ") |\n";
        }
        os << "\n";
      }
    }
    write_file(out_dir + "/summary.md", os.str());
  }

  // Reliability bins for external plotting.
  {
    std::ostringstream os;
    os << "# manifest_hash=" << mh << "\n";
    os << "condition,model,bin,mean_predicted,fraction_positive,count\n";
    for (const auto& c : report.conditions) {
      for (const auto& m : c.models) {
        if (!m.has_phts) continue;
        for (std::size_t b = 0; b < m.phts_calibration.bins.size(); ++b) {
          const auto& bin = m.phts_calibration.bins[b];
          os << c.condition << ',' << m.model << ',' << b << ','
             << format_double(bin.mean_predicted) << ','
             << format_double(bin.fraction_positive) << ',' << bin.count << "\n";
        }
      }
    }
    write_file(out_dir + "/reliability_bins.csv", os.str());
  }

  // Stability matrices.
  {
    std::ostringstream os;
    os << "# manifest_hash=" << mh << "\n";
    os << "condition,model,fold_a,fold_b,spearman_rho\n";
    for (const auto& c : report.conditions) {
      for (const auto& [model, rep] : c.stability) {
        for (std::size_t f = 0; f < rep.rho.rows; ++f) {
          for (std::size_t g = 0; g < rep.rho.cols; ++g) {
            os << c.condition << ',' << model << ',' << f << ',' << g << ','
               << format_double(rep.rho.at(f, g)) << "\n";
          }
        }
      }
    }
    write_file(out_dir + "/stability.csv", os.str());
  }
}

}  // namespace p2pbench
