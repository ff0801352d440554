#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "p2pbench/bench.hpp"
#include "p2pbench/csv.hpp"

namespace p2pbench {

namespace {

using json = nlohmann::ordered_json;

std::vector<CvPlan::EvalPair> localize_pairs(
    const std::vector<std::size_t>& universe,
    const std::vector<CvPlan::EvalPair>& pairs) {
  std::unordered_map<std::size_t, std::size_t> local;
  local.reserve(universe.size());
  for (std::size_t i = 0; i < universe.size(); ++i) local[universe[i]] = i;
  std::vector<CvPlan::EvalPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    CvPlan::EvalPair lp;
    lp.train.reserve(p.train.size());
    lp.eval.reserve(p.eval.size());
    for (std::size_t r : p.train) lp.train.push_back(local.at(r));
    for (std::size_t r : p.eval) lp.eval.push_back(local.at(r));
    out.push_back(std::move(lp));
  }
  return out;
}

FoldMetrics compute_metrics(const std::vector<std::uint8_t>& y,
                            const std::vector<double>& p, double tau,
                            const CostModel& cost) {
  FoldMetrics m;
  const ConfusionCounts c = confusion(y, p, tau);
  m.mcc = mcc(c);
  m.bal_acc = balanced_accuracy(c);
  const PrecRecF1 prf = f1_prec_rec(c);
  m.precision = prf.precision;
  m.recall = prf.recall;
  m.f1 = prf.f1;
  m.auprc = auprc(y, p);
  m.roc_auc = roc_auc(y, p);
  m.expected_cost = expected_cost(c, cost);
  m.ece = reliability(y, p).ece;
  m.tau = tau;
  m.n_eval = y.size();
  return m;
}

// Inner-OOF raw scores of one model spec under the condition's stages;
// the calibration data for Platt scaling.
void collect_inner_oof(const CaseTable& train_table,
                       const std::vector<CvPlan::EvalPair>& inner_local,
                       const StageSpec& stages, const ModelSpec& spec, Rng& rng,
                       std::vector<double>* scores,
                       std::vector<std::uint8_t>* labels) {
  for (std::size_t i = 0; i < inner_local.size(); ++i) {
    const CaseTable it = train_table.take_rows(inner_local[i].train);
    const CaseTable iv = train_table.take_rows(inner_local[i].eval);
    Rng fold_rng = rng.stream("cal-" + std::to_string(i));
    Rng pipe_rng = fold_rng.stream("pipe");
    auto [pipeline, data] = fit_transform_train(stages, it, pipe_rng);
    Rng model_rng = fold_rng.stream("model");
    auto model = train_model(spec, data.x, data.y, ClassWeights::balanced(data.y),
                             model_rng);
    const Matrix xe = pipeline.transform(iv);
    const auto p = model->predict_proba_checked(xe);
    const auto ye = iv.labels();
    scores->insert(scores->end(), p.begin(), p.end());
    labels->insert(labels->end(), ye.begin(), ye.end());
  }
}

std::map<std::string, double> model_shap_importance(
    const TrainedModel& model, const Matrix& sample,
    const std::vector<std::string>& names) {
  std::vector<Attribution> rows;
  rows.reserve(sample.rows);
  for (std::size_t r = 0; r < sample.rows; ++r) {
    const auto row = sample.row(r);
    switch (model.family()) {
      case ModelFamily::LogReg:
        rows.push_back(
            shap_linear(dynamic_cast<const LogRegModel&>(model), row, sample));
        break;
      case ModelFamily::DecisionTree:
      case ModelFamily::RandomForest:
      case ModelFamily::Gbt:
        rows.push_back(
            shap_tree(dynamic_cast<const TreeEnsembleModel&>(model).view(), row));
        break;
      case ModelFamily::Ebm: {
        const auto& ebm = dynamic_cast<const EbmModel&>(model);
        Attribution a;
        a.phi = ebm.contributions(row);
        a.base_value = ebm.intercept;
        a.scale = AttributionScale::Margin;
        rows.push_back(std::move(a));
        break;
      }
      case ModelFamily::Stacking:
        rows.push_back(shap_stacking(dynamic_cast<const StackingModel&>(model),
                                     row, sample));
        break;
    }
  }
  return mean_abs_attribution(rows, names);
}

std::size_t explain_sample_size(ModelFamily family, std::size_t configured) {
  // Per-row tree attribution over a big forest is the expensive case.
  if (family == ModelFamily::RandomForest || family == ModelFamily::Stacking) {
    return std::min<std::size_t>(configured, 25);
  }
  return configured;
}

Matrix sample_rows(const Matrix& x, std::size_t want, Rng& rng) {
  if (x.rows <= want) return x;
  std::vector<std::size_t> idx(x.rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  Matrix out(want, x.cols);
  for (std::size_t i = 0; i < want; ++i) {
    const auto row = x.row(idx[i]);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

// Deterministic garbling of the evaluation rows' feature cells: absurd
// numerics, novel categories, flipped booleans. Labels, times and group
// keys stay intact so the plan still applies.
CaseTable poison_rows(const CaseTable& data, const std::vector<std::size_t>& rows) {
  CaseTable out = data;
  for (auto& col : out.columns) {
    if (col.group == "labels" || col.name == out.time_column) continue;
    bool is_group_key = false;
    for (const auto& g : out.group_key_columns) is_group_key |= g == col.name;
    if (is_group_key) continue;
    for (std::size_t r : rows) {
      switch (col.kind) {
        case ColumnKind::Numeric:
          col.nums[r] = 9.9e12 + static_cast<double>(r);
          col.missing[r] = 0;
          break;
        case ColumnKind::Categorical:
          col.cats[r] = col.intern("__sentinel__" + std::to_string(r % 7));
          col.missing[r] = 0;
          break;
        case ColumnKind::Boolean:
          col.bools[r] = col.bools[r] ? 0 : 1;
          break;
        case ColumnKind::Datetime:
          col.times[r] += 86400L * 100000L;
          break;
        case ColumnKind::Identifier:
          col.ids[r] = "__sentinel__";
          break;
      }
    }
  }
  return out;
}

// Every statistic one fold's training run fits, hashed: the pipeline
// fingerprint, the training matrix (resampling included) and the
// calibration inputs.
std::uint64_t fold_fitted_state_hash(const CaseTable& data,
                                     const ConditionSettings& cs,
                                     const ExperimentConfig& config,
                                     const CvPlan& plan, std::size_t fold) {
  Hasher h;
  const auto pairs = plan.outer_pairs();
  const CaseTable train = data.take_rows(pairs[fold].train);
  Rng fold_rng =
      Rng(config.seed, "cond-" + cs.name).stream("fold-" + std::to_string(fold));
  Rng pipe_rng = fold_rng.stream("pipe");
  auto [pipeline, tdata] = fit_transform_train(cs.stages, train, pipe_rng);
  h.add_u64(pipeline.fingerprint());
  h.add_u64(tdata.x.rows);
  for (double v : tdata.x.data) h.add_double(v);
  for (std::uint8_t v : tdata.y) h.add_u64(v);
  if (cs.platt) {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    const auto inner_local = localize_pairs(pairs[fold].train, plan.inner_pairs(fold));
    // The calibration inputs are fitted statistics as well; the model
    // spec is irrelevant for the sentinel so the cheapest family is used.
    ModelSpec probe = default_spec(ModelFamily::LogReg);
    probe.max_iter = 50;
    Rng cal_rng = fold_rng.stream("caldata");
    collect_inner_oof(train, inner_local, cs.stages, probe, cal_rng, &scores,
                      &labels);
    for (double v : scores) h.add_double(v);
    for (std::uint8_t v : labels) h.add_u64(v);
  }
  return h.digest();
}

ConditionSettings condition_settings(const std::string& id,
                                     const ExperimentConfig& config) {
  ConditionSettings cs;
  cs.name = id;
  cs.strategy = SplitStrategy::TimePlusGroup;
  cs.stages = config.stages;
  cs.stages.selector = SelectorKind::None;
  cs.stages.resampler = ResamplerKind::None;
  cs.platt = false;
  cs.cost_optimal_threshold = false;
  if (id == "A0") return cs;
  cs.stages.selector = SelectorKind::MIFilter;
  if (id == "A1") return cs;
  cs.stages.resampler = ResamplerKind::Smote;
  if (id == "A2" || id == "A3") return cs;
  cs.platt = true;
  if (id == "A4") return cs;
  cs.cost_optimal_threshold = true;
  if (id == "A5") return cs;
  if (id == "A6") {
    cs.strategy = SplitStrategy::RandomStratified;
    return cs;
  }
  if (id == "A7") {
    cs.strategy = SplitStrategy::GroupOnly;
    return cs;
  }
  if (id == "A8") {
    cs.strategy = SplitStrategy::TimeForward;
    return cs;
  }
  throw ValidationError("unknown ablation condition: " + id);
}

}  // namespace

ModelSpec default_spec(ModelFamily family) {
  ModelSpec s;
  s.family = family;
  switch (family) {
    case ModelFamily::LogReg:
      s.c = 1.0;
      s.penalty = "l2";
      s.max_iter = 2000;
      break;
    case ModelFamily::DecisionTree:
      s.max_depth = 10;
      s.min_samples_leaf = 10;
      break;
    case ModelFamily::RandomForest:
      s.n_estimators = 200;
      s.max_depth = 12;
      s.min_samples_leaf = 20;
      break;
    case ModelFamily::Gbt:
      s.n_estimators = 200;
      s.max_depth = 6;
      s.min_samples_leaf = 5;
      s.learning_rate = 0.1;
      s.subsample = 0.9;
      s.num_leaves = 31;
      break;
    case ModelFamily::Ebm:
      s.max_bins = 256;
      s.ebm_rounds = 150;
      s.ebm_learning_rate = 0.15;
      s.n_interactions = 0;
      break;
    case ModelFamily::Stacking: {
      s.stacking_oof_folds = 5;
      ModelSpec gbt_a = default_spec(ModelFamily::Gbt);
      gbt_a.label = "gbt_depthwise";
      ModelSpec gbt_b = default_spec(ModelFamily::Gbt);
      gbt_b.max_depth = 12;
      gbt_b.num_leaves = 63;
      gbt_b.learning_rate = 0.05;
      gbt_b.label = "gbt_leafwise";
      ModelSpec rf = default_spec(ModelFamily::RandomForest);
      ModelSpec ebm = default_spec(ModelFamily::Ebm);
      s.bases = {rf, gbt_a, gbt_b, ebm};
      break;
    }
  }
  return s;
}

std::vector<ModelSpec> default_model_suite() {
  return {default_spec(ModelFamily::LogReg), default_spec(ModelFamily::RandomForest),
          default_spec(ModelFamily::Gbt), default_spec(ModelFamily::Ebm),
          default_spec(ModelFamily::Stacking)};
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.models = default_model_suite();
  c.stages.selector = SelectorKind::MIFilter;
  c.stages.mi_top_q = 0.25;
  c.stages.resampler = ResamplerKind::Smote;
  return c;
}

void ExperimentConfig::validate() const {
  gen.validate();
  stages.validate();
  if (stress_enabled) stress.validate();
  if (!(phts_fraction > 0.0 && phts_fraction < 1.0)) {
    throw ValidationError("phts_fraction must be in (0, 1)");
  }
  if (k_outer < 2 || k_inner < 2) throw ValidationError("need k_outer, k_inner >= 2");
  if (models.empty()) throw ValidationError("at least one model is required");
  for (const auto& m : models) m.validate();
  if (hpo_enabled && hpo_budget < 1) throw ValidationError("hpo budget must be >= 1");
  cost.validate();
  for (const auto& a : ablations) {
    if (a.size() != 2 || a[0] != 'A' || a[1] < '0' || a[1] > '8') {
      throw ValidationError("ablation ids must be in {A0..A8}: " + a);
    }
  }
  if (a3_mode != "substitute" && a3_mode != "skip") {
    throw ValidationError("a3_mode must be substitute or skip");
  }
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["generate"] = generate;
  j["gen"] = json::parse(gen.to_json_text());
  j["csv_path"] = csv_path;
  j["schema_path"] = schema_path;
  j["stress_enabled"] = stress_enabled;
  if (stress_enabled) j["stress"] = json::parse(stress.to_json_text());
  j["strategy"] = to_string(strategy);
  j["phts_fraction"] = phts_fraction;
  j["k_outer"] = k_outer;
  j["k_inner"] = k_inner;
  j["stages"] = json::parse(stages.to_json_text());
  j["models"] = json::array();
  for (const auto& m : models) j["models"].push_back(json::parse(m.to_json_text()));
  j["hpo_enabled"] = hpo_enabled;
  j["hpo_budget"] = hpo_budget;
  j["patience"] = patience;
  j["cost"] = json::parse(cost.to_json_text());
  j["ablations"] = ablations;
  j["a3_mode"] = a3_mode;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["leak_check"] = leak_check;
  j["explain_stability"] = explain_stability;
  j["explain_sample"] = explain_sample;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::parse_json_text(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig c;
  c.generate = j.value("generate", c.generate);
  if (j.contains("gen")) c.gen = GenConfig::parse_json_text(j["gen"].dump());
  c.csv_path = j.value("csv_path", c.csv_path);
  c.schema_path = j.value("schema_path", c.schema_path);
  c.stress_enabled = j.value("stress_enabled", c.stress_enabled);
  if (c.stress_enabled && j.contains("stress")) {
    c.stress = StressConfig::parse_json_text(j["stress"].dump());
  }
  if (j.contains("strategy")) {
    c.strategy = split_strategy_from_string(j["strategy"].get<std::string>());
  }
  c.phts_fraction = j.value("phts_fraction", c.phts_fraction);
  c.k_outer = j.value("k_outer", c.k_outer);
  c.k_inner = j.value("k_inner", c.k_inner);
  if (j.contains("stages")) {
    c.stages = StageSpec::parse_json_text(j["stages"].dump());
  }
  if (j.contains("models")) {
    c.models.clear();
    for (const auto& m : j["models"]) {
      c.models.push_back(ModelSpec::parse_json_text(m.dump()));
    }
  } else {
    c.models = default_model_suite();
  }
  c.hpo_enabled = j.value("hpo_enabled", c.hpo_enabled);
  c.hpo_budget = j.value("hpo_budget", c.hpo_budget);
  c.patience = j.value("patience", c.patience);
  if (j.contains("cost")) c.cost = CostModel::parse_json_text(j["cost"].dump());
  if (j.contains("ablations")) {
    c.ablations = j["ablations"].get<std::vector<std::string>>();
  }
  c.a3_mode = j.value("a3_mode", c.a3_mode);
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.leak_check = j.value("leak_check", c.leak_check);
  c.explain_stability = j.value("explain_stability", c.explain_stability);
  c.explain_sample = j.value("explain_sample", c.explain_sample);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open experiment config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str());
}

std::uint64_t ExperimentConfig::config_hash() const {
  return fnv1a64(to_json_text());
}

CaseTable materialize_dataset(const ExperimentConfig& config) {
  config.validate();
  CaseTable data;
  if (config.generate) {
    data = generate_dataset(config.gen);
  } else {
    if (config.csv_path.empty() || config.schema_path.empty()) {
      throw ValidationError("csv ingestion needs csv_path and schema_path");
    }
    data = read_csv(config.csv_path, SchemaDescriptor::load(config.schema_path));
    if (!data.has_labels()) {
      throw ValidationError("ingested dataset must carry y_risk labels");
    }
  }
  if (config.stress_enabled) {
    Rng stress_rng(config.stress.seed, "stress");
    data = apply_stress(data, config.stress, stress_rng);
  }
  return sort_by_time(data);
}

ConditionResult run_condition(const CaseTable& data, const ConditionSettings& cs,
                              const ExperimentConfig& config) {
  ConditionResult result;
  result.condition = cs.name;
  result.strategy = cs.strategy;
  result.stages = cs.stages;
  result.platt = cs.platt;
  result.threshold_policy =
      cs.cost_optimal_threshold ? "cost_optimal" : "fixed_0.5";

  Rng root(config.seed, "cond-" + cs.name);
  SplitSpec sspec{cs.strategy, config.phts_fraction, config.seed};
  Rng plan_rng = root.stream("plan");
  CvPlan plan = make_cv_plan(data, sspec, config.k_outer, config.k_inner, plan_rng);
  result.plan_hash = plan.plan_hash();
  const auto pairs = plan.outer_pairs();

  std::vector<std::size_t> dev_rows;
  for (const auto& fold : plan.outer_folds) {
    dev_rows.insert(dev_rows.end(), fold.begin(), fold.end());
  }
  std::sort(dev_rows.begin(), dev_rows.end());
  const CaseTable dev = data.take_rows(dev_rows);
  const CaseTable phts = data.take_rows(plan.phts_indices);
  const auto phts_y = phts.labels();
  std::size_t phts_pos = 0;
  for (std::uint8_t v : phts_y) phts_pos += v;

  const double tau = cs.cost_optimal_threshold
                         ? config.cost.optimal_threshold()
                         : 0.5;

  for (const ModelSpec& base_spec : config.models) {
    ModelConditionResult mr;
    mr.model = base_spec.name();
    std::vector<double> pooled_scores;
    std::vector<std::uint8_t> pooled_y;
    std::vector<std::map<std::string, double>> stability_inputs;

    for (std::size_t o = 0; o < pairs.size(); ++o) {
      Rng fold_rng = root.stream(mr.model + "-fold-" + std::to_string(o));
      const CaseTable train = data.take_rows(pairs[o].train);
      const CaseTable eval = data.take_rows(pairs[o].eval);
      const auto inner_local =
          localize_pairs(pairs[o].train, plan.inner_pairs(o));

      ModelSpec spec = base_spec;
      if (config.hpo_enabled && base_spec.family != ModelFamily::Stacking) {
        Rng hpo_rng = fold_rng.stream("hpo");
        spec = random_search(base_spec.family, config.hpo_budget, train,
                             inner_local, cs.stages, hpo_rng)
                   .best;
      }

      Rng pipe_rng = fold_rng.stream("pipe");
      auto [pipeline, tdata] = fit_transform_train(cs.stages, train, pipe_rng);
      Rng model_rng = fold_rng.stream("model");
      auto model = train_model(spec, tdata.x, tdata.y,
                               ClassWeights::balanced(tdata.y), model_rng);

      const Matrix xe = pipeline.transform(eval);
      const auto ye = eval.labels();
      const auto p_raw = model->predict_proba_checked(xe);
      std::vector<double> p_final = p_raw;
      if (cs.platt) {
        std::vector<double> oof_scores;
        std::vector<std::uint8_t> oof_labels;
        Rng cal_rng = fold_rng.stream("caldata");
        collect_inner_oof(train, inner_local, cs.stages, spec, cal_rng,
                          &oof_scores, &oof_labels);
        const PlattParams platt = platt_fit(oof_scores, oof_labels);
        p_final = platt_apply(platt, p_raw);
      }
      mr.folds.push_back(compute_metrics(ye, p_final, tau, config.cost));
      pooled_scores.insert(pooled_scores.end(), p_raw.begin(), p_raw.end());
      pooled_y.insert(pooled_y.end(), ye.begin(), ye.end());

      // Stability input: mean |phi| on a seeded sample of this fold's
      // transformed (pre-resample) training rows.
      if (cs.compute_stability) {
        Rng explain_rng = fold_rng.stream("explain");
        Matrix real_rows(train.n_rows(), tdata.x.cols);
        std::copy(tdata.x.data.begin(),
                  tdata.x.data.begin() +
                      static_cast<std::ptrdiff_t>(real_rows.data.size()),
                  real_rows.data.begin());
        const std::size_t want =
            explain_sample_size(spec.family, config.explain_sample);
        const Matrix sample = sample_rows(real_rows, want, explain_rng);
        stability_inputs.push_back(
            model_shap_importance(*model, sample, pipeline.feature_names()));
      }
    }
    if (cs.compute_stability && stability_inputs.size() >= 2) {
      result.stability.emplace_back(mr.model, stability(stability_inputs, 20));
    }

    // Holdout evaluation: refit on the full development window.
    if (phts_pos > 0) {
      Rng phts_rng = root.stream(mr.model + "-phts");
      ModelSpec spec = base_spec;
      if (config.hpo_enabled && base_spec.family != ModelFamily::Stacking) {
        SplitSpec inner_spec{cs.strategy, config.phts_fraction, config.seed};
        (void)inner_spec;
        Rng fold_build = phts_rng.stream("hpo-folds");
        auto dev_folds = make_folds(dev, cs.strategy, config.k_inner, fold_build);
        const auto dev_pairs = CvPlan::pairs_from_folds(dev_folds, cs.strategy);
        Rng hpo_rng = phts_rng.stream("hpo");
        spec = random_search(base_spec.family, config.hpo_budget, dev, dev_pairs,
                             cs.stages, hpo_rng)
                   .best;
      }
      Rng pipe_rng = phts_rng.stream("pipe");
      auto [pipeline, tdata] = fit_transform_train(cs.stages, dev, pipe_rng);
      Rng model_rng = phts_rng.stream("model");
      auto model = train_model(spec, tdata.x, tdata.y,
                               ClassWeights::balanced(tdata.y), model_rng);
      const Matrix xp = pipeline.transform(phts);
      const auto p_raw = model->predict_proba_checked(xp);
      std::vector<double> p_final = p_raw;
      if (cs.platt) {
        const PlattParams platt = platt_fit(pooled_scores, pooled_y);
        p_final = platt_apply(platt, p_raw);
      }
      mr.phts = compute_metrics(phts_y, p_final, tau, config.cost);
      mr.phts_raw_scores = p_raw;
      mr.phts_calibration = reliability(phts_y, p_final);
      mr.phts_calibration.has_platt = cs.platt;
      mr.has_phts = true;
    }
    result.models.push_back(std::move(mr));
  }

  // Pairwise statistics on per-fold MCC.
  std::vector<ComparisonRow> rows;
  std::vector<double> raw_p;
  for (std::size_t a = 0; a < result.models.size(); ++a) {
    for (std::size_t b = a + 1; b < result.models.size(); ++b) {
      const auto& ma = result.models[a];
      const auto& mb = result.models[b];
      ComparisonRow row;
      row.model_a = ma.model;
      row.model_b = mb.model;
      std::vector<double> diffs, va, vb;
      for (std::size_t f = 0; f < ma.folds.size(); ++f) {
        diffs.push_back(ma.folds[f].mcc - mb.folds[f].mcc);
        va.push_back(ma.folds[f].mcc);
        vb.push_back(mb.folds[f].mcc);
      }
      try {
        row.wilcoxon_p = wilcoxon_signed_rank(diffs).p_one_sided;
      } catch (const ValidationError&) {
        row.wilcoxon_p = 1.0;  // all-zero differences
      }
      const EffectSize e = cliffs_delta(va, vb);
      row.cliffs = e.delta;
      row.magnitude = e.magnitude;
      raw_p.push_back(row.wilcoxon_p);
      rows.push_back(std::move(row));
    }
  }
  const auto adj = holm_correct(raw_p, raw_p.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].holm_p = adj[i];
  result.comparisons = std::move(rows);

  if (config.leak_check) {
    std::string detail;
    result.leak_guard_ran = true;
    result.leak_guard_passed = leak_sentinel_check(data, cs, config, &detail);
    if (!result.leak_guard_passed) result.note += "leak sentinel: " + detail;
  }
  return result;
}

AblationReport run_ablation(const ExperimentConfig& config) {
  config.validate();
  const CaseTable data = materialize_dataset(config);
  AblationReport report;
  report.config_hash = config.config_hash();
  report.dataset_hash = data.content_hash();
  report.seed = config.seed;

  std::string last_runnable;
  for (const auto& id : config.ablations) {
    if (id == "A3" && config.a3_mode == "skip") continue;
    last_runnable = id;
  }

  for (const auto& id : config.ablations) {
    if (id == "A3" && config.a3_mode == "skip") {
      ConditionResult skipped;
      skipped.condition = id;
      skipped.status = "skipped";
      skipped.note =
          "ctgan augmentation is out of scope for this artifact; "
          "condition skipped per configuration";
      report.conditions.push_back(std::move(skipped));
      continue;
    }
    ConditionSettings cs = condition_settings(id, config);
    cs.compute_stability = config.explain_stability && id == last_runnable;
    try {
      ConditionResult r = run_condition(data, cs, config);
      if (id == "A3") {
        r.status = "substituted";
        r.note =
            "ctgan augmentation is out of scope; smote substituted per "
            "configuration";
      }
      report.conditions.push_back(std::move(r));
    } catch (const std::exception& e) {
      ConditionResult failed;
      failed.condition = id;
      failed.status = "failed";
      failed.note = e.what();
      report.conditions.push_back(std::move(failed));
    }
  }
  return report;
}

LeakDemoResult run_leak_demo(const CaseTable& data, const ExperimentConfig& config,
                             bool acknowledge_leaky) {
  if (!acknowledge_leaky) {
    throw ValidationError(
        "the leaky variant is a demonstration of a methodological flaw; "
        "pass --acknowledge-leaky to run it");
  }
  const StageSpec stages = config.stages;
  const ModelSpec spec = config.models.front();

  Rng root(config.seed, "leak-demo");
  SplitSpec sspec{config.strategy, config.phts_fraction, config.seed};
  Rng plan_rng = root.stream("plan");
  CvPlan plan =
      make_cv_plan(data, sspec, config.k_outer, config.k_inner, plan_rng);
  const auto pairs = plan.outer_pairs();

  LeakDemoResult out;
  out.model = spec.name();

  for (std::size_t o = 0; o < pairs.size(); ++o) {
    // Shared streams: without a resampler both paths are bit-identical.
    Rng fold_rng = root.stream("fold-" + std::to_string(o));
    const CaseTable train = data.take_rows(pairs[o].train);
    const CaseTable eval = data.take_rows(pairs[o].eval);
    const auto ye = eval.labels();

    // Safe path: Algorithm order, resampler confined to the train fold.
    {
      Rng pipe_rng = fold_rng.stream("pipe");
      auto [pipeline, tdata] = fit_transform_train(stages, train, pipe_rng);
      Rng model_rng = fold_rng.stream("model");
      auto model = train_model(spec, tdata.x, tdata.y,
                               ClassWeights::balanced(tdata.y), model_rng);
      const auto p = model->predict_proba_checked(pipeline.transform(eval));
      out.safe_fold_auprc.push_back(auprc(ye, p));
    }

    // Leaky path: same fitted stages, but the resampler sees the pooled
    // train+eval rows and all synthetic points land in training.
    {
      StageSpec no_resample = stages;
      no_resample.resampler = ResamplerKind::None;
      Rng pipe_rng = fold_rng.stream("pipe");
      auto [pipeline, tdata] = fit_transform_train(no_resample, train, pipe_rng);
      Matrix x_train = tdata.x;
      std::vector<std::uint8_t> y_train = tdata.y;
      const Matrix x_eval = pipeline.transform(eval);

      if (stages.resampler == ResamplerKind::Smote) {
        const std::size_t n_pool = x_train.rows + x_eval.rows;
        Matrix pool(n_pool, x_train.cols);
        std::vector<std::uint8_t> y_pool(n_pool);
        for (std::size_t i = 0; i < x_train.rows; ++i) {
          std::copy(x_train.row(i).begin(), x_train.row(i).end(),
                    pool.row(i).begin());
          y_pool[i] = y_train[i];
        }
        for (std::size_t i = 0; i < x_eval.rows; ++i) {
          std::copy(x_eval.row(i).begin(), x_eval.row(i).end(),
                    pool.row(x_train.rows + i).begin());
          y_pool[x_train.rows + i] = ye[i];
        }
        std::vector<std::size_t> minority, majority;
        std::size_t ones = 0;
        for (std::uint8_t v : y_pool) ones += v;
        const std::uint8_t minority_class = (2 * ones <= n_pool) ? 1 : 0;
        for (std::size_t i = 0; i < n_pool; ++i) {
          (y_pool[i] == minority_class ? minority : majority).push_back(i);
        }
        if (minority.size() < stages.smote_k + 1) {
          throw ValidationError("leak demo: minority too small for smote");
        }
        const long long want =
            std::llround(stages.smote_ratio * static_cast<double>(majority.size()));
        const long long need = want - static_cast<long long>(minority.size());
        Rng smote_rng = pipe_rng.stream("smote");
        if (need > 0) {
          const std::size_t k = stages.smote_k;
          std::vector<std::vector<std::size_t>> neighbors(minority.size());
          for (std::size_t i = 0; i < minority.size(); ++i) {
            std::vector<std::pair<double, std::size_t>> dist;
            const auto a = pool.row(minority[i]);
            for (std::size_t j = 0; j < minority.size(); ++j) {
              if (i == j) continue;
              const auto b = pool.row(minority[j]);
              double d2 = 0.0;
              for (std::size_t c = 0; c < a.size(); ++c) {
                const double diff = a[c] - b[c];
                d2 += diff * diff;
              }
              dist.emplace_back(d2, minority[j]);
            }
            std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
            for (std::size_t j = 0; j < k; ++j) {
              neighbors[i].push_back(dist[j].second);
            }
          }
          for (long long s = 0; s < need; ++s) {
            const std::size_t pick =
                static_cast<std::size_t>(smote_rng.next_below(minority.size()));
            const std::size_t a_row = minority[pick];
            const std::size_t b_row = neighbors[pick][smote_rng.next_below(k)];
            const double lambda = smote_rng.next_double();
            const std::size_t nr = x_train.rows;
            x_train.data.resize((nr + 1) * x_train.cols);
            x_train.rows = nr + 1;
            for (std::size_t c = 0; c < x_train.cols; ++c) {
              const double av = pool.at(a_row, c);
              const double bv = pool.at(b_row, c);
              x_train.at(nr, c) = av + lambda * (bv - av);
            }
            y_train.push_back(minority_class);
          }
        }
      }
      Rng model_rng = fold_rng.stream("model");
      auto model = train_model(spec, x_train, y_train,
                               ClassWeights::balanced(y_train), model_rng);
      const auto p = model->predict_proba_checked(x_eval);
      out.leaky_fold_auprc.push_back(auprc(ye, p));
    }
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  out.safe_cv_auprc = mean(out.safe_fold_auprc);
  out.leaky_cv_auprc = mean(out.leaky_fold_auprc);

  // Holdout protocol: identical for both paths (resampling stays inside
  // the development window), so one honest estimate serves both.
  {
    std::vector<std::size_t> dev_rows;
    for (const auto& fold : plan.outer_folds) {
      dev_rows.insert(dev_rows.end(), fold.begin(), fold.end());
    }
    std::sort(dev_rows.begin(), dev_rows.end());
    const CaseTable dev = data.take_rows(dev_rows);
    const CaseTable phts = data.take_rows(plan.phts_indices);
    Rng phts_rng = root.stream("phts");
    Rng pipe_rng = phts_rng.stream("pipe");
    auto [pipeline, tdata] = fit_transform_train(stages, dev, pipe_rng);
    Rng model_rng = phts_rng.stream("model");
    auto model = train_model(spec, tdata.x, tdata.y,
                             ClassWeights::balanced(tdata.y), model_rng);
    const auto p = model->predict_proba_checked(pipeline.transform(phts));
    out.phts_auprc = auprc(phts.labels(), p);
  }
  return out;
}

bool leak_sentinel_check(const CaseTable& data, const ConditionSettings& cs,
                         const ExperimentConfig& config, std::string* detail) {
  Rng root(config.seed, "cond-" + cs.name);
  SplitSpec sspec{cs.strategy, config.phts_fraction, config.seed};
  Rng plan_rng = root.stream("plan");
  const CvPlan plan =
      make_cv_plan(data, sspec, config.k_outer, config.k_inner, plan_rng);

  // Per fold: garble exactly the rows this fold's fits are forbidden to
  // see (its evaluation fold plus the holdout) and compare every fitted
  // statistic against the clean run.
  const auto pairs = plan.outer_pairs();
  for (std::size_t o = 0; o < pairs.size(); ++o) {
    const std::uint64_t clean = fold_fitted_state_hash(data, cs, config, plan, o);
    std::vector<std::size_t> forbidden = plan.phts_indices;
    forbidden.insert(forbidden.end(), pairs[o].eval.begin(), pairs[o].eval.end());
    std::sort(forbidden.begin(), forbidden.end());
    const CaseTable poisoned = poison_rows(data, forbidden);
    const std::uint64_t garbled =
        fold_fitted_state_hash(poisoned, cs, config, plan, o);
    if (clean != garbled) {
      if (detail) {
        *detail = "fitted statistics of fold " + std::to_string(o) +
                  " changed when its evaluation rows were poisoned";
      }
      return false;
    }
  }
  if (detail) {
    *detail = "fitted statistics identical under evaluation-row poisoning";
  }
  return true;
}

std::string LeakDemoResult::to_json_text() const {
  json j;
  j["leaky"] = leaky;
  j["model"] = model;
  j["safe_fold_auprc"] = safe_fold_auprc;
  j["leaky_fold_auprc"] = leaky_fold_auprc;
  j["safe_cv_auprc"] = safe_cv_auprc;
  j["leaky_cv_auprc"] = leaky_cv_auprc;
  j["phts_auprc"] = phts_auprc;
  j["cv_inflation"] = leaky_cv_auprc - safe_cv_auprc;
  return j.dump(2) + "\n";
}

}  // namespace p2pbench
