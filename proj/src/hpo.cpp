#include <algorithm>
#include <cmath>

#include "p2pbench/bench.hpp"

namespace p2pbench {

double sample_loguniform(Rng& rng, double lo, double hi) {
  const double u = rng.uniform(std::log(lo), std::log(hi));
  return std::exp(u);
}

ModelSpec sample_model_spec(ModelFamily family, Rng& rng) {
  ModelSpec s = default_spec(family);
  switch (family) {
    case ModelFamily::LogReg:
      s.c = std::clamp(sample_loguniform(rng, 1e-4, 1e2), 1e-4, 1e2);
      s.penalty = rng.bernoulli(0.5) ? "l1" : "l2";
      break;
    case ModelFamily::DecisionTree:
      s.max_depth = rng.bernoulli(0.1)
                        ? 0
                        : static_cast<int>(rng.uniform_int(3, 30));
      s.min_samples_leaf = static_cast<std::size_t>(rng.uniform_int(1, 20));
      break;
    case ModelFamily::RandomForest:
      s.n_estimators = static_cast<std::size_t>(rng.uniform_int(200, 2000));
      s.max_depth = rng.bernoulli(0.1)
                        ? 0
                        : static_cast<int>(rng.uniform_int(3, 30));
      s.min_samples_leaf = static_cast<std::size_t>(rng.uniform_int(1, 20));
      break;
    case ModelFamily::Gbt:
      s.n_estimators = static_cast<std::size_t>(rng.uniform_int(200, 4000));
      s.max_depth = static_cast<int>(rng.uniform_int(3, 12));
      s.learning_rate = std::clamp(sample_loguniform(rng, 1e-3, 0.3), 1e-3, 0.3);
      s.subsample = rng.uniform(0.5, 1.0);
      s.num_leaves = static_cast<std::size_t>(rng.uniform_int(31, 1024));
      break;
    case ModelFamily::Ebm: {
      const std::size_t bins[] = {64, 128, 256};
      s.max_bins = bins[rng.next_below(3)];
      s.n_interactions = static_cast<std::size_t>(rng.uniform_int(0, 50));
      s.ebm_learning_rate = std::clamp(sample_loguniform(rng, 1e-2, 0.3), 1e-3, 0.5);
      break;
    }
    case ModelFamily::Stacking:
      // The base list and meta are fixed; nothing to draw.
      break;
  }
  s.validate();
  return s;
}

SearchResult random_search(ModelFamily family, std::size_t budget,
                           const CaseTable& outer_train,
                           const std::vector<CvPlan::EvalPair>& inner_pairs,
                           const StageSpec& stages, Rng& rng) {
  if (budget < 1) throw ValidationError("random_search: budget must be >= 1");
  SearchResult out;
  double best_score = -2.0;
  bool any_ok = false;

  for (std::size_t trial = 0; trial < budget; ++trial) {
    Rng draw_rng = rng.stream("draw-" + std::to_string(trial));
    TrialRecord rec;
    rec.spec = sample_model_spec(family, draw_rng);
    try {
      double sum = 0.0;
      std::size_t used = 0;
      for (std::size_t i = 0; i < inner_pairs.size(); ++i) {
        const CaseTable train = outer_train.take_rows(inner_pairs[i].train);
        const CaseTable eval = outer_train.take_rows(inner_pairs[i].eval);
        Rng fold_rng = rng.stream("trial-" + std::to_string(trial) + "-fold-" +
                                  std::to_string(i));
        auto [pipeline, data] = fit_transform_train(stages, train, fold_rng);
        Rng model_rng = fold_rng.stream("model");
        auto model = train_model(rec.spec, data.x, data.y,
                                 ClassWeights::balanced(data.y), model_rng);
        const Matrix xe = pipeline.transform(eval);
        const auto p = model->predict_proba_checked(xe);
        const auto ye = eval.labels();
        sum += mcc(confusion(ye, p, 0.5));
        ++used;
      }
      rec.mean_inner_mcc = used > 0 ? sum / static_cast<double>(used) : 0.0;
      if (!any_ok || rec.mean_inner_mcc > best_score) {
        any_ok = true;
        best_score = rec.mean_inner_mcc;
        out.best = rec.spec;
      }
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    out.trials.push_back(std::move(rec));
  }
  if (!any_ok) {
    std::string log;
    for (const auto& t : out.trials) {
      if (t.failed) log += t.error + "; ";
    }
    throw Error("random_search: all trials failed: " + log);
  }
  return out;
}

}  // namespace p2pbench
