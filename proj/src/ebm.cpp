#include <algorithm>
#include <cmath>
#include <limits>

#include "p2pbench/linear.hpp"
#include "p2pbench/model.hpp"
#include "p2pbench/pipeline.hpp"

namespace p2pbench {

namespace {

double mean_logloss(const std::vector<double>& margins,
                    const std::vector<std::uint8_t>& y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    loss += log1p_exp_neg((y[i] ? 1.0 : -1.0) * margins[i]);
  }
  return loss / static_cast<double>(y.size());
}

}  // namespace

// Cyclic one-feature Newton boosting over equal-frequency bins, then
// optional explicit pairwise terms on a fixed pair list. The prediction
// logit is exactly intercept + sum of shape lookups.
std::unique_ptr<TrainedModel> train_ebm(const ModelSpec& spec, const Matrix& x,
                                        const std::vector<std::uint8_t>& y,
                                        const ClassWeights& weights,
                                        const EarlyStop* early_stop) {
  auto model = std::make_unique<EbmModel>();
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  model->n_features_ = d;
  model->bin_edges.resize(d);
  model->shapes.resize(d);
  model->bin_counts.resize(d);

  std::vector<std::vector<std::uint16_t>> codes(d);
  std::vector<double> colv(n);
  for (std::size_t f = 0; f < d; ++f) {
    for (std::size_t r = 0; r < n; ++r) colv[r] = x.at(r, f);
    model->bin_edges[f] = equal_frequency_edges(colv, spec.max_bins);
    const std::size_t n_bins = model->bin_edges[f].size() + 1;
    model->shapes[f].assign(n_bins, 0.0);
    model->bin_counts[f].assign(n_bins, 0.0);
    codes[f].resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t b = bin_of(colv[r], model->bin_edges[f]);
      codes[f][r] = static_cast<std::uint16_t>(b);
      model->bin_counts[f][b] += 1.0;
    }
  }

  const auto sample_w = weights.per_sample(y);
  double wp = 0.0, wn = 0.0;
  for (std::size_t i = 0; i < n; ++i) (y[i] ? wp : wn) += sample_w[i];
  model->intercept = std::log(std::max(wp, 1e-12) / std::max(wn, 1e-12));

  std::vector<double> margins(n, model->intercept);
  std::vector<double> g_bin, h_bin, update;

  const bool track_val = early_stop && early_stop->x_val;
  std::vector<std::vector<std::uint16_t>> val_codes;
  std::vector<double> val_margins;
  if (track_val) {
    const Matrix& xv = *early_stop->x_val;
    val_codes.resize(d);
    for (std::size_t f = 0; f < d; ++f) {
      val_codes[f].resize(xv.rows);
      for (std::size_t r = 0; r < xv.rows; ++r) {
        val_codes[f][r] =
            static_cast<std::uint16_t>(bin_of(xv.at(r, f), model->bin_edges[f]));
      }
    }
    val_margins.assign(xv.rows, model->intercept);
  }
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_shapes;
  std::size_t best_round = 0, since_best = 0;

  for (std::size_t round = 0; round < spec.ebm_rounds; ++round) {
    for (std::size_t f = 0; f < d; ++f) {
      const std::size_t n_bins = model->shapes[f].size();
      if (n_bins < 2) continue;
      g_bin.assign(n_bins, 0.0);
      h_bin.assign(n_bins, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        const double p = sigmoid(margins[r]);
        const std::uint16_t b = codes[f][r];
        g_bin[b] += sample_w[r] * (p - (y[r] ? 1.0 : 0.0));
        h_bin[b] += sample_w[r] * p * (1.0 - p);
      }
      update.assign(n_bins, 0.0);
      for (std::size_t b = 0; b < n_bins; ++b) {
        update[b] = -spec.ebm_learning_rate * g_bin[b] / (h_bin[b] + 1e-3);
        model->shapes[f][b] += update[b];
      }
      for (std::size_t r = 0; r < n; ++r) margins[r] += update[codes[f][r]];
      if (track_val) {
        for (std::size_t r = 0; r < val_margins.size(); ++r) {
          val_margins[r] += update[val_codes[f][r]];
        }
      }
    }
    model->rounds_run = round + 1;
    if (track_val) {
      const double val_loss = mean_logloss(val_margins, *early_stop->y_val);
      if (val_loss < best_val - 1e-12) {
        best_val = val_loss;
        best_round = round + 1;
        best_shapes = model->shapes;
        since_best = 0;
      } else if (++since_best >= early_stop->patience) {
        break;
      }
    }
  }
  if (track_val && best_round > 0) {
    model->shapes = std::move(best_shapes);
    model->rounds_run = best_round;
    // Rebuild margins to match the restored shapes before the pair phase.
    for (std::size_t r = 0; r < n; ++r) {
      double m = model->intercept;
      for (std::size_t f = 0; f < d; ++f) m += model->shapes[f][codes[f][r]];
      margins[r] = m;
    }
  }

  // Pairwise phase on an explicit list; default pairs come from the top-5
  // univariate features by count-weighted mean |shape|.
  if (spec.n_interactions > 0) {
    auto pair_list = spec.interaction_pairs;
    if (pair_list.empty()) {
      std::vector<std::pair<double, std::size_t>> strength;
      for (std::size_t f = 0; f < d; ++f) {
        double s = 0.0, cnt = 0.0;
        for (std::size_t b = 0; b < model->shapes[f].size(); ++b) {
          s += std::abs(model->shapes[f][b]) * model->bin_counts[f][b];
          cnt += model->bin_counts[f][b];
        }
        strength.emplace_back(cnt > 0 ? s / cnt : 0.0, f);
      }
      std::sort(strength.begin(), strength.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      const std::size_t top = std::min<std::size_t>(5, d);
      for (std::size_t i = 0; i < top; ++i) {
        for (std::size_t j = i + 1; j < top; ++j) {
          pair_list.emplace_back(strength[i].second, strength[j].second);
        }
      }
    }
    if (pair_list.size() > spec.n_interactions) {
      pair_list.resize(spec.n_interactions);
    }
    for (const auto& [a, b] : pair_list) {
      EbmModel::PairTerm term;
      term.a = a;
      term.b = b;
      term.grid.assign(model->shapes[a].size() * model->shapes[b].size(), 0.0);
      model->pairs.push_back(std::move(term));
    }
    const std::size_t pair_rounds = std::max<std::size_t>(1, spec.ebm_rounds / 2);
    std::vector<double> g_grid, h_grid;
    for (std::size_t round = 0; round < pair_rounds; ++round) {
      for (auto& term : model->pairs) {
        const std::size_t nb = model->shapes[term.b].size();
        g_grid.assign(term.grid.size(), 0.0);
        h_grid.assign(term.grid.size(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
          const double p = sigmoid(margins[r]);
          const std::size_t cell = codes[term.a][r] * nb + codes[term.b][r];
          g_grid[cell] += sample_w[r] * (p - (y[r] ? 1.0 : 0.0));
          h_grid[cell] += sample_w[r] * p * (1.0 - p);
        }
        std::vector<double> cell_update(term.grid.size(), 0.0);
        for (std::size_t cell = 0; cell < term.grid.size(); ++cell) {
          cell_update[cell] =
              -spec.ebm_learning_rate * g_grid[cell] / (h_grid[cell] + 1e-3);
          term.grid[cell] += cell_update[cell];
        }
        for (std::size_t r = 0; r < n; ++r) {
          const std::size_t cell = codes[term.a][r] * nb + codes[term.b][r];
          margins[r] += cell_update[cell];
        }
      }
    }
  }
  return model;
}

}  // namespace p2pbench
