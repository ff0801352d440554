#include "p2pbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace p2pbench {

ConfusionCounts confusion(const std::vector<std::uint8_t>& y,
                          const std::vector<double>& p, double tau) {
  if (y.empty()) throw ValidationError("confusion: empty input");
  if (y.size() != p.size()) throw ValidationError("confusion: length mismatch");
  if (tau < 0.0 || tau > 1.0) throw ValidationError("confusion: tau outside [0, 1]");
  ConfusionCounts c;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool pred = p[i] >= tau;
    if (y[i]) {
      (pred ? c.tp : c.fn) += 1;
    } else {
      (pred ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

double mcc(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom <= 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

double balanced_accuracy(const ConfusionCounts& c) {
  const double tpr =
      (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                        : 0.0;
  const double tnr =
      (c.tn + c.fp) > 0 ? static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp)
                        : 0.0;
  return (tpr + tnr) / 2.0;
}

PrecRecF1 f1_prec_rec(const ConfusionCounts& c) {
  PrecRecF1 out;
  out.precision = (c.tp + c.fp) > 0
                      ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                      : 0.0;
  out.recall = (c.tp + c.fn) > 0
                   ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                   : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

double auprc(const std::vector<std::uint8_t>& y, const std::vector<double>& scores) {
  if (y.size() != scores.size()) throw ValidationError("auprc: length mismatch");
  std::size_t n_pos = 0;
  for (std::uint8_t v : y) n_pos += v;
  if (n_pos == 0) throw ValidationError("auprc: needs at least one positive");

  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  double ap = 0.0;
  double tp = 0.0, fp = 0.0;
  double prev_recall = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    // Group tied scores at one threshold.
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (y[order[j]] ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / static_cast<double>(n_pos);
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double roc_auc(const std::vector<std::uint8_t>& y, const std::vector<double>& scores) {
  if (y.size() != scores.size()) throw ValidationError("roc_auc: length mismatch");
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Midranks for ties.
  std::vector<double> rank(y.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
    i = j;
  }
  double pos_rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k]) {
      pos_rank_sum += rank[k];
      n_pos += 1.0;
    }
  }
  const double n_neg = static_cast<double>(y.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return 0.5;
  return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

void CostModel::validate() const {
  if (c_fp <= 0.0 || c_fn <= 0.0) {
    throw ValidationError("cost model requires positive unit costs");
  }
}

double CostModel::optimal_threshold() const {
  validate();
  return c_fp / (c_fp + c_fn);
}

std::string CostModel::to_json_text() const {
  nlohmann::ordered_json j;
  j["c_fp"] = c_fp;
  j["c_fn"] = c_fn;
  return j.dump(2) + "\n";
}

CostModel CostModel::parse_json_text(const std::string& text) {
  const auto j = nlohmann::ordered_json::parse(text);
  CostModel c;
  c.c_fp = j.value("c_fp", c.c_fp);
  c.c_fn = j.value("c_fn", c.c_fn);
  c.validate();
  return c;
}

double expected_cost(const ConfusionCounts& c, const CostModel& cost) {
  cost.validate();
  if (c.n() == 0) throw ValidationError("expected_cost: empty counts");
  return (cost.c_fp * static_cast<double>(c.fp) +
          cost.c_fn * static_cast<double>(c.fn)) /
         static_cast<double>(c.n());
}

}  // namespace p2pbench
