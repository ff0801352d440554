#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "p2pbench/explain.hpp"

namespace p2pbench {

namespace {

std::vector<double> midranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[order[j]] == v[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
    i = j;
  }
  return rank;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// Top-k feature names by importance, deterministic tie-break on name.
std::vector<std::string> top_k_features(const std::map<std::string, double>& imp,
                                        std::size_t k) {
  std::vector<std::pair<std::string, double>> items(imp.begin(), imp.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < items.size() && i < k; ++i) {
    out.push_back(items[i].first);
  }
  return out;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ValidationError("spearman: inputs must be nonempty and equal length");
  }
  return pearson(midranks(a), midranks(b));
}

StabilityReport stability(
    const std::vector<std::map<std::string, double>>& per_fold_importance,
    std::size_t k) {
  const std::size_t n_folds = per_fold_importance.size();
  if (n_folds < 2) throw ValidationError("stability: need at least two folds");

  StabilityReport report;
  report.k = k;
  std::vector<std::vector<std::string>> tops(n_folds);
  for (std::size_t f = 0; f < n_folds; ++f) {
    const std::size_t kf = std::min(k, per_fold_importance[f].size());
    tops[f] = top_k_features(per_fold_importance[f], kf);
  }
  report.top_features = tops;

  report.rho = Matrix(n_folds, n_folds, 0.0);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t f = 0; f < n_folds; ++f) {
    report.rho.at(f, f) = 1.0;
    for (std::size_t g = f + 1; g < n_folds; ++g) {
      // Union of the two folds' top-k lists.
      std::set<std::string> union_set(tops[f].begin(), tops[f].end());
      union_set.insert(tops[g].begin(), tops[g].end());
      const std::vector<std::string> universe(union_set.begin(), union_set.end());

      auto ranks_for = [&](std::size_t fold) {
        // Rank 1..len within the fold's own list; everything outside the
        // list ties at the midrank of the remaining positions.
        const auto& top = tops[fold];
        const double out_rank =
            (static_cast<double>(top.size()) + 1.0 +
             static_cast<double>(universe.size())) /
            2.0;
        std::vector<double> r(universe.size(), out_rank);
        for (std::size_t u = 0; u < universe.size(); ++u) {
          const auto it = std::find(top.begin(), top.end(), universe[u]);
          if (it != top.end()) {
            r[u] = static_cast<double>(it - top.begin()) + 1.0;
          }
        }
        return r;
      };
      const double rho = spearman(ranks_for(f), ranks_for(g));
      report.rho.at(f, g) = rho;
      report.rho.at(g, f) = rho;
      sum += rho;
      ++pairs;
    }
  }
  report.mean_rho = pairs > 0 ? sum / static_cast<double>(pairs) : 1.0;
  return report;
}

std::map<std::string, double> mean_abs_attribution(
    const std::vector<Attribution>& rows, const std::vector<std::string>& names) {
  std::map<std::string, double> out;
  if (rows.empty()) return out;
  for (std::size_t j = 0; j < names.size(); ++j) {
    double s = 0.0;
    for (const auto& a : rows) s += std::abs(a.phi[j]);
    out[names[j]] = s / static_cast<double>(rows.size());
  }
  return out;
}

std::string StabilityReport::to_csv_text() const {
  std::ostringstream os;
  os << "fold";
  for (std::size_t g = 0; g < rho.cols; ++g) os << ",fold_" << g;
  os << "\n";
  for (std::size_t f = 0; f < rho.rows; ++f) {
    os << "fold_" << f;
    for (std::size_t g = 0; g < rho.cols; ++g) {
      os << ',' << format_double(rho.at(f, g));
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace p2pbench
