#include "p2pbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace p2pbench {

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs) {
  WilcoxonResult out;
  std::vector<double> d;
  d.reserve(diffs.size());
  for (double v : diffs) {
    if (!std::isfinite(v)) throw ValidationError("wilcoxon: non-finite difference");
    if (v == 0.0) {
      ++out.n_zeros;
    } else {
      d.push_back(v);
    }
  }
  const std::size_t n = d.size();
  if (n == 0) {
    throw ValidationError("wilcoxon: all differences are zero; test undefined");
  }
  if (n > 25) {
    throw ValidationError("wilcoxon: exact enumeration limited to n <= 25");
  }

  // Midranks of |d|, doubled so tied half-ranks stay integral.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(d[a]) < std::abs(d[b]);
  });
  std::vector<long long> rank2(n, 0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    const long long mid2 = static_cast<long long>(i + 1 + j);  // 2 * midrank
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = mid2;
    i = j;
  }

  long long w2 = 0;   // 2 * W+
  long long tot2 = 0; // 2 * sum of all ranks
  for (std::size_t k = 0; k < n; ++k) {
    tot2 += rank2[k];
    if (d[k] > 0.0) w2 += rank2[k];
  }
  out.w_plus = static_cast<double>(w2) / 2.0;
  out.n_used = n;

  // Exact null distribution of 2*W+ over all 2^n sign assignments,
  // counted by subset-sum over the doubled ranks.
  std::vector<double> count(static_cast<std::size_t>(tot2) + 1, 0.0);
  count[0] = 1.0;
  long long reach = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const long long r = rank2[k];
    reach += r;
    for (long long s = reach; s >= r; --s) {
      count[static_cast<std::size_t>(s)] +=
          count[static_cast<std::size_t>(s - r)];
    }
  }
  const double total = std::pow(2.0, static_cast<double>(n));
  double ge = 0.0, le = 0.0;
  for (long long s = 0; s <= tot2; ++s) {
    if (s >= w2) ge += count[static_cast<std::size_t>(s)];
    if (s <= w2) le += count[static_cast<std::size_t>(s)];
  }
  out.p_one_sided = ge / total;
  out.p_two_sided = std::min(1.0, 2.0 * std::min(ge, le) / total);
  return out;
}

std::vector<double> holm_correct(const std::vector<double>& p_values,
                                 std::size_t m) {
  for (double p : p_values) {
    if (p < 0.0 || p > 1.0) throw ValidationError("holm: p-values must be in [0, 1]");
  }
  if (m < p_values.size()) m = p_values.size();
  std::vector<std::size_t> order(p_values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p_values[a] < p_values[b];
  });
  std::vector<double> adjusted(p_values.size(), 0.0);
  double running = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    const double scaled =
        std::min(1.0, static_cast<double>(m - j) * p_values[order[j]]);
    running = std::max(running, scaled);
    adjusted[order[j]] = running;
  }
  return adjusted;
}

std::string cliffs_magnitude(double delta) {
  const double a = std::abs(delta);
  if (a < 0.147) return "negligible";
  if (a < 0.33) return "small";
  if (a < 0.474) return "medium";
  return "large";
}

EffectSize cliffs_delta(const std::vector<double>& a,
                        const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw ValidationError("cliffs_delta: empty sample");
  long long more = 0, less = 0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) ++more;
      if (x < y) ++less;
    }
  }
  EffectSize e;
  e.delta = static_cast<double>(more - less) /
            (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  e.magnitude = cliffs_magnitude(e.delta);
  return e;
}

}  // namespace p2pbench
