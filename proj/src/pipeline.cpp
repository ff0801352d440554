#include "p2pbench/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "p2pbench/linear.hpp"

namespace p2pbench {

namespace {

using json = nlohmann::ordered_json;

bool is_feature_column(const Column& c) {
  if (c.group == "labels") return false;
  return c.kind == ColumnKind::Numeric || c.kind == ColumnKind::Categorical ||
         c.kind == ColumnKind::Boolean;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return (v[mid - 1] + hi) / 2.0;
}

std::vector<double> balanced_weights(const std::vector<std::uint8_t>& y) {
  double n0 = 0, n1 = 0;
  for (std::uint8_t v : y) (v ? n1 : n0) += 1.0;
  const double n = n0 + n1;
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    w[i] = y[i] ? n / (2.0 * n1) : n / (2.0 * n0);
  }
  return w;
}

}  // namespace

std::string to_string(EncoderKind k) {
  return k == EncoderKind::OneHot ? "one_hot" : "ordinal";
}
std::string to_string(ScalerKind k) {
  return k == ScalerKind::Standardize ? "standardize" : "none";
}
std::string to_string(SelectorKind k) {
  switch (k) {
    case SelectorKind::None: return "none";
    case SelectorKind::MIFilter: return "mi_filter";
    case SelectorKind::Rfe: return "rfe";
    case SelectorKind::L1Embedded: return "l1_embedded";
  }
  return "none";
}
std::string to_string(ResamplerKind k) {
  switch (k) {
    case ResamplerKind::None: return "none";
    case ResamplerKind::Smote: return "smote";
    case ResamplerKind::Ctgan: return "ctgan";
  }
  return "none";
}

void StageSpec::validate() const {
  if (resampler == ResamplerKind::Ctgan) {
    throw ValidationError(
        "ctgan resampling is out of scope for this artifact; configure smote");
  }
  if (selector == SelectorKind::MIFilter && !(mi_top_q > 0.0 && mi_top_q <= 1.0)) {
    throw ValidationError("mi_top_q must be in (0, 1]");
  }
  if (selector == SelectorKind::Rfe && rfe_target_k == 0) {
    throw ValidationError("rfe_target_k must be >= 1");
  }
  if (selector == SelectorKind::Rfe && rfe_step == 0) {
    throw ValidationError("rfe_step must be >= 1");
  }
  if (selector == SelectorKind::L1Embedded && l1_c <= 0.0) {
    throw ValidationError("l1_c must be > 0");
  }
  if (resampler == ResamplerKind::Smote) {
    if (smote_k < 1) throw ValidationError("smote k_neighbors must be >= 1");
    if (!(smote_ratio > 0.0 && smote_ratio <= 1.0)) {
      throw ValidationError("smote target_ratio must be in (0, 1]");
    }
  }
}

std::string StageSpec::to_json_text() const {
  json j;
  j["encoder"] = to_string(encoder);
  j["scaler"] = to_string(scaler);
  j["selector"] = to_string(selector);
  j["mi_top_q"] = mi_top_q;
  j["rfe_target_k"] = rfe_target_k;
  j["rfe_step"] = rfe_step;
  j["l1_c"] = l1_c;
  j["resampler"] = to_string(resampler);
  j["smote_k"] = smote_k;
  j["smote_ratio"] = smote_ratio;
  return j.dump(2) + "\n";
}

StageSpec StageSpec::parse_json_text(const std::string& text) {
  json j = json::parse(text);
  StageSpec s;
  if (j.contains("encoder")) {
    const auto v = j["encoder"].get<std::string>();
    if (v == "one_hot") {
      s.encoder = EncoderKind::OneHot;
    } else if (v == "ordinal") {
      s.encoder = EncoderKind::Ordinal;
    } else {
      throw ValidationError("unknown encoder: " + v);
    }
  }
  if (j.contains("scaler")) {
    const auto v = j["scaler"].get<std::string>();
    if (v == "standardize") {
      s.scaler = ScalerKind::Standardize;
    } else if (v == "none") {
      s.scaler = ScalerKind::None;
    } else {
      throw ValidationError("unknown scaler: " + v);
    }
  }
  if (j.contains("selector")) {
    const auto v = j["selector"].get<std::string>();
    if (v == "none") {
      s.selector = SelectorKind::None;
    } else if (v == "mi_filter") {
      s.selector = SelectorKind::MIFilter;
    } else if (v == "rfe") {
      s.selector = SelectorKind::Rfe;
    } else if (v == "l1_embedded") {
      s.selector = SelectorKind::L1Embedded;
    } else {
      throw ValidationError("unknown selector: " + v);
    }
  }
  s.mi_top_q = j.value("mi_top_q", s.mi_top_q);
  s.rfe_target_k = j.value("rfe_target_k", s.rfe_target_k);
  s.rfe_step = j.value("rfe_step", s.rfe_step);
  s.l1_c = j.value("l1_c", s.l1_c);
  if (j.contains("resampler")) {
    const auto v = j["resampler"].get<std::string>();
    if (v == "none") {
      s.resampler = ResamplerKind::None;
    } else if (v == "smote") {
      s.resampler = ResamplerKind::Smote;
    } else if (v == "ctgan") {
      s.resampler = ResamplerKind::Ctgan;
    } else {
      throw ValidationError("unknown resampler: " + v);
    }
  }
  s.smote_k = j.value("smote_k", s.smote_k);
  s.smote_ratio = j.value("smote_ratio", s.smote_ratio);
  s.validate();
  return s;
}

std::vector<double> equal_frequency_edges(std::vector<double> values,
                                          std::size_t n_bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> edges;
  if (values.empty() || n_bins < 2) return edges;
  for (std::size_t b = 1; b < n_bins; ++b) {
    const std::size_t pos = b * values.size() / n_bins;
    if (pos == 0 || pos >= values.size()) continue;
    const double edge = values[pos];
    if (edges.empty() || edge > edges.back()) edges.push_back(edge);
  }
  return edges;
}

std::size_t bin_of(double v, const std::vector<double>& edges) {
  return static_cast<std::size_t>(
      std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

double mutual_information_discrete(const std::vector<std::uint32_t>& codes,
                                   const std::vector<std::uint8_t>& y) {
  if (codes.size() != y.size()) {
    throw ValidationError("mutual information: length mismatch");
  }
  const std::size_t n = codes.size();
  if (n == 0) return 0.0;
  std::uint32_t k = 0;
  for (std::uint32_t c : codes) k = std::max(k, c + 1);
  std::vector<double> joint(2 * k, 0.0), pa(k, 0.0);
  double py1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    joint[y[i] * k + codes[i]] += 1.0;
    pa[codes[i]] += 1.0;
    py1 += y[i];
  }
  const double inv = 1.0 / static_cast<double>(n);
  const double py[2] = {1.0 - py1 * inv, py1 * inv};
  double mi = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (std::uint32_t a = 0; a < k; ++a) {
      const double pab = joint[c * k + a] * inv;
      if (pab <= 0.0) continue;
      mi += pab * std::log(pab / (pa[a] * inv * py[c]));
    }
  }
  return std::max(0.0, mi);
}

double mutual_information(const std::vector<double>& feature,
                          const std::vector<std::uint8_t>& y,
                          std::size_t n_bins) {
  if (feature.size() != y.size()) {
    throw ValidationError("mutual information: length mismatch");
  }
  const auto edges = equal_frequency_edges(feature, n_bins);
  std::vector<std::uint32_t> codes(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) {
    codes[i] = static_cast<std::uint32_t>(bin_of(feature[i], edges));
  }
  return mutual_information_discrete(codes, y);
}

void FittedPipeline::check_schema(const CaseTable& table) const {
  for (std::size_t i = 0; i < source_columns_.size(); ++i) {
    if (!table.has_column(source_columns_[i])) {
      throw ValidationError("pipeline schema mismatch: missing column " +
                            source_columns_[i]);
    }
    if (table.column(source_columns_[i]).kind != source_kinds_[i]) {
      throw ValidationError("pipeline schema mismatch: column kind changed for " +
                            source_columns_[i]);
    }
  }
}

Matrix FittedPipeline::encode(const CaseTable& table, bool selected_only) const {
  check_schema(table);
  const std::size_t n = table.n_rows();

  // Impute + encode in one pass per encoded feature.
  std::vector<std::size_t> col_index(source_columns_.size());
  for (std::size_t i = 0; i < source_columns_.size(); ++i) {
    col_index[i] = table.column_index(source_columns_[i]);
  }

  // Kept features after the constant drop, then optional selection.
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < encoded_.size(); ++f) {
    if (keep_after_scale_[f]) kept.push_back(f);
  }
  std::vector<std::size_t> emit;
  if (selected_only) {
    emit.reserve(selected_.size());
    for (std::size_t s : selected_) emit.push_back(kept[s]);
  } else {
    emit = kept;
  }

  Matrix out(n, emit.size());
  for (std::size_t e = 0; e < emit.size(); ++e) {
    const EncodedFeature& feat = encoded_[emit[e]];
    const Column& col = table.columns[col_index[feat.src_col]];
    const double mean = means_[emit[e]];
    const double sigma = sigmas_[emit[e]];
    const bool scale = spec_.scaler == ScalerKind::Standardize;
    for (std::size_t r = 0; r < n; ++r) {
      double v = 0.0;
      switch (feat.kind) {
        case EncodedFeature::Kind::Numeric:
          v = col.missing[r] ? numeric_medians_[feat.src_col] : col.nums[r];
          if (!std::isfinite(v)) v = numeric_medians_[feat.src_col];
          break;
        case EncodedFeature::Kind::Boolean:
          v = col.missing[r] ? static_cast<double>(bool_modes_[feat.src_col])
                             : static_cast<double>(col.bools[r]);
          break;
        case EncodedFeature::Kind::OneHot: {
          const std::string& cat =
              col.missing[r] ? cat_modes_[feat.src_col] : col.category(r);
          v = (cat == feat.category) ? 1.0 : 0.0;
          break;
        }
        case EncodedFeature::Kind::Ordinal: {
          const std::string& cat =
              col.missing[r] ? cat_modes_[feat.src_col] : col.category(r);
          const auto& cats = train_categories_[feat.src_col];
          const auto it = std::lower_bound(cats.begin(), cats.end(), cat);
          v = (it != cats.end() && *it == cat)
                  ? static_cast<double>(it - cats.begin())
                  : -1.0;
          break;
        }
      }
      if (scale) v = (v - mean) / sigma;
      out.at(r, e) = v;
    }
  }
  return out;
}

FittedPipeline FittedPipeline::fit(const StageSpec& spec, const CaseTable& train,
                                   Rng& rng) {
  spec.validate();
  if (!train.has_labels()) {
    throw ValidationError("pipeline fit requires labels on the training fold");
  }
  const auto y = train.labels();
  bool saw0 = false, saw1 = false;
  for (std::uint8_t v : y) (v ? saw1 : saw0) = true;
  if (!saw0 || !saw1) {
    throw ValidationError("pipeline fit requires both classes in the training fold");
  }

  FittedPipeline p;
  p.spec_ = spec;
  const std::size_t n = train.n_rows();

  // Stage 1: imputation statistics.
  for (const auto& col : train.columns) {
    if (!is_feature_column(col)) continue;
    p.source_columns_.push_back(col.name);
    p.source_kinds_.push_back(col.kind);
    double median = 0.0;
    std::uint8_t bmode = 0;
    std::string cmode;
    if (col.kind == ColumnKind::Numeric) {
      std::vector<double> present;
      present.reserve(n);
      for (std::size_t r = 0; r < n; ++r) {
        if (!col.missing[r] && std::isfinite(col.nums[r])) present.push_back(col.nums[r]);
      }
      median = median_of(std::move(present));
    } else if (col.kind == ColumnKind::Boolean) {
      std::size_t ones = 0, present = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (!col.missing[r]) {
          ++present;
          ones += col.bools[r];
        }
      }
      bmode = (present > 0 && 2 * ones > present) ? 1 : 0;
    } else {
      std::map<std::string, std::size_t> counts;
      for (std::size_t r = 0; r < n; ++r) {
        if (!col.missing[r]) ++counts[col.category(r)];
      }
      std::size_t best = 0;
      for (const auto& [cat, cnt] : counts) {
        if (cnt > best) {
          best = cnt;
          cmode = cat;
        }
      }
    }
    p.numeric_medians_.push_back(median);
    p.bool_modes_.push_back(bmode);
    p.cat_modes_.push_back(cmode);

    // Stage 2: encoder maps (train categories only, sorted for ordinal).
    std::vector<std::string> cats;
    if (col.kind == ColumnKind::Categorical) {
      std::vector<std::uint8_t> seen(col.dict.size(), 0);
      for (std::size_t r = 0; r < n; ++r) {
        if (!col.missing[r]) seen[col.cats[r]] = 1;
      }
      for (std::size_t c = 0; c < col.dict.size(); ++c) {
        if (seen[c]) cats.push_back(col.dict[c]);
      }
      std::sort(cats.begin(), cats.end());
    }
    p.train_categories_.push_back(std::move(cats));
  }

  for (std::size_t i = 0; i < p.source_columns_.size(); ++i) {
    const ColumnKind kind = p.source_kinds_[i];
    if (kind == ColumnKind::Numeric) {
      p.encoded_.push_back({i, EncodedFeature::Kind::Numeric, 0, "",
                            p.source_columns_[i]});
    } else if (kind == ColumnKind::Boolean) {
      p.encoded_.push_back({i, EncodedFeature::Kind::Boolean, 0, "",
                            p.source_columns_[i]});
    } else if (spec.encoder == EncoderKind::OneHot) {
      for (const auto& cat : p.train_categories_[i]) {
        p.encoded_.push_back({i, EncodedFeature::Kind::OneHot, 0, cat,
                              p.source_columns_[i] + "=" + cat});
      }
    } else {
      p.encoded_.push_back({i, EncodedFeature::Kind::Ordinal, 0, "",
                            p.source_columns_[i] + "#ordinal"});
    }
  }

  // Stage 3: scaler statistics on the raw encoded train matrix.
  p.means_.assign(p.encoded_.size(), 0.0);
  p.sigmas_.assign(p.encoded_.size(), 1.0);
  p.keep_after_scale_.assign(p.encoded_.size(), 1);
  {
    // Temporarily mark everything kept and unscaled to get raw values.
    StageSpec raw = spec;
    raw.scaler = ScalerKind::None;
    std::swap(p.spec_, raw);
    const Matrix m = p.encode(train, /*selected_only=*/false);
    std::swap(p.spec_, raw);
    for (std::size_t f = 0; f < p.encoded_.size(); ++f) {
      double mean = 0.0;
      for (std::size_t r = 0; r < n; ++r) mean += m.at(r, f);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double d = m.at(r, f) - mean;
        var += d * d;
      }
      var /= static_cast<double>(n);
      p.means_[f] = mean;
      p.sigmas_[f] = std::sqrt(var);
      if (spec.scaler == ScalerKind::Standardize && p.sigmas_[f] < 1e-12) {
        p.keep_after_scale_[f] = 0;
        p.dropped_constant_.push_back(p.encoded_[f].name);
        p.sigmas_[f] = 1.0;
      }
      if (p.sigmas_[f] < 1e-12) p.sigmas_[f] = 1.0;
    }
  }

  // Stage 4: feature selection on the scaled train matrix.
  std::vector<std::string> kept_names;
  for (std::size_t f = 0; f < p.encoded_.size(); ++f) {
    if (p.keep_after_scale_[f]) kept_names.push_back(p.encoded_[f].name);
  }
  const Matrix scaled = p.encode(train, /*selected_only=*/false);
  const std::size_t d = scaled.cols;
  std::vector<std::size_t> selected(d);
  std::iota(selected.begin(), selected.end(), std::size_t{0});

  if (spec.selector == SelectorKind::MIFilter) {
    std::vector<double> mi(d);
    std::vector<double> colv(n);
    for (std::size_t f = 0; f < d; ++f) {
      for (std::size_t r = 0; r < n; ++r) colv[r] = scaled.at(r, f);
      mi[f] = mutual_information(colv, y, 10);
    }
    const std::size_t keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(spec.mi_top_q * static_cast<double>(d))));
    std::sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
      if (mi[a] != mi[b]) return mi[a] > mi[b];
      return a < b;
    });
    selected.resize(std::min(keep, selected.size()));
    std::sort(selected.begin(), selected.end());
  } else if (spec.selector == SelectorKind::Rfe) {
    const std::size_t target = std::min(spec.rfe_target_k, d);
    const auto weights = balanced_weights(y);
    while (selected.size() > target) {
      Matrix sub(n, selected.size());
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < selected.size(); ++j) {
          sub.at(r, j) = scaled.at(r, selected[j]);
        }
      }
      LogisticOptions opts;
      opts.l2 = 1.0;
      opts.max_iter = 300;
      opts.tol = 1e-5;
      const auto fit = fit_logistic(sub, y, weights, opts);
      // Drop the lowest-|coefficient| features; ties drop the later index.
      std::vector<std::size_t> order(selected.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double fa = std::abs(fit.weights[a]);
        const double fb = std::abs(fit.weights[b]);
        if (fa != fb) return fa < fb;
        return a > b;
      });
      const std::size_t drop =
          std::min(spec.rfe_step, selected.size() - target);
      std::vector<std::uint8_t> dead(selected.size(), 0);
      for (std::size_t i = 0; i < drop; ++i) dead[order[i]] = 1;
      std::vector<std::size_t> next;
      for (std::size_t j = 0; j < selected.size(); ++j) {
        if (!dead[j]) next.push_back(selected[j]);
      }
      selected = std::move(next);
    }
  } else if (spec.selector == SelectorKind::L1Embedded) {
    LogisticOptions opts;
    opts.l1 = 1.0 / spec.l1_c;
    opts.max_iter = 1000;
    opts.tol = 1e-6;
    const auto fit = fit_logistic(scaled, y, balanced_weights(y), opts);
    std::vector<std::size_t> nonzero;
    for (std::size_t f = 0; f < d; ++f) {
      if (fit.weights[f] != 0.0) nonzero.push_back(f);
    }
    if (nonzero.empty()) {
      // Keep the single largest-|coefficient| feature rather than an
      // empty matrix when the penalty wipes everything out.
      std::size_t best = 0;
      for (std::size_t f = 1; f < d; ++f) {
        if (std::abs(fit.weights[f]) > std::abs(fit.weights[best])) best = f;
      }
      nonzero.push_back(best);
    }
    selected = std::move(nonzero);
  }
  (void)rng;

  p.selected_ = selected;
  p.selected_names_.clear();
  for (std::size_t s : selected) p.selected_names_.push_back(kept_names[s]);
  return p;
}

std::uint64_t FittedPipeline::fingerprint() const {
  Hasher h;
  h.add(spec_.to_json_text());
  for (std::size_t i = 0; i < source_columns_.size(); ++i) {
    h.add(source_columns_[i]);
    h.add_double(numeric_medians_[i]);
    h.add_u64(bool_modes_[i]);
    h.add(cat_modes_[i]);
    for (const auto& c : train_categories_[i]) h.add(c);
  }
  for (std::size_t f = 0; f < encoded_.size(); ++f) {
    h.add(encoded_[f].name);
    h.add_double(means_[f]);
    h.add_double(sigmas_[f]);
    h.add_u64(keep_after_scale_[f]);
  }
  for (std::size_t s : selected_) h.add_u64(s);
  for (const auto& n : dropped_constant_) h.add(n);
  return h.digest();
}

Matrix FittedPipeline::transform(const CaseTable& table) const {
  return encode(table, /*selected_only=*/true);
}

std::pair<FittedPipeline, TrainData> fit_transform_train(const StageSpec& spec,
                                                         const CaseTable& train,
                                                         Rng& rng) {
  FittedPipeline pipeline = FittedPipeline::fit(spec, train, rng);
  TrainData data;
  data.x = pipeline.transform(train);
  data.y = train.labels();

  if (spec.resampler == ResamplerKind::Smote) {
    const std::size_t n = data.x.rows;
    std::vector<std::size_t> minority, majority;
    std::size_t ones = 0;
    for (std::uint8_t v : data.y) ones += v;
    const std::uint8_t minority_class = (2 * ones <= n) ? 1 : 0;
    for (std::size_t i = 0; i < n; ++i) {
      (data.y[i] == minority_class ? minority : majority).push_back(i);
    }
    const std::size_t n_min = minority.size();
    const std::size_t n_maj = majority.size();
    if (n_min < spec.smote_k + 1) {
      throw ValidationError(
          "smote: minority class has " + std::to_string(n_min) +
          " rows, fewer than k_neighbors+1; use a smaller k_neighbors");
    }
    const long long want = std::llround(spec.smote_ratio * static_cast<double>(n_maj));
    const long long need = want - static_cast<long long>(n_min);
    if (need > 0) {
      // k nearest minority neighbors per minority row, Euclidean in the
      // transformed (scaled) space.
      const std::size_t k = spec.smote_k;
      std::vector<std::vector<std::size_t>> neighbors(n_min);
      for (std::size_t i = 0; i < n_min; ++i) {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(n_min - 1);
        const auto a = data.x.row(minority[i]);
        for (std::size_t j = 0; j < n_min; ++j) {
          if (j == i) continue;
          const auto b = data.x.row(minority[j]);
          double d2 = 0.0;
          for (std::size_t c = 0; c < a.size(); ++c) {
            const double diff = a[c] - b[c];
            d2 += diff * diff;
          }
          dist.emplace_back(d2, minority[j]);
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        neighbors[i].reserve(k);
        for (std::size_t j = 0; j < k; ++j) neighbors[i].push_back(dist[j].second);
      }
      Rng smote_rng = rng.stream("smote");
      const std::size_t cols = data.x.cols;
      for (long long s = 0; s < need; ++s) {
        const std::size_t pick =
            static_cast<std::size_t>(smote_rng.next_below(n_min));
        const std::size_t a_row = minority[pick];
        const std::size_t b_row =
            neighbors[pick][smote_rng.next_below(k)];
        const double lambda = smote_rng.next_double();
        const std::size_t new_row = data.x.rows;
        data.x.data.resize((new_row + 1) * cols);
        data.x.rows = new_row + 1;
        for (std::size_t c = 0; c < cols; ++c) {
          const double av = data.x.at(a_row, c);
          const double bv = data.x.at(b_row, c);
          data.x.at(new_row, c) = av + lambda * (bv - av);
        }
        data.y.push_back(minority_class);
        data.audit.resample_records.push_back({a_row, b_row, lambda});
      }
      data.audit.n_synthetic = static_cast<std::size_t>(need);
      data.audit.resample_partition = "train";
    } else {
      data.audit.n_synthetic = 0;
      data.audit.resample_partition = "train";
    }
  }
  data.audit.dropped_constant = pipeline.audit_notes();
  return {std::move(pipeline), std::move(data)};
}

}  // namespace p2pbench
