#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p2pbench/rng.hpp"
#include "p2pbench/table.hpp"

namespace p2pbench {

enum class EncoderKind { OneHot, Ordinal };
enum class ScalerKind { Standardize, None };
enum class SelectorKind { None, MIFilter, Rfe, L1Embedded };
enum class ResamplerKind { None, Smote, Ctgan };

std::string to_string(EncoderKind k);
std::string to_string(ScalerKind k);
std::string to_string(SelectorKind k);
std::string to_string(ResamplerKind k);

// Fixed stage order: impute -> encode -> scale -> select -> resample.
// There is deliberately no way to reorder it.
struct StageSpec {
  EncoderKind encoder = EncoderKind::OneHot;
  ScalerKind scaler = ScalerKind::Standardize;
  SelectorKind selector = SelectorKind::None;
  double mi_top_q = 0.5;
  std::size_t rfe_target_k = 16;
  std::size_t rfe_step = 1;
  double l1_c = 1.0;
  ResamplerKind resampler = ResamplerKind::None;
  std::size_t smote_k = 5;
  double smote_ratio = 0.2;

  void validate() const;
  std::string to_json_text() const;
  static StageSpec parse_json_text(const std::string& text);
};

struct ResampleRecord {
  std::size_t a = 0;  // train-matrix row indices of the endpoints
  std::size_t b = 0;
  double lambda = 0.0;
};

struct PipelineAudit {
  std::vector<std::string> dropped_constant;
  std::size_t n_synthetic = 0;
  std::string resample_partition;  // always "train" when resampling ran
  std::vector<ResampleRecord> resample_records;
};

// Train-fold-fitted transform chain. All statistics are fitted once by
// fit(); transform() never mutates them.
class FittedPipeline {
 public:
  static FittedPipeline fit(const StageSpec& spec, const CaseTable& train,
                            Rng& rng);

  // Transform-only application with train statistics; unseen categories
  // one-hot to all-zeros, missing cells take train medians/modes. Never
  // resamples.
  Matrix transform(const CaseTable& table) const;

  const std::vector<std::string>& feature_names() const { return selected_names_; }
  const std::vector<std::string>& audit_notes() const { return dropped_constant_; }
  const StageSpec& spec() const { return spec_; }

  // Hash of every fitted statistic; used by the leakage sentinel check.
  std::uint64_t fingerprint() const;

 private:
  struct EncodedFeature {
    std::size_t src_col = 0;
    enum class Kind { Numeric, Boolean, OneHot, Ordinal } kind = Kind::Numeric;
    std::uint32_t code = 0;       // one-hot: source dictionary code
    std::string category;         // one-hot/ordinal matching is by string
    std::string name;
  };

  Matrix encode(const CaseTable& table, bool selected_only) const;
  void check_schema(const CaseTable& table) const;

  StageSpec spec_;
  std::vector<std::string> source_columns_;      // feature-eligible columns
  std::vector<ColumnKind> source_kinds_;
  std::vector<double> numeric_medians_;          // per source column (or 0)
  std::vector<std::uint8_t> bool_modes_;
  std::vector<std::string> cat_modes_;
  std::vector<std::vector<std::string>> train_categories_;  // per source col
  std::vector<EncodedFeature> encoded_;          // pre-drop layout
  std::vector<double> means_, sigmas_;           // per encoded feature
  std::vector<std::uint8_t> keep_after_scale_;   // constant-drop mask
  std::vector<std::size_t> selected_;            // indices into kept features
  std::vector<std::string> selected_names_;
  std::vector<std::string> dropped_constant_;

  friend std::pair<FittedPipeline, struct TrainData> fit_transform_train(
      const StageSpec&, const CaseTable&, Rng&);
};

struct TrainData {
  Matrix x;                      // resampled training matrix
  std::vector<std::uint8_t> y;  // aligned labels
  PipelineAudit audit;
};

// Algorithm line order: fit stages on the training fold only, produce the
// resampled training matrix. Synthetic minority rows are appended last and
// every interpolation endpoint is recorded.
std::pair<FittedPipeline, TrainData> fit_transform_train(const StageSpec& spec,
                                                         const CaseTable& train,
                                                         Rng& rng);

// Plug-in mutual information in nats; numeric features are discretized
// into equal-frequency bins (at most n_bins) before counting.
double mutual_information(const std::vector<double>& feature,
                          const std::vector<std::uint8_t>& y,
                          std::size_t n_bins = 10);
double mutual_information_discrete(const std::vector<std::uint32_t>& codes,
                                   const std::vector<std::uint8_t>& y);

// Equal-frequency bin assignment used by the MI filter and the EBM;
// returns edges (strictly increasing interior cut points).
std::vector<double> equal_frequency_edges(std::vector<double> values,
                                          std::size_t n_bins);
std::size_t bin_of(double v, const std::vector<double>& edges);

}  // namespace p2pbench
