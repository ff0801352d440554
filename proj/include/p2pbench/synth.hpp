#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "p2pbench/rng.hpp"
#include "p2pbench/table.hpp"

namespace p2pbench {

enum class Typology {
  DuplicateInvoice,
  SplitPurchase,
  VendorBankChange,
  InvoiceBeforeGR,
  RoundAmount,
  ExcessiveRework,
};

constexpr std::array<Typology, 6> kAllTypologies = {
    Typology::DuplicateInvoice, Typology::SplitPurchase,
    Typology::VendorBankChange, Typology::InvoiceBeforeGR,
    Typology::RoundAmount,      Typology::ExcessiveRework};

std::string to_string(Typology t);
Typology typology_from_string(const std::string& s);

struct GenConfig {
  std::size_t n_cases = 20000;
  double risk_rate = 0.02;
  std::size_t n_vendors = 120;
  std::size_t n_users = 60;
  std::size_t n_company_codes = 8;
  double amount_mu = 8.0;     // log of base PO amount
  double amount_sigma = 1.0;
  double approval_threshold = 10000.0;  // T
  // Mix weight for DuplicateInvoice; the remaining mass is distributed
  // over the other typologies in proportion to typology_mix.
  double dup_rate = 1.0 / 6.0;
  std::array<double, 6> typology_mix = {1.0 / 6, 1.0 / 6, 1.0 / 6,
                                        1.0 / 6, 1.0 / 6, 1.0 / 6};
  // Clean-case flow mix (three-way / two-way / consignment). The default
  // 70/25/5 is a modeling choice, not a published value.
  double flow_three_way = 0.70;
  double flow_two_way = 0.25;
  double flow_consignment = 0.05;
  // Fraction of vendors eligible to carry injected risk (1.0 = any vendor).
  // Values < 1 concentrate risk on an entity subset, which is what makes
  // group-aware splitting matter.
  double risky_vendor_fraction = 1.0;
  std::int64_t start_date = 1735689600;  // 2025-01-01T00:00:00Z
  double span_days = 730.0;
  std::uint64_t seed = 20260302;

  void validate() const;
  std::array<double, 6> effective_mix() const;
  std::string to_json_text() const;
  static GenConfig parse_json_text(const std::string& text);
  static GenConfig load(const std::string& path);
  std::uint64_t config_hash() const;
};

struct MasterData {
  struct Vendor {
    std::string id;
    double age_years;
    std::uint32_t geo;  // index into kVendorGeos
    bool risk_eligible;
  };
  struct User {
    std::string id;
    std::uint32_t role;  // index into kActorRoles
    double tenure_years;
    double override_rate;
  };
  std::vector<Vendor> vendors;
  std::vector<User> users;
  std::vector<std::string> company_codes;
};

extern const std::array<const char*, 8> kVendorGeos;
extern const std::array<const char*, 5> kActorRoles;

// Stage 1: vendors, users and organizational units from fixed category
// domains with per-entity derived rng streams.
MasterData generate_master(const GenConfig& config, Rng& rng);

// Stage 2: clean procure-to-pay cases in the canonical schema, y_risk all 0.
CaseTable simulate_cases(const GenConfig& config, const MasterData& master,
                         Rng& rng);

// Stage 3: rule-based typology injection at round-half-even(n * risk_rate).
// Only selected rows change; each gets y_risk=1, risk_type and scenario_id.
CaseTable inject_typologies(const CaseTable& table, const GenConfig& config,
                            Rng& rng);

// Convenience: master -> cases -> injection with streams derived from
// config.seed.
CaseTable generate_dataset(const GenConfig& config);

enum class StressKind { TypologyShift, DataQuality, TemporalDrift };

std::string to_string(StressKind k);
StressKind stress_kind_from_string(const std::string& s);

struct StressConfig {
  StressKind kind = StressKind::DataQuality;
  std::set<Typology> held_out_typologies;  // TypologyShift
  double missing_rate = 0.15;              // m, DataQuality
  double unseen_vendor_rate = 0.0;         // DataQuality
  double inflation = 1.0;                  // alpha, TemporalDrift
  double vendor_churn = 0.0;               // beta, TemporalDrift
  // Drift applies to rows at or after this time quantile (0 = whole table).
  double drift_onset_fraction = 0.0;
  std::uint64_t seed = 20260303;

  void validate() const;
  std::string to_json_text() const;
  static StressConfig parse_json_text(const std::string& text);
  static StressConfig load(const std::string& path);
};

CaseTable apply_stress(const CaseTable& table, const StressConfig& stress,
                       Rng& rng);

// Every y_risk=1 row has risk_type and scenario_id; y_risk=0 rows have
// neither. Throws ValidationError on violation.
void check_label_consistency(const CaseTable& table);

}  // namespace p2pbench
