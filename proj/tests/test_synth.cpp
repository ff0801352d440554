#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "p2pbench/compliance.hpp"
#include "p2pbench/synth.hpp"
#include "test_util.hpp"

using namespace p2pbench;

namespace {

GenConfig small_config(std::size_t n = 1000) {
  GenConfig cfg;
  cfg.n_cases = n;
  cfg.n_vendors = 30;
  cfg.n_users = 15;
  return cfg;
}

}  // namespace

TEST_CASE("generate_master is deterministic and seed-sensitive") {
  GenConfig cfg = small_config();
  Rng r1(cfg.seed, "master");
  Rng r2(cfg.seed, "master");
  const MasterData a = generate_master(cfg, r1);
  const MasterData b = generate_master(cfg, r2);
  REQUIRE(a.vendors.size() == b.vendors.size());
  for (std::size_t i = 0; i < a.vendors.size(); ++i) {
    CHECK(a.vendors[i].id == b.vendors[i].id);
    CHECK(a.vendors[i].age_years == b.vendors[i].age_years);
    CHECK(a.vendors[i].geo == b.vendors[i].geo);
  }

  GenConfig other = cfg;
  other.seed = cfg.seed + 1;
  Rng r3(other.seed, "master");
  const MasterData c = generate_master(other, r3);
  std::multiset<double> ages_a, ages_c;
  for (const auto& v : a.vendors) ages_a.insert(v.age_years);
  for (const auto& v : c.vendors) ages_c.insert(v.age_years);
  CHECK(ages_a != ages_c);
}

TEST_CASE("generate_master single-vendor attributes match the golden file") {
  GenConfig cfg;
  cfg.n_vendors = 1;
  cfg.n_users = 1;
  cfg.n_company_codes = 1;
  cfg.seed = 20260302;
  Rng rng(cfg.seed, "master");
  const MasterData m = generate_master(cfg, rng);
  REQUIRE(m.vendors.size() == 1);
  const auto j =
      nlohmann::json::parse(testutil::read_file(testutil::data_path("golden_master.json")));
  CHECK(m.vendors[0].id == j.at("vendor_id").get<std::string>());
  CHECK(m.vendors[0].age_years == doctest::Approx(j.at("vendor_age").get<double>())
                                      .epsilon(1e-12));
  CHECK(std::string(kVendorGeos[m.vendors[0].geo]) ==
        j.at("vendor_geo").get<std::string>());
  CHECK(m.users[0].tenure_years ==
        doctest::Approx(j.at("actor_tenure").get<double>()).epsilon(1e-12));
}

TEST_CASE("simulate_cases builds clean aligned cases") {
  GenConfig cfg = small_config(10);
  cfg.flow_three_way = 1.0;
  cfg.flow_two_way = 0.0;
  cfg.flow_consignment = 0.0;
  Rng mrng(cfg.seed, "master");
  const MasterData master = generate_master(cfg, mrng);
  Rng crng(cfg.seed, "cases");
  const CaseTable t = simulate_cases(cfg, master, crng);
  CHECK(t.n_rows() == 10);
  const ComplianceConfig rules;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    const double po = t.column("po_amount").nums[r];
    const double tol = std::max(rules.epsilon * po, rules.epsilon_abs);
    CHECK(std::abs(po - t.column("gr_amount").nums[r]) <= tol);
    CHECK(std::abs(t.column("gr_amount").nums[r] -
                   t.column("invoice_amount").nums[r]) <= tol);
    CHECK(t.column("doc_date").times[r] < t.column("gr_date").times[r]);
    CHECK(t.column("gr_date").times[r] < t.column("invoice_date").times[r]);
    CHECK(t.column("invoice_date").times[r] < t.column("payment_date").times[r]);
    CHECK(t.labels()[r] == 0);
  }
}

TEST_CASE("cycle_time_days is definitional on every row") {
  GenConfig cfg = small_config(200);
  const CaseTable t = generate_dataset(cfg);
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    const double expected =
        static_cast<double>(t.column("payment_date").times[r] -
                            t.column("doc_date").times[r]) /
        86400.0;
    CHECK(t.column("cycle_time_days").nums[r] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("log po_amount mean matches the configured mu at large n") {
  GenConfig cfg = small_config(50000);
  cfg.n_vendors = 100;
  Rng mrng(cfg.seed, "master");
  const MasterData master = generate_master(cfg, mrng);
  Rng crng(cfg.seed, "cases");
  const CaseTable t = simulate_cases(cfg, master, crng);
  double sum = 0.0;
  for (double v : t.column("po_amount").nums) sum += std::log(v);
  const double mean = sum / static_cast<double>(t.n_rows());
  // Law of large numbers: 3 sigma / sqrt(n) with sigma = 1.
  CHECK(std::abs(mean - cfg.amount_mu) < 3.0 / std::sqrt(50000.0));
}

TEST_CASE("inject_typologies hits the configured count exactly") {
  GenConfig cfg = small_config(1000);
  cfg.risk_rate = 0.02;
  const CaseTable t = generate_dataset(cfg);
  std::size_t positives = 0;
  for (std::uint8_t v : t.labels()) positives += v;
  CHECK(positives == 20);
  check_label_consistency(t);
}

TEST_CASE("injection changes only the selected rows") {
  GenConfig cfg = small_config(500);
  Rng mrng(cfg.seed, "master");
  const MasterData master = generate_master(cfg, mrng);
  Rng crng(cfg.seed, "cases");
  const CaseTable clean = simulate_cases(cfg, master, crng);
  Rng irng(cfg.seed, "inject");
  const CaseTable injected = inject_typologies(clean, cfg, irng);
  const auto y = injected.labels();
  for (std::size_t r = 0; r < clean.n_rows(); ++r) {
    if (y[r]) continue;
    for (std::size_t c = 0; c < clean.columns.size(); ++c) {
      CHECK(clean.columns[c].cell_equal(r, injected.columns[c], r));
    }
  }
}

TEST_CASE("typology transforms satisfy their defining rules") {
  GenConfig cfg = small_config(4000);
  cfg.risk_rate = 0.05;
  const CaseTable t = generate_dataset(cfg);
  const Column& risk = t.column("risk_type");
  const auto y = t.labels();
  std::map<std::string, std::size_t> counts;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    if (!y[r]) continue;
    const std::string ty = risk.category(r);
    ++counts[ty];
    if (ty == "invoice_before_gr") {
      CHECK(t.column("invoice_date").times[r] < t.column("gr_date").times[r]);
      CHECK(t.column("payment_date").times[r] < t.column("gr_date").times[r]);
      CHECK(t.column("requires_gr").bools[r] == 1);
    } else if (ty == "duplicate_invoice") {
      CHECK(t.column("n_invoices").nums[r] == 2.0);
      CHECK(t.column("dup_inv_gap_days").nums[r] <= 3.0);
      // Two near-identical invoices roughly double the invoiced amount.
      CHECK(t.column("invoice_amount").nums[r] >
            1.8 * t.column("po_amount").nums[r]);
    } else if (ty == "split_purchase") {
      CHECK(t.column("split_count").nums[r] >= 2.0);
      CHECK(t.column("split_count").nums[r] <= 4.0);
      CHECK(t.column("max_subamount").nums[r] < cfg.approval_threshold);
      CHECK(t.column("po_amount").nums[r] > cfg.approval_threshold);
    } else if (ty == "vendor_bank_change") {
      CHECK(t.column("bank_change_recent").bools[r] == 1);
      CHECK(t.column("days_since_bank_change").nums[r] <= 30.0);
    } else if (ty == "round_amount") {
      const double po = t.column("po_amount").nums[r];
      CHECK(std::fmod(po, 1000.0) == 0.0);
    } else if (ty == "excessive_rework") {
      CHECK(t.column("n_rework").nums[r] >= 3.0);
      CHECK(t.column("n_rework").nums[r] <= 8.0);
    }
  }
  CHECK(counts.size() == 6);  // uniform mix at 200 injections hits all six
}

TEST_CASE("typology counts are reproduced by a deterministic re-run") {
  GenConfig cfg = small_config(2000);
  const CaseTable a = generate_dataset(cfg);
  const CaseTable b = generate_dataset(cfg);
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.equals(b));
}

TEST_CASE("generate->inject content hash matches the frozen golden value") {
  GenConfig cfg;  // library defaults, desk scale
  cfg.n_cases = 2000;
  cfg.n_vendors = 50;
  cfg.n_users = 25;
  const CaseTable t = generate_dataset(cfg);
  const auto j = nlohmann::json::parse(
      testutil::read_file(testutil::data_path("golden_dataset_hash.json")));
  CHECK(hex64(t.content_hash()) == j.at("content_hash").get<std::string>());
}

TEST_CASE("injection requires a nonzero budget") {
  GenConfig cfg = small_config(10);
  cfg.risk_rate = 0.01;  // rounds to zero
  Rng mrng(cfg.seed, "master");
  const MasterData master = generate_master(cfg, mrng);
  Rng crng(cfg.seed, "cases");
  const CaseTable clean = simulate_cases(cfg, master, crng);
  Rng irng(cfg.seed, "inject");
  CHECK_THROWS_AS(inject_typologies(clean, cfg, irng), ValidationError);
}

TEST_CASE("data-quality stress masks cells at the configured rate") {
  GenConfig cfg = small_config(10000);
  const CaseTable t = generate_dataset(cfg);
  StressConfig stress;
  stress.kind = StressKind::DataQuality;
  stress.missing_rate = 0.15;
  Rng rng(stress.seed, "stress");
  const CaseTable out = apply_stress(t, stress, rng);

  std::size_t cells = 0, masked = 0;
  for (std::size_t c = 0; c < out.columns.size(); ++c) {
    const Column& col = out.columns[c];
    const bool maskable = col.kind != ColumnKind::Identifier &&
                          col.group != "labels" && col.name != out.time_column;
    if (!maskable) continue;
    for (std::size_t r = 0; r < out.n_rows(); ++r) {
      const bool was_missing = t.columns[c].missing[r] != 0;
      if (was_missing) continue;
      ++cells;
      masked += col.missing[r];
    }
  }
  const double fraction = static_cast<double>(masked) / static_cast<double>(cells);
  // Binomial 99% interval around 0.15 at this cell count.
  CHECK(fraction > 0.141);
  CHECK(fraction < 0.159);

  // Labels are never altered.
  CHECK(out.labels() == t.labels());
  check_label_consistency(out);
}

TEST_CASE("data-quality stress introduces unseen vendors") {
  GenConfig cfg = small_config(2000);
  const CaseTable t = generate_dataset(cfg);
  StressConfig stress;
  stress.kind = StressKind::DataQuality;
  stress.missing_rate = 0.05;
  stress.unseen_vendor_rate = 0.1;
  Rng rng(stress.seed, "stress");
  const CaseTable out = apply_stress(t, stress, rng);
  const std::set<std::string> before(t.column("vendor_id").dict.begin(),
                                     t.column("vendor_id").dict.end());
  std::size_t unseen_rows = 0;
  const Column& v = out.column("vendor_id");
  for (std::size_t r = 0; r < out.n_rows(); ++r) {
    if (!before.count(v.category(r))) ++unseen_rows;
  }
  CHECK(unseen_rows > 100);
  CHECK(unseen_rows < 300);
}

TEST_CASE("identity drift leaves the table unchanged") {
  GenConfig cfg = small_config(500);
  const CaseTable t = generate_dataset(cfg);
  StressConfig stress;
  stress.kind = StressKind::TemporalDrift;
  stress.inflation = 1.0;
  stress.vendor_churn = 0.0;
  Rng rng(stress.seed, "stress");
  const CaseTable out = apply_stress(t, stress, rng);
  CHECK(out.equals(t));
}

TEST_CASE("drift scales monetary values linearly") {
  GenConfig cfg = small_config(2000);
  const CaseTable t = generate_dataset(cfg);
  StressConfig stress;
  stress.kind = StressKind::TemporalDrift;
  stress.inflation = 1.2;
  Rng rng(stress.seed, "stress");
  const CaseTable out = apply_stress(t, stress, rng);
  double before = 0.0, after = 0.0;
  for (double v : t.column("po_amount").nums) before += v;
  for (double v : out.column("po_amount").nums) after += v;
  CHECK(after == doctest::Approx(1.2 * before).epsilon(1e-12));
  // Cycle times scale by alpha^0.25.
  CHECK(out.column("cycle_time_days").nums[0] ==
        doctest::Approx(std::pow(1.2, 0.25) * t.column("cycle_time_days").nums[0])
            .epsilon(1e-12));
}

TEST_CASE("typology shift keeps only held-out typologies plus clean rows") {
  GenConfig cfg = small_config(3000);
  cfg.risk_rate = 0.05;
  const CaseTable t = generate_dataset(cfg);
  StressConfig stress;
  stress.kind = StressKind::TypologyShift;
  stress.held_out_typologies = {Typology::RoundAmount, Typology::SplitPurchase};
  Rng rng(stress.seed, "stress");
  const CaseTable out = apply_stress(t, stress, rng);
  CHECK(out.n_rows() < t.n_rows());
  const auto y = out.labels();
  const Column& risk = out.column("risk_type");
  std::size_t kept_risk = 0;
  for (std::size_t r = 0; r < out.n_rows(); ++r) {
    if (!y[r]) continue;
    ++kept_risk;
    const std::string ty = risk.category(r);
    CHECK((ty == "round_amount" || ty == "split_purchase"));
  }
  CHECK(kept_risk > 0);

  StressConfig empty;
  empty.kind = StressKind::TypologyShift;
  Rng rng2(empty.seed, "stress");
  CHECK_THROWS_AS(apply_stress(t, empty, rng2), ValidationError);
}

TEST_CASE("vendor churn remaps part of the vendor universe") {
  GenConfig cfg = small_config(3000);
  const CaseTable t = generate_dataset(cfg);
  StressConfig stress;
  stress.kind = StressKind::TemporalDrift;
  stress.inflation = 1.1;
  stress.vendor_churn = 0.4;
  Rng rng(stress.seed, "stress");
  const CaseTable out = apply_stress(t, stress, rng);
  std::size_t remapped = 0;
  const Column& v = out.column("vendor_id");
  for (std::size_t r = 0; r < out.n_rows(); ++r) {
    if (v.category(r).rfind("VN-", 0) == 0) ++remapped;
  }
  CHECK(remapped > 0);
  CHECK(out.labels() == t.labels());
}
