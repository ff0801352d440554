#include "p2pbench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace p2pbench {

namespace {

using json = nlohmann::ordered_json;

constexpr double kSecondsPerDay = 86400.0;
// Clean-case alignment noise, as a fraction of the default labeling
// tolerance 0.005 * po. Two independent draws stay within tolerance of
// each other (0.4 + 0.4 < 1).
constexpr double kAlignNoise = 0.4 * 0.005;

double round_half_even(double x) {
  const double f = std::floor(x);
  const double frac = x - f;
  if (frac > 0.5) return f + 1.0;
  if (frac < 0.5) return f;
  return (std::fmod(f, 2.0) == 0.0) ? f : f + 1.0;
}

std::string zero_pad(std::uint64_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

// Deterministic vendor subset selection that works on any table, not just
// freshly generated ones: a vendor is in the q-fraction subset iff the
// hash of (tag, vendor id) falls below q.
bool vendor_in_fraction(const std::string& vendor_id, double q,
                        std::uint64_t tag) {
  if (q >= 1.0) return true;
  if (q <= 0.0) return false;
  Hasher h;
  h.add_u64(tag);
  h.add(vendor_id);
  const double u = static_cast<double>(mix64(h.digest()) >> 11) * 0x1.0p-53;
  return u < q;
}

// Column indices resolved once per table.
struct Cols {
  std::size_t case_id, doc_id, vendor_id, company_id;
  std::size_t po, gr, inv, paid;
  std::size_t gap_po_gr, gap_gr_inv, gap_po_inv;
  std::size_t doc_date, gr_date, inv_date, pay_date;
  std::size_t flow, requires_gr, gr_based_iv, blocked;
  std::size_t n_gr, n_invoices, n_rework, cycle, split_count, max_sub, dup_gap;
  std::size_t v_age, v_geo, bank_recent, bank_days;
  std::size_t role, tenure, override_rate;
  std::size_t y, risk_type, scenario;

  explicit Cols(const CaseTable& t)
      : case_id(t.column_index("case_id")),
        doc_id(t.column_index("doc_id")),
        vendor_id(t.column_index("vendor_id")),
        company_id(t.column_index("company_id")),
        po(t.column_index("po_amount")),
        gr(t.column_index("gr_amount")),
        inv(t.column_index("invoice_amount")),
        paid(t.column_index("paid_amount")),
        gap_po_gr(t.column_index("po_gr_gap_rel")),
        gap_gr_inv(t.column_index("gr_inv_gap_rel")),
        gap_po_inv(t.column_index("po_inv_gap_rel")),
        doc_date(t.column_index("doc_date")),
        gr_date(t.column_index("gr_date")),
        inv_date(t.column_index("invoice_date")),
        pay_date(t.column_index("payment_date")),
        flow(t.column_index("flow_type")),
        requires_gr(t.column_index("requires_gr")),
        gr_based_iv(t.column_index("gr_based_iv")),
        blocked(t.column_index("invoice_blocked")),
        n_gr(t.column_index("n_goods_receipts")),
        n_invoices(t.column_index("n_invoices")),
        n_rework(t.column_index("n_rework")),
        cycle(t.column_index("cycle_time_days")),
        split_count(t.column_index("split_count")),
        max_sub(t.column_index("max_subamount")),
        dup_gap(t.column_index("dup_inv_gap_days")),
        v_age(t.column_index("vendor_age")),
        v_geo(t.column_index("vendor_geo")),
        bank_recent(t.column_index("bank_change_recent")),
        bank_days(t.column_index("days_since_bank_change")),
        role(t.column_index("actor_role")),
        tenure(t.column_index("actor_tenure")),
        override_rate(t.column_index("override_rate")),
        y(t.column_index("y_risk")),
        risk_type(t.column_index("risk_type")),
        scenario(t.column_index("scenario_id")) {}
};

// Cycle time is definitional; the gap features are deviations from the
// alignment the active flow expects (consignment expects no invoice).
void recompute_derived(CaseTable& t, const Cols& c, std::size_t r) {
  auto& cols = t.columns;
  const double po = cols[c.po].nums[r];
  const double gr = cols[c.gr].nums[r];
  const double inv = cols[c.inv].nums[r];
  const double denom = std::max(po, 1.0);
  const bool consignment = cols[c.flow].category(r) == std::string("consignment");
  cols[c.gap_po_gr].nums[r] = std::abs(po - gr) / denom;
  if (consignment) {
    cols[c.gap_gr_inv].nums[r] = inv / denom;
    cols[c.gap_po_inv].nums[r] = inv / denom;
  } else {
    cols[c.gap_gr_inv].nums[r] = std::abs(gr - inv) / denom;
    cols[c.gap_po_inv].nums[r] = std::abs(po - inv) / denom;
  }
  cols[c.cycle].nums[r] =
      static_cast<double>(cols[c.pay_date].times[r] - cols[c.doc_date].times[r]) /
      kSecondsPerDay;
}

CaseTable make_canonical_table() {
  CaseTable t;
  t.add_column("case_id", ColumnKind::Identifier, "identifiers");
  t.add_column("doc_id", ColumnKind::Identifier, "identifiers");
  t.add_column("vendor_id", ColumnKind::Categorical, "identifiers");
  t.add_column("company_id", ColumnKind::Categorical, "identifiers");
  t.add_column("po_amount", ColumnKind::Numeric, "monetary");
  t.add_column("gr_amount", ColumnKind::Numeric, "monetary");
  t.add_column("invoice_amount", ColumnKind::Numeric, "monetary");
  t.add_column("paid_amount", ColumnKind::Numeric, "monetary");
  t.add_column("po_gr_gap_rel", ColumnKind::Numeric, "monetary");
  t.add_column("gr_inv_gap_rel", ColumnKind::Numeric, "monetary");
  t.add_column("po_inv_gap_rel", ColumnKind::Numeric, "monetary");
  t.add_column("doc_date", ColumnKind::Datetime, "dates");
  t.add_column("gr_date", ColumnKind::Datetime, "dates");
  t.add_column("invoice_date", ColumnKind::Datetime, "dates");
  t.add_column("payment_date", ColumnKind::Datetime, "dates");
  t.add_column("flow_type", ColumnKind::Categorical, "flags");
  t.add_column("requires_gr", ColumnKind::Boolean, "flags");
  t.add_column("gr_based_iv", ColumnKind::Boolean, "flags");
  t.add_column("invoice_blocked", ColumnKind::Boolean, "flags");
  t.add_column("n_goods_receipts", ColumnKind::Numeric, "process");
  t.add_column("n_invoices", ColumnKind::Numeric, "process");
  t.add_column("n_rework", ColumnKind::Numeric, "process");
  t.add_column("cycle_time_days", ColumnKind::Numeric, "process");
  t.add_column("split_count", ColumnKind::Numeric, "process");
  t.add_column("max_subamount", ColumnKind::Numeric, "process");
  t.add_column("dup_inv_gap_days", ColumnKind::Numeric, "process");
  t.add_column("vendor_age", ColumnKind::Numeric, "vendor");
  t.add_column("vendor_geo", ColumnKind::Categorical, "vendor");
  t.add_column("bank_change_recent", ColumnKind::Boolean, "vendor");
  t.add_column("days_since_bank_change", ColumnKind::Numeric, "vendor");
  t.add_column("actor_role", ColumnKind::Categorical, "user");
  t.add_column("actor_tenure", ColumnKind::Numeric, "user");
  t.add_column("override_rate", ColumnKind::Numeric, "user");
  t.add_column("y_risk", ColumnKind::Boolean, "labels");
  t.add_column("risk_type", ColumnKind::Categorical, "labels");
  t.add_column("scenario_id", ColumnKind::Categorical, "labels");
  t.group_key_columns = {"vendor_id"};
  t.time_column = "doc_date";
  return t;
}

}  // namespace

const std::array<const char*, 8> kVendorGeos = {
    "north_america", "south_america", "western_europe", "eastern_europe",
    "middle_east",   "africa",        "east_asia",      "oceania"};

const std::array<const char*, 5> kActorRoles = {
    "buyer", "approver", "ap_clerk", "warehouse", "admin"};

std::string to_string(Typology t) {
  switch (t) {
    case Typology::DuplicateInvoice: return "duplicate_invoice";
    case Typology::SplitPurchase: return "split_purchase";
    case Typology::VendorBankChange: return "vendor_bank_change";
    case Typology::InvoiceBeforeGR: return "invoice_before_gr";
    case Typology::RoundAmount: return "round_amount";
    case Typology::ExcessiveRework: return "excessive_rework";
  }
  return "duplicate_invoice";
}

Typology typology_from_string(const std::string& s) {
  for (Typology t : kAllTypologies) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError("unknown typology: " + s);
}

std::string to_string(StressKind k) {
  switch (k) {
    case StressKind::TypologyShift: return "typology_shift";
    case StressKind::DataQuality: return "data_quality";
    case StressKind::TemporalDrift: return "temporal_drift";
  }
  return "data_quality";
}

StressKind stress_kind_from_string(const std::string& s) {
  if (s == "typology_shift") return StressKind::TypologyShift;
  if (s == "data_quality") return StressKind::DataQuality;
  if (s == "temporal_drift") return StressKind::TemporalDrift;
  throw ValidationError("unknown stress kind: " + s);
}

void GenConfig::validate() const {
  if (n_cases == 0) throw ValidationError("n_cases must be > 0");
  if (!(risk_rate > 0.0 && risk_rate < 0.5)) {
    throw ValidationError("risk_rate must be in (0, 0.5)");
  }
  if (n_vendors == 0 || n_users == 0 || n_company_codes == 0) {
    throw ValidationError("master-data counts must be > 0");
  }
  if (approval_threshold <= 0.0) throw ValidationError("approval threshold T must be > 0");
  double mix_sum = 0.0;
  for (double w : typology_mix) {
    if (w < 0.0) throw ValidationError("typology mix weights must be >= 0");
    mix_sum += w;
  }
  if (mix_sum <= 0.0) throw ValidationError("typology mix must have positive mass");
  if (dup_rate < 0.0 || dup_rate > 1.0) throw ValidationError("dup_rate must be in [0, 1]");
  if (risky_vendor_fraction <= 0.0 || risky_vendor_fraction > 1.0) {
    throw ValidationError("risky_vendor_fraction must be in (0, 1]");
  }
  const double flows = flow_three_way + flow_two_way + flow_consignment;
  if (flow_three_way < 0 || flow_two_way < 0 || flow_consignment < 0 || flows <= 0) {
    throw ValidationError("flow mix must be nonnegative with positive mass");
  }
}

std::array<double, 6> GenConfig::effective_mix() const {
  std::array<double, 6> mix = typology_mix;
  const std::size_t dup = 0;  // DuplicateInvoice slot
  double rest = 0.0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (i != dup) rest += mix[i];
  }
  std::array<double, 6> out{};
  out[dup] = dup_rate;
  const double scale = rest > 0.0 ? (1.0 - dup_rate) / rest : 0.0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (i != dup) out[i] = mix[i] * scale;
  }
  return out;
}

std::string GenConfig::to_json_text() const {
  json j;
  j["n_cases"] = n_cases;
  j["risk_rate"] = risk_rate;
  j["n_vendors"] = n_vendors;
  j["n_users"] = n_users;
  j["n_company_codes"] = n_company_codes;
  j["amount_mu"] = amount_mu;
  j["amount_sigma"] = amount_sigma;
  j["approval_threshold"] = approval_threshold;
  j["dup_rate"] = dup_rate;
  j["typology_mix"] = typology_mix;
  j["flow_three_way"] = flow_three_way;
  j["flow_two_way"] = flow_two_way;
  j["flow_consignment"] = flow_consignment;
  j["risky_vendor_fraction"] = risky_vendor_fraction;
  j["start_date"] = start_date;
  j["span_days"] = span_days;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

GenConfig GenConfig::parse_json_text(const std::string& text) {
  json j = json::parse(text);
  GenConfig c;
  c.n_cases = j.value("n_cases", c.n_cases);
  c.risk_rate = j.value("risk_rate", c.risk_rate);
  c.n_vendors = j.value("n_vendors", c.n_vendors);
  c.n_users = j.value("n_users", c.n_users);
  c.n_company_codes = j.value("n_company_codes", c.n_company_codes);
  c.amount_mu = j.value("amount_mu", c.amount_mu);
  c.amount_sigma = j.value("amount_sigma", c.amount_sigma);
  c.approval_threshold = j.value("approval_threshold", c.approval_threshold);
  c.dup_rate = j.value("dup_rate", c.dup_rate);
  if (j.contains("typology_mix")) {
    auto v = j["typology_mix"].get<std::vector<double>>();
    if (v.size() != 6) throw ValidationError("typology_mix must have 6 weights");
    std::copy(v.begin(), v.end(), c.typology_mix.begin());
  }
  c.flow_three_way = j.value("flow_three_way", c.flow_three_way);
  c.flow_two_way = j.value("flow_two_way", c.flow_two_way);
  c.flow_consignment = j.value("flow_consignment", c.flow_consignment);
  c.risky_vendor_fraction = j.value("risky_vendor_fraction", c.risky_vendor_fraction);
  c.start_date = j.value("start_date", c.start_date);
  c.span_days = j.value("span_days", c.span_days);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

GenConfig GenConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str());
}

std::uint64_t GenConfig::config_hash() const {
  return fnv1a64(to_json_text());
}

MasterData generate_master(const GenConfig& config, Rng& rng) {
  config.validate();
  MasterData m;
  m.vendors.reserve(config.n_vendors);
  const std::size_t n_eligible = static_cast<std::size_t>(
      std::ceil(config.risky_vendor_fraction * static_cast<double>(config.n_vendors)));
  for (std::size_t i = 0; i < config.n_vendors; ++i) {
    Rng vr = rng.stream(i);
    MasterData::Vendor v;
    v.id = "V" + zero_pad(i + 1, 5);
    v.age_years = vr.uniform(0.0, 30.0);
    v.geo = static_cast<std::uint32_t>(vr.next_below(kVendorGeos.size()));
    v.risk_eligible =
        config.risky_vendor_fraction >= 1.0
            ? true
            : vendor_in_fraction(v.id, config.risky_vendor_fraction, config.seed) ||
                  i < 1;  // never an empty eligible set
    m.vendors.push_back(std::move(v));
  }
  // Guarantee the configured fraction is roughly honored even for tiny
  // vendor counts: if hashing selected nobody, fall back to a prefix.
  std::size_t eligible_count = 0;
  for (const auto& v : m.vendors) eligible_count += v.risk_eligible ? 1 : 0;
  if (eligible_count == 0) {
    for (std::size_t i = 0; i < std::max<std::size_t>(1, n_eligible); ++i) {
      m.vendors[i].risk_eligible = true;
    }
  }
  Rng ur = rng.stream("users");
  m.users.reserve(config.n_users);
  for (std::size_t i = 0; i < config.n_users; ++i) {
    Rng r = ur.stream(i);
    MasterData::User u;
    u.id = "U" + zero_pad(i + 1, 4);
    u.role = static_cast<std::uint32_t>(r.next_below(kActorRoles.size()));
    u.tenure_years = r.uniform(0.5, 30.0);
    u.override_rate = r.uniform(0.0, 0.15);
    m.users.push_back(std::move(u));
  }
  m.company_codes.reserve(config.n_company_codes);
  for (std::size_t i = 0; i < config.n_company_codes; ++i) {
    m.company_codes.push_back("CC" + zero_pad(i + 1, 2));
  }
  return m;
}

CaseTable simulate_cases(const GenConfig& config, const MasterData& master,
                         Rng& rng) {
  config.validate();
  if (master.vendors.empty() || master.users.empty() ||
      master.company_codes.empty()) {
    throw ValidationError("master tables must be nonempty");
  }
  CaseTable t = make_canonical_table();
  const Cols c(t);
  for (auto& col : t.columns) col.reserve(config.n_cases);

  const std::vector<double> flow_mix = {config.flow_three_way, config.flow_two_way,
                                        config.flow_consignment};
  for (std::size_t i = 0; i < config.n_cases; ++i) {
    Rng r = rng.stream(i);
    auto& cols = t.columns;
    cols[c.case_id].push_id("C" + zero_pad(i + 1, 7));
    cols[c.doc_id].push_id("D" + zero_pad(i + 1, 7));
    const auto& vendor = master.vendors[r.next_below(master.vendors.size())];
    const auto& user = master.users[r.next_below(master.users.size())];
    cols[c.vendor_id].push_cat(vendor.id);
    cols[c.company_id].push_cat(
        master.company_codes[r.next_below(master.company_codes.size())]);

    double po = r.lognormal(config.amount_mu, config.amount_sigma);
    po = std::clamp(po, 25.0, 500000.0);
    po = std::round(po * 100.0) / 100.0;
    const std::size_t flow = r.choice(flow_mix);
    const char* flow_name =
        flow == 0 ? "three_way" : (flow == 1 ? "two_way" : "consignment");
    const double gr_amt =
        std::round(po * (1.0 + r.uniform(-kAlignNoise, kAlignNoise)) * 100.0) / 100.0;
    double inv_amt =
        std::round(po * (1.0 + r.uniform(-kAlignNoise, kAlignNoise)) * 100.0) / 100.0;
    double paid_amt = inv_amt;
    if (flow == 2) {
      inv_amt = 0.0;  // consignment settles off the purchase order
      paid_amt = 0.0;
    }
    cols[c.po].push_num(po);
    cols[c.gr].push_num(gr_amt);
    cols[c.inv].push_num(inv_amt);
    cols[c.paid].push_num(paid_amt);
    cols[c.gap_po_gr].push_num(0.0);
    cols[c.gap_gr_inv].push_num(0.0);
    cols[c.gap_po_inv].push_num(0.0);

    const std::int64_t doc_date =
        config.start_date +
        static_cast<std::int64_t>(r.uniform(0.0, config.span_days) * kSecondsPerDay);
    const std::int64_t gr_date =
        doc_date + static_cast<std::int64_t>(r.uniform(1.0, 20.0) * kSecondsPerDay);
    const std::int64_t inv_date =
        gr_date + static_cast<std::int64_t>(r.uniform(1.0, 15.0) * kSecondsPerDay);
    const std::int64_t pay_date =
        inv_date + static_cast<std::int64_t>(r.uniform(5.0, 45.0) * kSecondsPerDay);
    cols[c.doc_date].push_time(doc_date);
    cols[c.gr_date].push_time(gr_date);
    cols[c.inv_date].push_time(inv_date);
    cols[c.pay_date].push_time(pay_date);

    cols[c.flow].push_cat(flow_name);
    cols[c.requires_gr].push_bool(flow == 0);
    cols[c.gr_based_iv].push_bool(flow == 0 && r.bernoulli(0.5));
    cols[c.blocked].push_bool(r.bernoulli(0.04));

    cols[c.n_gr].push_num(flow == 1 ? 0.0 : static_cast<double>(r.uniform_int(1, 3)));
    cols[c.n_invoices].push_num(flow == 2 ? 0.0 : 1.0);
    cols[c.n_rework].push_num(r.bernoulli(0.2) ? 1.0 : 0.0);
    cols[c.cycle].push_num(0.0);
    cols[c.split_count].push_num(1.0);
    cols[c.max_sub].push_num(po);
    cols[c.dup_gap].push_num(0.0);

    cols[c.v_age].push_num(vendor.age_years);
    cols[c.v_geo].push_cat(kVendorGeos[vendor.geo]);
    cols[c.bank_recent].push_bool(false);
    cols[c.bank_days].push_num(std::round(r.uniform(180.0, 2000.0)));
    cols[c.role].push_cat(kActorRoles[user.role]);
    cols[c.tenure].push_num(user.tenure_years);
    cols[c.override_rate].push_num(user.override_rate);

    cols[c.y].push_bool(false);
    cols[c.risk_type].push_cat_missing();
    cols[c.scenario].push_cat_missing();

    recompute_derived(t, c, i);
  }
  t.validate();
  return t;
}

namespace {

void transform_case(CaseTable& t, const Cols& c, std::size_t r, Typology ty,
                    const GenConfig& config, Rng& row_rng) {
  auto& cols = t.columns;
  Rng& rr = row_rng;
  switch (ty) {
    case Typology::DuplicateInvoice: {
      // Case-level encoding: two near-identical invoices booked and paid.
      const double po = cols[c.po].nums[r];
      const double first = po * (1.0 + rr.uniform(-kAlignNoise, kAlignNoise));
      const double second = first * (1.0 + rr.uniform(-0.005, 0.005));
      const double total = std::round((first + second) * 100.0) / 100.0;
      cols[c.inv].nums[r] = total;
      cols[c.paid].nums[r] = total;
      cols[c.n_invoices].nums[r] = 2.0;
      cols[c.dup_gap].nums[r] = rr.uniform(0.1, 3.0);
      break;
    }
    case Typology::SplitPurchase: {
      const std::int64_t k = rr.uniform_int(2, 4);
      double total = 0.0;
      double max_sub = 0.0;
      for (std::int64_t i = 0; i < k; ++i) {
        const double sub = rr.uniform(0.55, 0.95) * config.approval_threshold;
        total += sub;
        max_sub = std::max(max_sub, sub);
      }
      total = std::round(total * 100.0) / 100.0;
      cols[c.po].nums[r] = total;
      cols[c.gr].nums[r] =
          std::round(total * (1.0 + rr.uniform(-kAlignNoise, kAlignNoise)) * 100.0) /
          100.0;
      const bool consignment = cols[c.flow].category(r) == std::string("consignment");
      const double inv_amt =
          std::round(total * (1.0 + rr.uniform(-kAlignNoise, kAlignNoise)) * 100.0) /
          100.0;
      cols[c.inv].nums[r] = consignment ? 0.0 : inv_amt;
      cols[c.paid].nums[r] = cols[c.inv].nums[r];
      cols[c.split_count].nums[r] = static_cast<double>(k);
      cols[c.max_sub].nums[r] = std::round(max_sub * 100.0) / 100.0;
      break;
    }
    case Typology::VendorBankChange: {
      cols[c.bank_recent].bools[r] = 1;
      cols[c.bank_days].nums[r] = std::round(rr.uniform(0.0, 30.0));
      break;
    }
    case Typology::InvoiceBeforeGR: {
      // Invoice and clearance both land before goods receipt.
      cols[c.flow].cats[r] = cols[c.flow].intern("three_way");
      cols[c.requires_gr].bools[r] = 1;
      const std::int64_t doc = cols[c.doc_date].times[r];
      const std::int64_t inv_date =
          doc + static_cast<std::int64_t>(rr.uniform(1.0, 5.0) * kSecondsPerDay);
      const std::int64_t pay_date =
          inv_date + static_cast<std::int64_t>(rr.uniform(1.0, 5.0) * kSecondsPerDay);
      const std::int64_t gr_date =
          pay_date + static_cast<std::int64_t>(rr.uniform(1.0, 10.0) * kSecondsPerDay);
      cols[c.inv_date].times[r] = inv_date;
      cols[c.pay_date].times[r] = pay_date;
      cols[c.gr_date].times[r] = gr_date;
      // A consignment case would have no invoice; restore an aligned one.
      if (cols[c.inv].nums[r] == 0.0) {
        const double po = cols[c.po].nums[r];
        cols[c.inv].nums[r] =
            std::round(po * (1.0 + rr.uniform(-kAlignNoise, kAlignNoise)) * 100.0) /
            100.0;
        cols[c.paid].nums[r] = cols[c.inv].nums[r];
        cols[c.n_invoices].nums[r] = 1.0;
      }
      break;
    }
    case Typology::RoundAmount: {
      double po = std::max(1000.0, std::round(cols[c.po].nums[r] / 1000.0) * 1000.0);
      cols[c.po].nums[r] = po;
      cols[c.gr].nums[r] =
          std::round(po * (1.0 + rr.uniform(-kAlignNoise, kAlignNoise)) * 100.0) / 100.0;
      const bool consignment = cols[c.flow].category(r) == std::string("consignment");
      const double inv_amt =
          std::round(po * (1.0 + rr.uniform(-kAlignNoise, kAlignNoise)) * 100.0) / 100.0;
      cols[c.inv].nums[r] = consignment ? 0.0 : inv_amt;
      cols[c.paid].nums[r] = cols[c.inv].nums[r];
      cols[c.max_sub].nums[r] = po;
      break;
    }
    case Typology::ExcessiveRework: {
      const std::int64_t reworks = rr.uniform_int(3, 8);
      cols[c.n_rework].nums[r] = static_cast<double>(reworks);
      cols[c.pay_date].times[r] += static_cast<std::int64_t>(
          static_cast<double>(reworks) * rr.uniform(2.0, 6.0) * kSecondsPerDay);
      cols[c.blocked].bools[r] = rr.bernoulli(0.6) ? 1 : 0;
      break;
    }
  }
  cols[c.y].bools[r] = 1;
  cols[c.risk_type].cats[r] = cols[c.risk_type].intern(to_string(ty));
  cols[c.risk_type].missing[r] = 0;
  cols[c.scenario].cats[r] = cols[c.scenario].intern("inject:" + to_string(ty));
  cols[c.scenario].missing[r] = 0;
  recompute_derived(t, c, r);
}

}  // namespace

CaseTable inject_typologies(const CaseTable& table, const GenConfig& config,
                            Rng& rng) {
  config.validate();
  const std::size_t n = table.n_rows();
  const auto y = table.labels();
  for (std::uint8_t v : y) {
    if (v != 0) throw ValidationError("inject_typologies expects y_risk all 0");
  }
  const std::size_t count = static_cast<std::size_t>(
      round_half_even(static_cast<double>(n) * config.risk_rate));
  if (count < 1) {
    throw ValidationError("no injectable budget: n * risk_rate rounds to 0");
  }

  CaseTable out = table;
  const Cols c(out);
  const Column& vendors = out.columns[c.vendor_id];
  std::vector<std::size_t> eligible;
  eligible.reserve(n);
  // Eligibility is resolved per distinct vendor value so it is stable
  // across tables sharing the same vendor universe.
  std::vector<std::uint8_t> vendor_ok(vendors.dict.size(), 0);
  for (std::size_t v = 0; v < vendors.dict.size(); ++v) {
    vendor_ok[v] = vendor_in_fraction(vendors.dict[v], config.risky_vendor_fraction,
                                      config.seed)
                       ? 1
                       : 0;
  }
  if (std::count(vendor_ok.begin(), vendor_ok.end(), 1) == 0 && !vendor_ok.empty()) {
    vendor_ok[0] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!vendors.missing[i] && vendor_ok[vendors.cats[i]]) eligible.push_back(i);
  }
  if (eligible.size() < count) {
    throw ValidationError("not enough risk-eligible rows to inject " +
                          std::to_string(count) + " cases");
  }
  // Partial Fisher-Yates: first `count` entries are the selection.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.next_below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  const auto mix_arr = config.effective_mix();
  const std::vector<double> mix(mix_arr.begin(), mix_arr.end());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t row = eligible[i];
    const Typology ty = kAllTypologies[rng.choice(mix)];
    Rng row_rng = rng.stream(row);
    transform_case(out, c, row, ty, config, row_rng);
  }
  out.validate();
  return out;
}

CaseTable generate_dataset(const GenConfig& config) {
  Rng master_rng(config.seed, "master");
  const MasterData master = generate_master(config, master_rng);
  Rng case_rng(config.seed, "cases");
  CaseTable clean = simulate_cases(config, master, case_rng);
  Rng inject_rng(config.seed, "inject");
  return inject_typologies(clean, config, inject_rng);
}

void StressConfig::validate() const {
  if (kind == StressKind::TypologyShift && held_out_typologies.empty()) {
    throw ValidationError("typology shift requires a nonempty held-out set");
  }
  if (kind == StressKind::DataQuality &&
      (missing_rate < 0.05 || missing_rate > 0.30)) {
    throw ValidationError("missing rate m must lie in [0.05, 0.30]");
  }
  if (unseen_vendor_rate < 0.0 || unseen_vendor_rate > 1.0) {
    throw ValidationError("unseen_vendor_rate must be in [0, 1]");
  }
  if (inflation <= 0.0) throw ValidationError("inflation alpha must be > 0");
  if (vendor_churn < 0.0 || vendor_churn > 1.0) {
    throw ValidationError("vendor churn beta must be in [0, 1]");
  }
  if (drift_onset_fraction < 0.0 || drift_onset_fraction >= 1.0) {
    throw ValidationError("drift_onset_fraction must be in [0, 1)");
  }
}

std::string StressConfig::to_json_text() const {
  json j;
  j["kind"] = to_string(kind);
  j["held_out_typologies"] = json::array();
  for (Typology t : held_out_typologies) {
    j["held_out_typologies"].push_back(to_string(t));
  }
  j["missing_rate"] = missing_rate;
  j["unseen_vendor_rate"] = unseen_vendor_rate;
  j["inflation"] = inflation;
  j["vendor_churn"] = vendor_churn;
  j["drift_onset_fraction"] = drift_onset_fraction;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

StressConfig StressConfig::parse_json_text(const std::string& text) {
  json j = json::parse(text);
  StressConfig s;
  s.kind = stress_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("held_out_typologies")) {
    for (const auto& t : j["held_out_typologies"]) {
      s.held_out_typologies.insert(typology_from_string(t.get<std::string>()));
    }
  }
  s.missing_rate = j.value("missing_rate", s.missing_rate);
  s.unseen_vendor_rate = j.value("unseen_vendor_rate", s.unseen_vendor_rate);
  s.inflation = j.value("inflation", s.inflation);
  s.vendor_churn = j.value("vendor_churn", s.vendor_churn);
  s.drift_onset_fraction = j.value("drift_onset_fraction", s.drift_onset_fraction);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

StressConfig StressConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stress config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str());
}

CaseTable apply_stress(const CaseTable& table, const StressConfig& stress,
                       Rng& rng) {
  stress.validate();
  if (!table.has_labels()) {
    throw ValidationError("apply_stress expects a labeled table");
  }

  if (stress.kind == StressKind::TypologyShift) {
    const auto y = table.labels();
    const Column& risk_type = table.column("risk_type");
    std::vector<std::size_t> keep;
    keep.reserve(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
      if (y[i] == 0) {
        keep.push_back(i);
        continue;
      }
      if (risk_type.missing[i]) continue;
      const Typology ty = typology_from_string(risk_type.category(i));
      if (stress.held_out_typologies.count(ty)) keep.push_back(i);
    }
    return table.take_rows(keep);
  }

  CaseTable out = table;
  if (stress.kind == StressKind::DataQuality) {
    const std::size_t vendor_col = out.column_index("vendor_id");
    for (std::size_t r = 0; r < out.n_rows(); ++r) {
      Rng rr = rng.stream(r);
      for (auto& col : out.columns) {
        const bool maskable = col.kind != ColumnKind::Identifier &&
                              col.group != "labels" && col.name != out.time_column;
        if (!maskable) continue;
        if (rr.bernoulli(stress.missing_rate)) {
          col.missing[r] = 1;
          if (col.kind == ColumnKind::Numeric) {
            col.nums[r] = std::numeric_limits<double>::quiet_NaN();
          }
        }
      }
      if (stress.unseen_vendor_rate > 0.0 &&
          rr.bernoulli(stress.unseen_vendor_rate)) {
        Column& v = out.columns[vendor_col];
        v.cats[r] = v.intern("VX" + zero_pad(r + 1, 6));
        v.missing[r] = 0;
      }
    }
    out.validate();
    return out;
  }

  // TemporalDrift
  std::int64_t onset = std::numeric_limits<std::int64_t>::min();
  if (stress.drift_onset_fraction > 0.0) {
    std::vector<std::int64_t> times(out.n_rows());
    for (std::size_t i = 0; i < out.n_rows(); ++i) times[i] = out.time_value(i);
    std::sort(times.begin(), times.end());
    const std::size_t pos = static_cast<std::size_t>(
        stress.drift_onset_fraction * static_cast<double>(times.size()));
    onset = times[std::min(pos, times.size() - 1)];
  }
  const std::size_t vendor_col = out.column_index("vendor_id");
  const std::size_t cycle_col = out.column_index("cycle_time_days");
  Column& vendors = out.columns[vendor_col];
  std::vector<std::uint8_t> churned(vendors.dict.size(), 0);
  for (std::size_t v = 0; v < churned.size(); ++v) {
    churned[v] =
        vendor_in_fraction(vendors.dict[v], stress.vendor_churn, stress.seed) ? 1 : 0;
  }
  const std::size_t original_dict_size = vendors.dict.size();
  for (std::size_t r = 0; r < out.n_rows(); ++r) {
    if (out.time_value(r) < onset) continue;
    for (auto& col : out.columns) {
      if (col.group == "monetary" && col.kind == ColumnKind::Numeric &&
          col.name.find("gap_rel") == std::string::npos && !col.missing[r]) {
        col.nums[r] *= stress.inflation;
      }
      if (col.name == "max_subamount" && !col.missing[r]) {
        col.nums[r] *= stress.inflation;
      }
    }
    if (!out.columns[cycle_col].missing[r]) {
      out.columns[cycle_col].nums[r] *= std::pow(stress.inflation, 0.25);
    }
    if (!vendors.missing[r] && vendors.cats[r] < original_dict_size &&
        churned[vendors.cats[r]]) {
      vendors.cats[r] = vendors.intern("VN-" + vendors.dict[vendors.cats[r]]);
    }
  }
  out.validate();
  return out;
}

void check_label_consistency(const CaseTable& table) {
  const auto y = table.labels();
  const Column& risk_type = table.column("risk_type");
  const Column& scenario = table.column("scenario_id");
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool has_type = !risk_type.missing[i];
    const bool has_scenario = !scenario.missing[i];
    if (y[i] == 1 && (!has_type || !has_scenario)) {
      throw ValidationError("risky row " + std::to_string(i) +
                            " lacks risk_type or scenario_id");
    }
    if (y[i] == 0 && (has_type || has_scenario)) {
      throw ValidationError("clean row " + std::to_string(i) +
                            " carries risk_type or scenario_id");
    }
  }
}

}  // namespace p2pbench
