#include "spellforge/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>

#include "spellforge/csv.hpp"
#include "spellforge/util.hpp"

namespace spellforge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// FeatureMatrix
// ---------------------------------------------------------------------------

Eigen::Index FeatureMatrix::column(const std::string& name) const {
  auto idx = find_column(name);
  if (!idx) throw std::invalid_argument("no such feature column: '" + name + "'");
  return *idx;
}

std::optional<Eigen::Index> FeatureMatrix::find_column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - names.begin());
}

void write_features_csv(const std::string& path, const FeatureMatrix& m) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write '" + path + "'");
  out << csv::join_fields(m.names) << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::string line;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      std::snprintf(buf, sizeof(buf), "%.17g", m.values(i, j));
      line += buf;
    }
    out << line << '\n';
  }
}

FeatureMatrix read_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw CsvError("'" + path + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  FeatureMatrix m;
  m.names = csv::split_line(line);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = csv::split_line(line);
    if (fields.size() != m.names.size())
      throw CsvError("'" + path + "' row " + std::to_string(lineno) +
                     ": column count mismatch");
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      try {
        row[j] = std::stod(fields[j]);
      } catch (const std::exception&) {
        throw CsvError("'" + path + "' row " + std::to_string(lineno) +
                       ": bad number '" + fields[j] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  m.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(m.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

// ---------------------------------------------------------------------------
// Catalog (de)serialization
// ---------------------------------------------------------------------------

std::string family_name(FeatureFamily f) {
  switch (f) {
    case FeatureFamily::kEverIndicator: return "ever-indicator";
    case FeatureFamily::kDuration: return "duration";
    case FeatureFamily::kCount: return "count";
    case FeatureFamily::kAmountTotal: return "amount-total";
    case FeatureFamily::kFluctuation: return "fluctuation";
    case FeatureFamily::kSeasonality: return "seasonality";
    case FeatureFamily::kAgeBand: return "age-band";
    case FeatureFamily::kCategoryOneHot: return "category-one-hot";
    case FeatureFamily::kDerivedRatio: return "derived-ratio";
    case FeatureFamily::kTopCodeFlag: return "top-code-flag";
    case FeatureFamily::kMissingFlag: return "missing-flag";
    case FeatureFamily::kInteraction: return "interaction";
  }
  return "?";
}

FeatureFamily family_from_name(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(FeatureFamily::kInteraction); ++i) {
    auto f = static_cast<FeatureFamily>(i);
    if (family_name(f) == s) return f;
  }
  throw std::invalid_argument("unknown feature family: '" + s + "'");
}

namespace {

json filter_to_json(const SpellFilter& f) {
  json j;
  switch (f.kind) {
    case SpellFilter::Kind::kAnyIncomeSupport: j["kind"] = "any-is"; break;
    case SpellFilter::Kind::kAnyCentrelinkPayment: j["kind"] = "any-centrelink"; break;
    case SpellFilter::Kind::kSubfamilies: {
      j["kind"] = "subfamilies";
      json arr = json::array();
      for (auto s : f.subfamilies) arr.push_back(std::string(subfamily_name(s)));
      j["subfamilies"] = arr;
      break;
    }
    case SpellFilter::Kind::kCodes:
      j["kind"] = "codes";
      j["codes"] = f.codes;
      break;
  }
  return j;
}

SpellFilter filter_from_json(const json& j) {
  std::string kind = j.at("kind");
  if (kind == "any-is") return SpellFilter::any_income_support();
  if (kind == "any-centrelink") return SpellFilter::any_centrelink_payment();
  if (kind == "subfamilies") {
    std::vector<PaymentSubfamily> fams;
    for (const auto& s : j.at("subfamilies"))
      fams.push_back(subfamily_from_name(s.get<std::string>()));
    return SpellFilter::subfamilies_of(std::move(fams));
  }
  if (kind == "codes")
    return SpellFilter::exact_codes(j.at("codes").get<std::vector<std::string>>());
  throw std::invalid_argument("unknown spell filter kind: '" + kind + "'");
}

std::string quantity_name(BiweeklyQuantity q) {
  switch (q) {
    case BiweeklyQuantity::kBenefitAmount: return "benefit-amount";
    case BiweeklyQuantity::kEmploymentIncome: return "employment-income";
    case BiweeklyQuantity::kEmploymentHours: return "employment-hours";
  }
  return "?";
}

BiweeklyQuantity quantity_from_name(const std::string& s) {
  if (s == "benefit-amount") return BiweeklyQuantity::kBenefitAmount;
  if (s == "employment-income") return BiweeklyQuantity::kEmploymentIncome;
  if (s == "employment-hours") return BiweeklyQuantity::kEmploymentHours;
  throw std::invalid_argument("unknown bi-weekly quantity: '" + s + "'");
}

json entry_to_json(const FeatureCatalogEntry& e) {
  json j;
  j["name"] = e.name;
  j["family"] = family_name(e.family);
  j["source"] = e.source == FeatureSource::kSpells      ? "spells"
                : e.source == FeatureSource::kAttribute ? "attribute"
                                                        : "parent";
  if (e.source == FeatureSource::kSpells || e.source == FeatureSource::kParent)
    j["filter"] = filter_to_json(e.filter);
  if (e.family == FeatureFamily::kFluctuation || e.family == FeatureFamily::kAmountTotal)
    j["quantity"] = quantity_name(e.quantity);
  if (e.normalize_by_window) j["normalize_by_window"] = true;
  if (e.month) j["month"] = e.month;
  if (e.quarter) j["quarter"] = e.quarter;
  if (e.count_is_transfers) j["count_is_transfers"] = true;
  if (e.count_churn) j["count_churn"] = true;
  if (e.count_hours_changes) j["count_hours_changes"] = true;
  if (e.hours_change_band) {
    j["hours_change_band"] = true;
    j["band_lo"] = e.band_lo;
    j["band_hi"] = e.band_hi;
    j["band_dir"] = e.band_dir;
  }
  if (e.min_daily_rate) j["min_daily_rate"] = true;
  if (e.mean_daily_rate) j["mean_daily_rate"] = true;
  if (!e.attribute.empty()) j["attribute"] = e.attribute;
  if (!e.equals_value.empty()) j["equals_value"] = e.equals_value;
  if (e.use_numeric_le) {
    j["use_numeric_le"] = true;
    j["numeric_le"] = e.numeric_le;
  }
  if (!e.missing_propagates) j["missing_propagates"] = false;
  if (e.age_min >= 0) j["age_min"] = e.age_min;
  if (e.age_max >= 0) j["age_max"] = e.age_max;
  if (!e.numerator.empty()) j["numerator"] = e.numerator;
  if (!e.denominator.empty()) j["denominator"] = e.denominator;
  if (!e.base.empty()) j["base"] = e.base;
  if (!e.base2.empty()) j["base2"] = e.base2;
  if (!e.topcode_rule.empty()) j["topcode_rule"] = e.topcode_rule;
  if (e.cap_value > 0) j["cap_value"] = e.cap_value;
  if (!e.parent_role.empty()) j["parent_role"] = e.parent_role;
  return j;
}

FeatureCatalogEntry entry_from_json(const json& j) {
  FeatureCatalogEntry e;
  e.name = j.at("name");
  e.family = family_from_name(j.at("family"));
  std::string src = j.value("source", "spells");
  e.source = src == "spells"      ? FeatureSource::kSpells
             : src == "attribute" ? FeatureSource::kAttribute
             : src == "parent"
                 ? FeatureSource::kParent
                 : throw std::invalid_argument("unknown feature source: '" + src + "'");
  if (j.contains("filter")) e.filter = filter_from_json(j["filter"]);
  if (j.contains("quantity")) e.quantity = quantity_from_name(j["quantity"]);
  e.normalize_by_window = j.value("normalize_by_window", false);
  e.month = j.value("month", 0);
  e.quarter = j.value("quarter", 0);
  e.count_is_transfers = j.value("count_is_transfers", false);
  e.count_churn = j.value("count_churn", false);
  e.count_hours_changes = j.value("count_hours_changes", false);
  e.hours_change_band = j.value("hours_change_band", false);
  e.band_lo = j.value("band_lo", 0.0);
  e.band_hi = j.value("band_hi", 0.0);
  e.band_dir = j.value("band_dir", 0);
  e.min_daily_rate = j.value("min_daily_rate", false);
  e.mean_daily_rate = j.value("mean_daily_rate", false);
  e.attribute = j.value("attribute", "");
  e.equals_value = j.value("equals_value", "");
  e.use_numeric_le = j.value("use_numeric_le", false);
  e.numeric_le = j.value("numeric_le", 0.0);
  e.missing_propagates = j.value("missing_propagates", true);
  e.age_min = j.value("age_min", -1);
  e.age_max = j.value("age_max", -1);
  e.numerator = j.value("numerator", std::vector<std::string>{});
  e.denominator = j.value("denominator", std::vector<std::string>{});
  e.base = j.value("base", "");
  e.base2 = j.value("base2", "");
  e.topcode_rule = j.value("topcode_rule", "");
  e.cap_value = j.value("cap_value", 0.0);
  e.parent_role = j.value("parent_role", "");
  return e;
}

}  // namespace

void FeatureCatalog::validate() const {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.name.empty()) throw std::invalid_argument("catalog entry with empty name");
    if (!seen.insert(e.name).second)
      throw std::invalid_argument("duplicate catalog entry name: '" + e.name + "'");
    auto check_ref = [&](const std::string& ref) {
      for (std::size_t k = 0; k < i; ++k)
        if (entries[k].name == ref) return;
      throw std::invalid_argument("entry '" + e.name + "' references '" + ref +
                                  "' which is not an earlier catalog entry");
    };
    for (const auto& r : e.numerator) check_ref(r);
    for (const auto& r : e.denominator) check_ref(r);
    if (!e.base.empty()) check_ref(e.base);
    if (!e.base2.empty()) check_ref(e.base2);
    if (e.family == FeatureFamily::kMissingFlag && e.base.empty() && e.attribute.empty())
      throw std::invalid_argument("missing-flag entry '" + e.name +
                                  "' needs a base entry or attribute");
  }
}

const FeatureCatalogEntry* FeatureCatalog::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

FeatureCatalog load_catalog_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j = json::parse(in);
  FeatureCatalog c;
  for (const auto& je : j.at("entries")) c.entries.push_back(entry_from_json(je));
  c.validate();
  return c;
}

void save_catalog_json(const std::string& path, const FeatureCatalog& catalog) {
  json j;
  j["entries"] = json::array();
  for (const auto& e : catalog.entries) j["entries"].push_back(entry_to_json(e));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// Derivation primitives
// ---------------------------------------------------------------------------

std::vector<ParentLink> read_parent_links_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw CsvError("'" + path + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "child_id,parent_id,role")
    throw CsvError("'" + path + "': expected header 'child_id,parent_id,role'");
  std::vector<ParentLink> links;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = csv::split_line(line);
    if (f.size() != 3) throw CsvError("'" + path + "': expected 3 fields");
    links.push_back({f[0], f[1], f[2]});
  }
  return links;
}

std::vector<double> biweekly_series(const PersonHistory& h, const ObservationWindow& w,
                                    BiweeklyQuantity q) {
  const int days = w.day_count();
  const int bins = (days + 13) / 14;
  std::vector<double> series(static_cast<std::size_t>(bins), 0.0);
  for (const SpellRecord& s : h.spells) {
    const PaymentCategory& cat = s.category();
    bool wanted = false;
    switch (q) {
      case BiweeklyQuantity::kBenefitAmount:
        wanted = !cat.is_employment_income && !cat.is_employment_hours;
        break;
      case BiweeklyQuantity::kEmploymentIncome:
        wanted = cat.is_employment_income;
        break;
      case BiweeklyQuantity::kEmploymentHours:
        wanted = cat.is_employment_hours;
        break;
    }
    if (!wanted || !s.amount) continue;
    Date lo = std::max(s.start, w.first_day);
    Date hi = std::min(s.end, w.last_day);
    if (lo > hi) continue;
    const double daily = *s.amount / 14.0;
    int first_bin = (lo - w.first_day) / 14;
    int last_bin = (hi - w.first_day) / 14;
    for (int b = first_bin; b <= last_bin; ++b) {
      Date bin_start = w.first_day + b * 14;
      Date bin_end = std::min(w.last_day, bin_start + 13);
      int overlap = std::min(hi, bin_end) - std::max(lo, bin_start) + 1;
      if (overlap > 0) series[static_cast<std::size_t>(b)] += daily * overlap;
    }
  }
  return series;
}

double fluctuation(std::span<const double> series, bool* short_series) {
  if (short_series) *short_series = false;
  const std::size_t n = series.size();
  if (n < 2) {
    if (short_series) *short_series = true;
    return 0.0;
  }
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : series) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

PolicyColumns apply_missing_policy(const RawColumn& raw) {
  PolicyColumns out;
  out.name = raw.name;
  out.values = raw.values;
  bool any_missing = false;
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    if (raw.missing[i]) {
      out.values[i] = 0.0;
      any_missing = true;
    }
  }
  if (any_missing) {
    std::vector<double> ind(raw.values.size(), 0.0);
    for (std::size_t i = 0; i < raw.values.size(); ++i)
      if (raw.missing[i]) ind[i] = 1.0;
    out.indicator = std::move(ind);
  }
  return out;
}

std::pair<double, bool> top_code_cap(double value, double cap) {
  if (value > cap) return {cap, true};
  return {value, false};
}

bool flag_at_or_above_percentile(double value, std::vector<double> sample, double pct) {
  if (sample.empty()) return false;
  std::sort(sample.begin(), sample.end());
  // nearest-rank percentile
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(pct * static_cast<double>(sample.size())));
  rank = std::min(std::max<std::size_t>(rank, 1), sample.size());
  return value >= sample[rank - 1];
}

bool flag_ratio_above_one(double value) { return value > 1.0; }

namespace {

// Age in whole years at 2014-01-01.
std::optional<int> age_at_base(const PersonHistory& h) {
  auto bd = h.attribute("birth_date");
  if (!bd) return std::nullopt;
  Date birth = Date::parse(*bd);  // validates format
  int age = 2014 - birth.year();
  // Birthday not yet reached at 2014-01-01 unless born on Jan 1.
  if (bd->substr(5) > "01-01") --age;
  return age;
}

double attr_numeric(const std::string& s, bool& ok) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    ok = pos == s.size();
    return v;
  } catch (const std::exception&) {
    ok = false;
    return 0.0;
  }
}

FeatureValue attribute_value(const FeatureCatalogEntry& e, const PersonHistory& h) {
  FeatureValue out;
  auto raw = h.attribute(e.attribute);
  if (!raw) {
    out.missing = e.missing_propagates;
    return out;
  }
  if (!e.equals_value.empty()) {
    out.value = (*raw == e.equals_value) ? 1.0 : 0.0;
    return out;
  }
  bool ok = false;
  double v = attr_numeric(*raw, ok);
  if (!ok) {
    out.missing = e.missing_propagates;
    return out;
  }
  if (e.use_numeric_le) {
    out.value = (v <= e.numeric_le) ? 1.0 : 0.0;
  } else {
    out.value = v;
    if (e.cap_value > 0) {
      auto [capped, flagged] = top_code_cap(v, e.cap_value);
      out.value = capped;
      out.topcoded = flagged;
    }
  }
  return out;
}

// Count of transfers between distinct income-support payment codes: adjacent
// or overlapping consecutive IS spells with different codes.
int count_is_transfers(const PersonHistory& h, const ObservationWindow& w) {
  struct Ev {
    Date start, end;
    const std::string* code;
  };
  std::vector<Ev> spells;
  for (const auto& s : h.spells) {
    if (!s.category().is_income_support) continue;
    if (s.end < w.first_day || s.start > w.last_day) continue;
    spells.push_back({s.start, s.end, &s.payment_code});
  }
  std::sort(spells.begin(), spells.end(), [](const Ev& a, const Ev& b) {
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  });
  int transfers = 0;
  for (std::size_t i = 1; i < spells.size(); ++i) {
    const auto& prev = spells[i - 1];
    const auto& cur = spells[i];
    if (*cur.code != *prev.code && cur.start - prev.end <= 1) ++transfers;
  }
  return transfers;
}

bool had_churn(const PersonHistory& h, const ObservationWindow& w,
               const SpellFilter& filter) {
  auto mask = coverage_mask(h, w, filter);
  // pattern covered .. gap .. covered
  bool seen_cover = false, seen_gap_after_cover = false;
  for (char c : mask) {
    if (c) {
      if (seen_gap_after_cover) return true;
      seen_cover = true;
    } else if (seen_cover) {
      seen_gap_after_cover = true;
    }
  }
  return false;
}

// Relative bi-weekly hours changes; prev must be positive to define a change.
std::vector<double> hours_changes(const PersonHistory& h, const ObservationWindow& w) {
  auto series = biweekly_series(h, w, BiweeklyQuantity::kEmploymentHours);
  std::vector<double> changes;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i - 1] > 0.0)
      changes.push_back((series[i] - series[i - 1]) / series[i - 1]);
  }
  return changes;
}

FeatureValue spell_value(const FeatureCatalogEntry& e, const PersonHistory& h) {
  FeatureValue out;
  const ObservationWindow w = base_year_window();
  switch (e.family) {
    case FeatureFamily::kEverIndicator: {
      if (e.count_is_transfers) {
        out.value = count_is_transfers(h, w) > 0 ? 1.0 : 0.0;
        return out;
      }
      if (e.hours_change_band) {
        for (double c : hours_changes(h, w)) {
          double mag = std::abs(c);
          bool dir_ok = e.band_dir == 0 || (e.band_dir < 0 && c < 0) ||
                        (e.band_dir > 0 && c > 0);
          if (dir_ok && mag >= e.band_lo && mag <= e.band_hi) {
            out.value = 1.0;
            break;
          }
        }
        return out;
      }
      out.value = covered_days(h, w, e.filter) > 0 ? 1.0 : 0.0;
      return out;
    }
    case FeatureFamily::kDuration: {
      double d = covered_days(h, w, e.filter);
      if (e.cap_value > 0) {
        auto [capped, flagged] = top_code_cap(d, e.cap_value);
        d = capped;
        out.topcoded = flagged;
      }
      out.value = e.normalize_by_window ? d / w.day_count() : d;
      return out;
    }
    case FeatureFamily::kCount: {
      if (e.count_is_transfers) {
        out.value = count_is_transfers(h, w);
      } else if (e.count_churn) {
        out.value = had_churn(h, w, e.filter) ? 1.0 : 0.0;
      } else if (e.count_hours_changes) {
        int n = 0;
        for (double c : hours_changes(h, w))
          if (std::abs(c) > 0.2) ++n;
        out.value = n;
      }
      return out;
    }
    case FeatureFamily::kAmountTotal: {
      if (e.min_daily_rate || e.mean_daily_rate) {
        // statistics over the matching employment stream
        double total = 0.0;
        int days = 0;
        double min_rate = 0.0;
        bool any = false;
        for (const auto& s : h.spells) {
          const auto& cat = s.category();
          bool match = (e.quantity == BiweeklyQuantity::kEmploymentIncome &&
                        cat.is_employment_income) ||
                       (e.quantity == BiweeklyQuantity::kEmploymentHours &&
                        cat.is_employment_hours);
          if (!match || !s.amount) continue;
          Date lo = std::max(s.start, w.first_day);
          Date hi = std::min(s.end, w.last_day);
          if (lo > hi) continue;
          double rate = *s.amount / 14.0;
          int overlap = hi - lo + 1;
          total += rate * overlap;
          days += overlap;
          min_rate = any ? std::min(min_rate, rate) : rate;
          any = true;
        }
        if (!any) {
          out.missing = true;
          return out;
        }
        out.value = e.min_daily_rate ? min_rate : total / days;
        return out;
      }
      auto series = biweekly_series(h, w, e.quantity);
      double total = 0.0;
      for (double v : series) total += v;
      if (e.cap_value > 0) {
        auto [capped, flagged] = top_code_cap(total, e.cap_value);
        total = capped;
        out.topcoded = flagged;
      }
      out.value = total;
      return out;
    }
    case FeatureFamily::kFluctuation: {
      auto series = biweekly_series(h, w, e.quantity);
      bool short_series = false;
      out.value = fluctuation(series, &short_series);
      out.missing = short_series;
      return out;
    }
    case FeatureFamily::kSeasonality: {
      int first_month = e.month ? e.month : (e.quarter - 1) * 3 + 1;
      int last_month = e.month ? e.month : e.quarter * 3;
      Date lo = Date::from_ymd(2014, static_cast<unsigned>(first_month), 1);
      Date hi = last_month == 12
                    ? Date::from_ymd(2014, 12, 31)
                    : Date::from_ymd(2014, static_cast<unsigned>(last_month + 1), 1) - 1;
      out.value =
          covered_days(h, ObservationWindow(lo, hi), e.filter) > 0 ? 1.0 : 0.0;
      return out;
    }
    default:
      throw std::logic_error("spell_value: unsupported family for '" + e.name + "'");
  }
}

FeatureValue parent_value(const FeatureCatalogEntry& e, const PersonHistory& h,
                          const DeriveContext& ctx) {
  FeatureValue out;
  if (!ctx.parent_links || !ctx.persons_by_id) {
    out.missing = true;
    return out;
  }
  bool any_parent = false;
  double v = 0.0;
  for (const auto& link : *ctx.parent_links) {
    if (link.child_id != h.person_id) continue;
    if (e.parent_role != "any" && e.parent_role != link.role) continue;
    auto it = ctx.persons_by_id->find(link.parent_id);
    if (it == ctx.persons_by_id->end()) continue;
    any_parent = true;
    FeatureValue pv = spell_value(e, *it->second);
    v = std::max(v, pv.value);
  }
  if (!any_parent) {
    out.missing = true;
    return out;
  }
  out.value = v;
  return out;
}

}  // namespace

FeatureValue derive_feature(const FeatureCatalogEntry& entry, const PersonHistory& h,
                            const DeriveContext& ctx) {
  switch (entry.family) {
    case FeatureFamily::kAgeBand: {
      FeatureValue out;
      auto age = age_at_base(h);
      if (!age) {
        out.missing = entry.missing_propagates;
        return out;
      }
      bool in_band = *age >= entry.age_min &&
                     (entry.age_max < 0 || *age <= entry.age_max);
      out.value = in_band ? 1.0 : 0.0;
      return out;
    }
    case FeatureFamily::kDerivedRatio:
    case FeatureFamily::kTopCodeFlag:
    case FeatureFamily::kMissingFlag:
    case FeatureFamily::kInteraction:
      throw std::logic_error("derive_feature: '" + entry.name +
                             "' references other entries; use build_matrix");
    default:
      break;
  }
  switch (entry.source) {
    case FeatureSource::kAttribute:
      return attribute_value(entry, h);
    case FeatureSource::kParent:
      return parent_value(entry, h, ctx);
    case FeatureSource::kSpells:
      return spell_value(entry, h);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Matrix assembly
// ---------------------------------------------------------------------------

FeatureMatrix build_matrix(std::span<const PersonHistory> persons,
                           const FeatureCatalog& catalog, const DeriveContext& ctx,
                           int threads) {
  if (catalog.entries.empty()) throw std::invalid_argument("empty catalog");
  catalog.validate();
  const std::size_t n = persons.size();
  const std::size_t k = catalog.entries.size();

  std::unordered_map<std::string, std::size_t> entry_index;
  for (std::size_t j = 0; j < k; ++j) entry_index[catalog.entries[j].name] = j;

  // values[j] holds entry j's column before the missing policy is applied.
  std::vector<std::vector<FeatureValue>> values(k);
  for (auto& col : values) col.resize(n);

  std::vector<std::size_t> p99_entries;
  for (std::size_t j = 0; j < k; ++j)
    if (catalog.entries[j].family == FeatureFamily::kTopCodeFlag &&
        catalog.entries[j].topcode_rule == "p99")
      p99_entries.push_back(j);

  parallel_for(n, threads, [&](std::size_t i) {
    const PersonHistory& h = persons[i];
    for (std::size_t j = 0; j < k; ++j) {
      const auto& e = catalog.entries[j];
      FeatureValue& out = values[j][i];
      switch (e.family) {
        case FeatureFamily::kDerivedRatio: {
          double num = 0.0, den = 0.0;
          bool miss = false;
          for (const auto& r : e.numerator) {
            const auto& v = values[entry_index.at(r)][i];
            miss |= v.missing;
            num += v.value;
          }
          for (const auto& r : e.denominator) {
            const auto& v = values[entry_index.at(r)][i];
            miss |= v.missing;
            den += v.value;
          }
          if (miss || den == 0.0) {
            out.missing = true;
          } else {
            out.value = num / den;
          }
          break;
        }
        case FeatureFamily::kTopCodeFlag: {
          const auto& bv = values[entry_index.at(e.base)][i];
          if (e.topcode_rule == "cap") {
            out.value = bv.topcoded ? 1.0 : 0.0;
          } else if (e.topcode_rule == "above-1") {
            out.value = (!bv.missing && flag_ratio_above_one(bv.value)) ? 1.0 : 0.0;
          }
          // "p99" is filled after all base columns exist.
          break;
        }
        case FeatureFamily::kMissingFlag: {
          if (!e.base.empty()) {
            out.value = values[entry_index.at(e.base)][i].missing ? 1.0 : 0.0;
          } else {
            out.value = h.attribute(e.attribute) ? 0.0 : 1.0;
          }
          break;
        }
        case FeatureFamily::kInteraction: {
          const auto& a = values[entry_index.at(e.base)][i];
          const auto& b = values[entry_index.at(e.base2)][i];
          // products use policy-imputed (zero-for-missing) values
          out.value = (a.missing ? 0.0 : a.value) * (b.missing ? 0.0 : b.value);
          break;
        }
        default:
          out = derive_feature(e, h, ctx);
          break;
      }
    }
  });

  for (std::size_t j : p99_entries) {
    const auto& e = catalog.entries[j];
    std::size_t bj = entry_index.at(e.base);
    std::vector<double> sample;
    sample.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      if (!values[bj][i].missing) sample.push_back(values[bj][i].value);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& bv = values[bj][i];
      values[j][i].value =
          (!bv.missing && flag_at_or_above_percentile(bv.value, sample)) ? 1.0 : 0.0;
    }
  }

  // Assemble with the missing policy: base column, then its indicator.
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < k; ++j) {
    RawColumn raw;
    raw.name = catalog.entries[j].name;
    raw.values.resize(n);
    raw.missing.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      raw.values[i] = values[j][i].value;
      raw.missing[i] = values[j][i].missing ? 1 : 0;
    }
    PolicyColumns pc = apply_missing_policy(raw);
    names.push_back(pc.name);
    cols.push_back(std::move(pc.values));
    if (pc.indicator) {
      names.push_back(raw.name + "miss");
      cols.push_back(std::move(*pc.indicator));
    }
  }
  {
    std::set<std::string> unique(names.begin(), names.end());
    if (unique.size() != names.size())
      throw std::invalid_argument("duplicate column names after missing policy");
  }

  FeatureMatrix m;
  m.names = std::move(names);
  m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < n; ++i)
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  return m;
}

FeatureMatrix expand_interactions(const FeatureMatrix& m,
                                  const std::vector<std::string>& base_columns) {
  std::vector<Eigen::Index> idx;
  for (const auto& name : base_columns) idx.push_back(m.column(name));
  const std::size_t b = idx.size();
  const std::size_t extra = b * (b - 1) / 2;

  FeatureMatrix out;
  out.names = m.names;
  out.values.resize(m.rows(), m.cols() + static_cast<Eigen::Index>(extra));
  out.values.leftCols(m.cols()) = m.values;
  Eigen::Index col = m.cols();
  for (std::size_t a = 0; a < b; ++a) {
    for (std::size_t c = a + 1; c < b; ++c) {
      out.names.push_back(base_columns[a] + "," + base_columns[c]);
      out.values.col(col) =
          m.values.col(idx[a]).cwiseProduct(m.values.col(idx[c]));
      ++col;
    }
  }
  return out;
}

}  // namespace spellforge
