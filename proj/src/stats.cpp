#include "diafactor/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "diafactor/errors.hpp"
#include "diafactor/structure.hpp"

namespace diafactor {

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double mean_sorted(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

struct RankInfo {
  double rank_sum1 = 0.0;               // midrank sum of the first sample
  std::vector<std::size_t> tie_runs;    // run length per distinct pooled value
  bool tied = false;
};

RankInfo pooled_ranks(const std::vector<double>& s1, const std::vector<double>& s2) {
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(s1.size() + s2.size());
  for (double v : s1) pooled.emplace_back(v, 0);
  for (double v : s2) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  RankInfo info;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j + 1);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second == 0) info.rank_sum1 += midrank;
    info.tie_runs.push_back(j - i);
    if (j - i > 1) info.tied = true;
    i = j;
  }
  return info;
}

double resample_median(const std::vector<double>& sorted, std::mt19937_64& rng) {
  std::vector<double> draw(sorted.size());
  for (double& d : draw) d = sorted[rng() % sorted.size()];
  return median(std::move(draw));
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median requires a non-empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double mid = values[n / 2];
  return n % 2 ? mid : 0.5 * (values[n / 2 - 1] + mid);
}

TestResult mann_whitney_u(const std::vector<double>& sample1,
                          const std::vector<double>& sample2) {
  if (sample1.empty() || sample2.empty())
    throw ValidationError("mann_whitney_u requires two non-empty samples");
  const std::size_t n1 = sample1.size();
  const std::size_t n2 = sample2.size();
  const std::size_t n = n1 + n2;
  const RankInfo info = pooled_ranks(sample1, sample2);
  const double u1 = info.rank_sum1 - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);

  TestResult out;
  out.statistic_u = u1;
  out.n1 = n1;
  out.n2 = n2;

  if (!info.tied && std::max(n1, n2) <= 10) {
    out.method = "exact";
    // Distribution of the sample-1 rank sum over all C(n, n1) subsets of the
    // tie-free ranks 1..n, built as a 0/1 knapsack count.
    const long long base = static_cast<long long>(n1) * static_cast<long long>(n1 + 1) / 2;
    const long long cap = static_cast<long long>(n1) * static_cast<long long>(n2);
    const long long u_obs = std::llround(u1);
    const long long u_small = std::min(u_obs, cap - u_obs);
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<std::vector<unsigned long long>> ways(
        n1 + 1, std::vector<unsigned long long>(max_sum + 1, 0));
    ways[0][0] = 1;
    for (std::size_t r = 1; r <= n; ++r)
      for (std::size_t j = std::min(n1, r); j >= 1; --j)
        for (std::size_t s = max_sum; s >= r; --s) ways[j][s] += ways[j - 1][s - r];

    unsigned long long tail = 0;
    unsigned long long total = 0;
    for (long long s = base; s <= static_cast<long long>(max_sum); ++s) {
      const unsigned long long c = ways[n1][static_cast<std::size_t>(s)];
      if (c == 0) continue;
      total += c;
      const long long u = s - base;
      if (u <= u_small || u >= cap - u_small) tail += c;
    }
    out.p_two_sided = static_cast<double>(tail) / static_cast<double>(total);
    return out;
  }

  out.method = "normal_approx";
  const double mean = 0.5 * static_cast<double>(n1) * static_cast<double>(n2);
  double tie_term = 0.0;
  for (std::size_t t : info.tie_runs)
    if (t > 1) tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
  const double nn = static_cast<double>(n);
  const double variance = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                          ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (variance <= 0.0) {
    out.p_two_sided = 1.0;  // every pooled value identical
    return out;
  }
  const double z = std::max(0.0, std::fabs(u1 - mean) - 0.5) / std::sqrt(variance);
  out.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

BootstrapInterval bootstrap_median(const std::vector<double>& sample, int n_boot,
                                   std::uint64_t seed) {
  if (n_boot < 1000) throw ValidationError("bootstrap requires at least 1000 resamples");
  if (sample.size() < 2)
    throw ValidationError("bootstrap requires a sample of at least 2 values");
  std::vector<double> sorted = sample;
  std::sort(sorted.begin(), sorted.end());

  BootstrapInterval out;
  out.estimate = median(sorted);
  std::vector<double> boots(static_cast<std::size_t>(n_boot));
  for (int i = 0; i < n_boot; ++i) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
    boots[static_cast<std::size_t>(i)] = resample_median(sorted, rng);
  }
  std::sort(boots.begin(), boots.end());
  out.ci_low = std::min(quantile_sorted(boots, 0.025), out.estimate);
  out.ci_high = std::max(quantile_sorted(boots, 0.975), out.estimate);
  return out;
}

BootstrapInterval bootstrap_median_diff(const std::vector<double>& sample_a,
                                        const std::vector<double>& sample_b, int n_boot,
                                        std::uint64_t seed) {
  if (n_boot < 1000) throw ValidationError("bootstrap requires at least 1000 resamples");
  if (sample_a.size() < 2 || sample_b.size() < 2)
    throw ValidationError("bootstrap requires samples of at least 2 values");
  std::vector<double> sa = sample_a;
  std::vector<double> sb = sample_b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  BootstrapInterval out;
  out.estimate = median(sa) - median(sb);
  std::vector<double> boots(static_cast<std::size_t>(n_boot));
  for (int i = 0; i < n_boot; ++i) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
    const double da = resample_median(sa, rng);
    const double db = resample_median(sb, rng);
    boots[static_cast<std::size_t>(i)] = da - db;
  }
  std::sort(boots.begin(), boots.end());
  out.ci_low = std::min(quantile_sorted(boots, 0.025), out.estimate);
  out.ci_high = std::max(quantile_sorted(boots, 0.975), out.estimate);
  return out;
}

MarginalTable marginal_medians(const std::vector<AnalysisRecord>& records, Unit unit,
                               const std::string& factor, int n_boot, std::uint64_t seed) {
  if (records.empty()) throw ValidationError("marginal_medians requires at least one record");

  MarginalTable out;
  out.factor = factor;

  // level -> unit -> partner-cell -> metrics
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>>
      cells;
  std::set<std::string> all_units;
  for (const auto& r : records) {
    const std::string& key = unit == Unit::kPair        ? r.pair_id
                             : unit == Unit::kStructure ? r.structure_id
                                                        : r.speaker_id;
    if (key.empty())
      throw ValidationError("analysis record is missing its aggregation unit id");
    const auto it = r.factor_levels.find(factor);
    if (it == r.factor_levels.end())
      throw ValidationError("analysis record carries no level for factor " + factor);
    auto partner = r.factor_levels;
    partner.erase(factor);
    cells[it->second][key][format_tags(partner)].push_back(r.metric);
    all_units.insert(key);
  }

  std::size_t row_index = 0;
  for (const auto& [level, units] : cells) {
    std::vector<double> unit_values;
    unit_values.reserve(units.size());
    for (const auto& [key, cell_map] : units) {
      double acc = 0.0;
      for (const auto& [cell, metrics] : cell_map) acc += mean_sorted(metrics);
      unit_values.push_back(acc / static_cast<double>(cell_map.size()));
    }
    std::sort(unit_values.begin(), unit_values.end());

    MarginalRow row;
    row.level = level;
    row.count = unit_values.size();
    row.median = median(unit_values);
    if (unit_values.size() >= 2) {
      const auto ci = bootstrap_median(unit_values, n_boot, seed + row_index);
      row.ci_low = ci.ci_low;
      row.ci_high = ci.ci_high;
    } else {
      row.ci_low = row.ci_high = row.median;
    }
    out.rows.push_back(std::move(row));

    for (const auto& u : all_units)
      if (units.find(u) == units.end()) out.excluded.push_back(u + "@" + level);
    ++row_index;
  }
  std::sort(out.excluded.begin(), out.excluded.end());
  return out;
}

AttributionReport attribution_report(const std::vector<AnalysisRecord>& records, int n_boot,
                                     std::uint64_t seed) {
  if (records.empty()) throw ValidationError("attribution_report requires records");
  if (n_boot < 1000) throw ValidationError("bootstrap requires at least 1000 resamples");

  std::map<std::string, std::set<std::string>> levels;
  for (const auto& r : records)
    for (const auto& [k, v] : r.factor_levels) levels[k].insert(v);
  if (levels.empty()) throw ValidationError("records declare no factors");
  for (const auto& [k, ls] : levels) {
    if (k.rfind("pair_", 0) != 0 && k.rfind("structure_", 0) != 0)
      throw ValidationError("factor without a pair_/structure_ prefix: " + k);
    for (const auto& r : records)
      if (r.factor_levels.find(k) == r.factor_levels.end())
        throw ValidationError("a record carries no level for factor " + k);
  }

  // Every combination of declared levels must be observed.
  std::size_t n_cells = 1;
  for (const auto& [k, ls] : levels) {
    if (n_cells > 200000 / ls.size())
      throw ValidationError("factor crossing too large to verify");
    n_cells *= ls.size();
  }
  std::set<std::string> observed;
  for (const auto& r : records) observed.insert(format_tags(r.factor_levels));
  std::vector<std::string> missing;
  std::map<std::string, std::string> combo;
  for (const auto& [k, ls] : levels) combo[k] = *ls.begin();
  for (std::size_t i = 0; i < n_cells; ++i) {
    std::size_t rest = i;
    for (const auto& [k, ls] : levels) {
      auto it = ls.begin();
      std::advance(it, rest % ls.size());
      combo[k] = *it;
      rest /= ls.size();
    }
    const std::string cell = format_tags(combo);
    if (observed.find(cell) == observed.end()) missing.push_back(cell);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string msg = "incomplete factorial crossing; missing cells: ";
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i) {
      if (i) msg += ", ";
      msg += missing[i];
    }
    if (missing.size() > 8) msg += ", ...";
    throw ValidationError(msg);
  }

  AttributionReport report;
  for (const auto& [factor, level_set] : levels) {
    const bool is_voice = factor.rfind("pair_", 0) == 0;
    FactorEffect effect;
    effect.factor = factor;
    effect.marginals = marginal_medians(
        records, is_voice ? Unit::kPair : Unit::kStructure, factor, n_boot, seed);

    // Raw version-level samples drive the significance tests.
    std::map<std::string, std::vector<double>> samples;
    for (const auto& r : records) samples[r.factor_levels.at(factor)].push_back(r.metric);
    for (auto& [level, values] : samples) std::sort(values.begin(), values.end());
    for (auto a = samples.begin(); a != samples.end(); ++a)
      for (auto b = std::next(a); b != samples.end(); ++b)
        effect.tests.push_back(
            {a->first, b->first, mann_whitney_u(a->second, b->second)});

    // The gap compares levels within partner cells so the other factors
    // cancel: a level's value is the equal-weight mean over cells of the
    // within-cell median.
    std::map<std::string, std::map<std::string, std::vector<double>>> strata;
    for (const auto& r : records) {
      auto partner = r.factor_levels;
      partner.erase(factor);
      strata[r.factor_levels.at(factor)][format_tags(partner)].push_back(r.metric);
    }
    for (auto& [level, by_cell] : strata)
      for (auto& [cell, values] : by_cell) std::sort(values.begin(), values.end());

    std::map<std::string, double> level_value;
    for (const auto& [level, by_cell] : strata) {
      double acc = 0.0;
      for (const auto& [cell, values] : by_cell) acc += median(values);
      level_value[level] = acc / static_cast<double>(by_cell.size());
    }

    effect.level_low = effect.level_high = level_value.begin()->first;
    for (const auto& [level, value] : level_value) {
      if (value < level_value.at(effect.level_low)) effect.level_low = level;
      if (value > level_value.at(effect.level_high)) effect.level_high = level;
    }

    if (strata.size() >= 2) {
      effect.gap = level_value.at(effect.level_high) - level_value.at(effect.level_low);
      const auto& hi = strata.at(effect.level_high);
      const auto& lo = strata.at(effect.level_low);
      const auto resampled_value =
          [](const std::map<std::string, std::vector<double>>& by_cell,
             std::mt19937_64& rng) {
            double acc = 0.0;
            for (const auto& [cell, values] : by_cell) acc += resample_median(values, rng);
            return acc / static_cast<double>(by_cell.size());
          };
      std::vector<double> boots(static_cast<std::size_t>(n_boot));
      for (int i = 0; i < n_boot; ++i) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
        const double vh = resampled_value(hi, rng);
        const double vl = resampled_value(lo, rng);
        boots[static_cast<std::size_t>(i)] = vh - vl;
      }
      std::sort(boots.begin(), boots.end());
      effect.ci_low = std::min(quantile_sorted(boots, 0.025), effect.gap);
      effect.ci_high = std::max(quantile_sorted(boots, 0.975), effect.gap);
    }

    auto& bucket = is_voice ? report.voice : report.structure;
    bucket.push_back(std::move(effect));
  }

  for (const auto& e : report.voice) report.voice_gap = std::max(report.voice_gap, e.gap);
  for (const auto& e : report.structure)
    report.structure_gap = std::max(report.structure_gap, e.gap);
  if (report.voice_gap > 0.0)
    report.ratio = report.structure_gap / report.voice_gap;
  else if (report.structure_gap > 0.0)
    report.ratio = std::numeric_limits<double>::infinity();
  return report;
}

std::string emit_marginal_table(const MarginalTable& table) {
  std::ostringstream os;
  os << "# factor: " << table.factor << "\n";
  os << "# level\tmedian\tcount\tci_low\tci_high\n";
  for (const auto& row : table.rows)
    os << row.level << "\t" << fmt(row.median) << "\t" << row.count << "\t"
       << fmt(row.ci_low) << "\t" << fmt(row.ci_high) << "\n";
  for (const auto& e : table.excluded) os << "# excluded\t" << e << "\n";
  return os.str();
}

std::string emit_attribution(const AttributionReport& report) {
  std::ostringstream os;
  os << "# attribution report\n";
  os << "# marginal medians: factor\tlevel\tmedian\tcount\tci_low\tci_high\n";
  const auto emit_rows = [&os](const std::vector<FactorEffect>& effects) {
    for (const auto& e : effects) {
      for (const auto& row : e.marginals.rows)
        os << e.factor << "\t" << row.level << "\t" << fmt(row.median) << "\t" << row.count
           << "\t" << fmt(row.ci_low) << "\t" << fmt(row.ci_high) << "\n";
      for (const auto& ex : e.marginals.excluded)
        os << "# excluded\t" << e.factor << "\t" << ex << "\n";
    }
  };
  emit_rows(report.voice);
  emit_rows(report.structure);

  os << "# pairwise tests: factor\tlevel_a\tlevel_b\tu\tp\tmethod\tn1\tn2\n";
  const auto emit_tests = [&os](const std::vector<FactorEffect>& effects) {
    for (const auto& e : effects)
      for (const auto& t : e.tests)
        os << e.factor << "\t" << t.level_a << "\t" << t.level_b << "\t"
           << fmt(t.test.statistic_u) << "\t" << fmt(t.test.p_two_sided) << "\t"
           << t.test.method << "\t" << t.test.n1 << "\t" << t.test.n2 << "\n";
  };
  emit_tests(report.voice);
  emit_tests(report.structure);

  os << "# effect gaps: scope\tfactor\tlevel_low\tlevel_high\tgap\tci_low\tci_high\n";
  for (const auto& e : report.voice)
    os << "voice\t" << e.factor << "\t" << e.level_low << "\t" << e.level_high << "\t"
       << fmt(e.gap) << "\t" << fmt(e.ci_low) << "\t" << fmt(e.ci_high) << "\n";
  for (const auto& e : report.structure)
    os << "structure\t" << e.factor << "\t" << e.level_low << "\t" << e.level_high << "\t"
       << fmt(e.gap) << "\t" << fmt(e.ci_low) << "\t" << fmt(e.ci_high) << "\n";
  os << "ratio\t" << fmt(report.ratio) << "\n";
  os << "# summary: largest structure-factor gap " << fmt(report.structure_gap)
     << " vs largest voice-factor gap " << fmt(report.voice_gap) << "; ratio "
     << fmt(report.ratio) << "\n";
  return os.str();
}

}  // namespace diafactor
