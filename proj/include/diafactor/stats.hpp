#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace diafactor {

// One scored observation feeding the marginal analysis: a version-level metric
// (speaker_id empty) or a per-speaker metric such as a mirror-averaged F1.
struct AnalysisRecord {
  std::string structure_id;
  std::string pair_id;
  std::string speaker_id;
  std::map<std::string, std::string> factor_levels;
  double metric = 0.0;

  bool operator==(const AnalysisRecord&) const = default;
};

// Aggregation unit for marginal tables: average each unit's records first,
// then take medians across units.
enum class Unit { kPair, kStructure, kSpeaker };

struct MarginalRow {
  std::string level;
  double median = 0.0;
  std::size_t count = 0;  // units contributing at this level
  double ci_low = 0.0;
  double ci_high = 0.0;

  bool operator==(const MarginalRow&) const = default;
};

struct MarginalTable {
  std::string factor;
  std::vector<MarginalRow> rows;      // sorted by level
  std::vector<std::string> excluded;  // "unit@level" entries with no records

  bool operator==(const MarginalTable&) const = default;
};

struct TestResult {
  double statistic_u = 0.0;  // U of the first sample
  double p_two_sided = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::string method;  // "exact" or "normal_approx"

  bool operator==(const TestResult&) const = default;
};

struct BootstrapInterval {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  bool operator==(const BootstrapInterval&) const = default;
};

struct PairwiseTest {
  std::string level_a;
  std::string level_b;
  TestResult test;

  bool operator==(const PairwiseTest&) const = default;
};

// Everything the report knows about one factor: the unit-aggregated marginal
// table, level-pair significance tests on per-version samples, and the gap
// between the extreme levels. A level's value is the equal-weight mean over
// partner-factor cells of the within-cell median, so the other factors cancel;
// the gap interval comes from a bootstrap that resamples within each
// (level, cell) stratum.
struct FactorEffect {
  std::string factor;
  MarginalTable marginals;
  std::vector<PairwiseTest> tests;
  std::string level_low;
  std::string level_high;
  double gap = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  bool operator==(const FactorEffect&) const = default;
};

struct AttributionReport {
  std::vector<FactorEffect> voice;      // factors prefixed pair_
  std::vector<FactorEffect> structure;  // factors prefixed structure_
  double voice_gap = 0.0;               // largest voice-factor gap
  double structure_gap = 0.0;           // largest structure-factor gap
  double ratio = 0.0;                   // structure_gap / voice_gap

  bool operator==(const AttributionReport&) const = default;
};

// Median of a sample (midpoint of the middle two for even sizes).
// Throws ValidationError when the sample is empty.
double median(std::vector<double> values);

// Two-sided Mann-Whitney U test with midrank tie handling. Uses the exact
// permutation distribution when max(n1, n2) <= 10 and the pooled sample is
// tie-free; otherwise a normal approximation with continuity correction and
// tie-corrected variance. Two samples drawn from identical values give p = 1.
TestResult mann_whitney_u(const std::vector<double>& sample1,
                          const std::vector<double>& sample2);

// Percentile bootstrap interval (95%) for the median of one sample.
// Resample i draws from a generator seeded with seed + i, so the interval is
// deterministic given the seed and independent of input order.
BootstrapInterval bootstrap_median(const std::vector<double>& sample, int n_boot,
                                   std::uint64_t seed);

// Percentile bootstrap interval (95%) for median(sample_a) - median(sample_b).
BootstrapInterval bootstrap_median_diff(const std::vector<double>& sample_a,
                                        const std::vector<double>& sample_b, int n_boot,
                                        std::uint64_t seed);

// Marginal medians for one factor: each unit's records are averaged first
// (cell means over the remaining factors, cells weighted equally), then each
// level's median is taken across units. Units absent from a level are listed
// in `excluded` as "unit@level".
MarginalTable marginal_medians(const std::vector<AnalysisRecord>& records, Unit unit,
                               const std::string& factor, int n_boot = 1000,
                               std::uint64_t seed = 1);

// Separates voice effects (pair_* factors, aggregated per pair) from structure
// effects (structure_* factors, aggregated per structure). Requires a complete
// crossing of all declared factor levels; throws ValidationError listing the
// missing cells otherwise.
AttributionReport attribution_report(const std::vector<AnalysisRecord>& records,
                                     int n_boot = 1000, std::uint64_t seed = 1);

// Tab-separated renderings. The attribution report carries its marginal
// tables, pairwise tests, per-factor gaps, and a closing summary block.
std::string emit_marginal_table(const MarginalTable& table);
std::string emit_attribution(const AttributionReport& report);

}  // namespace diafactor
