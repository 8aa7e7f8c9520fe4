#pragma once

#include <utility>
#include <vector>

#include "diafactor/time.hpp"

namespace diafactor {

/// Sorted, disjoint, half-open [begin, end) tick intervals with set algebra.
class IntervalSet {
 public:
  using Interval = std::pair<Ticks, Ticks>;

  IntervalSet() = default;

  // Inserts [begin, end), merging with touching or overlapping intervals.
  // Empty or inverted ranges are ignored.
  void add(Ticks begin, Ticks end);

  bool empty() const { return intervals_.empty(); }
  std::size_t size() const { return intervals_.size(); }
  const std::vector<Interval>& intervals() const { return intervals_; }

  Ticks total() const;

  IntervalSet unite(const IntervalSet& other) const;
  IntervalSet intersect(const IntervalSet& other) const;
  IntervalSet subtract(const IntervalSet& other) const;

  // Overlap of this set with a single [begin, end) range.
  Ticks intersect_total(Ticks begin, Ticks end) const;

  bool operator==(const IntervalSet&) const = default;

 private:
  std::vector<Interval> intervals_;
};

}  // namespace diafactor
