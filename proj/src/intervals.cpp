#include "diafactor/intervals.hpp"

#include <algorithm>

namespace diafactor {

void IntervalSet::add(Ticks begin, Ticks end) {
  if (end <= begin) return;
  auto it = std::lower_bound(
      intervals_.begin(), intervals_.end(), begin,
      [](const Interval& iv, Ticks b) { return iv.second < b; });
  // it is the first interval whose end >= begin, i.e. the first candidate to
  // merge with.
  Ticks nb = begin;
  Ticks ne = end;
  auto first = it;
  while (it != intervals_.end() && it->first <= ne) {
    nb = std::min(nb, it->first);
    ne = std::max(ne, it->second);
    ++it;
  }
  it = intervals_.erase(first, it);
  intervals_.insert(it, {nb, ne});
}

Ticks IntervalSet::total() const {
  Ticks sum = 0;
  for (const auto& [b, e] : intervals_) sum += e - b;
  return sum;
}

IntervalSet IntervalSet::unite(const IntervalSet& other) const {
  IntervalSet out = *this;
  for (const auto& [b, e] : other.intervals_) out.add(b, e);
  return out;
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const {
  IntervalSet out;
  std::size_t i = 0, j = 0;
  while (i < intervals_.size() && j < other.intervals_.size()) {
    const auto& a = intervals_[i];
    const auto& b = other.intervals_[j];
    Ticks lo = std::max(a.first, b.first);
    Ticks hi = std::min(a.second, b.second);
    if (lo < hi) out.intervals_.push_back({lo, hi});
    if (a.second < b.second) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

IntervalSet IntervalSet::subtract(const IntervalSet& other) const {
  IntervalSet out;
  std::size_t j = 0;
  for (const auto& [b, e] : intervals_) {
    Ticks cur = b;
    while (j < other.intervals_.size() && other.intervals_[j].second <= cur) ++j;
    std::size_t k = j;
    while (cur < e) {
      if (k >= other.intervals_.size() || other.intervals_[k].first >= e) {
        out.intervals_.push_back({cur, e});
        break;
      }
      const auto& cut = other.intervals_[k];
      if (cut.first > cur) out.intervals_.push_back({cur, cut.first});
      cur = std::max(cur, cut.second);
      ++k;
    }
  }
  return out;
}

Ticks IntervalSet::intersect_total(Ticks begin, Ticks end) const {
  if (end <= begin) return 0;
  Ticks sum = 0;
  auto it = std::lower_bound(
      intervals_.begin(), intervals_.end(), begin,
      [](const Interval& iv, Ticks b) { return iv.second <= b; });
  for (; it != intervals_.end() && it->first < end; ++it) {
    sum += std::min(end, it->second) - std::max(begin, it->first);
  }
  return sum;
}

}  // namespace diafactor
