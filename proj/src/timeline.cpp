#include "diafactor/timeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "diafactor/errors.hpp"

namespace diafactor {

Segment Segment::from_seconds(double onset, double duration, std::string label) {
  return Segment{to_ticks(onset), to_ticks(duration), std::move(label)};
}

Timeline::Timeline(std::string recording_id, std::vector<Segment> segments)
    : recording_id_(std::move(recording_id)), segments_(std::move(segments)) {
  for (const auto& s : segments_) {
    if (s.label.empty())
      throw ValidationError("timeline '" + recording_id_ + "': empty segment label");
    if (s.onset_ms < 0)
      throw ValidationError("timeline '" + recording_id_ + "': negative onset for label '" +
                            s.label + "'");
    if (s.duration_ms <= 0)
      throw ValidationError("timeline '" + recording_id_ + "': non-positive duration for label '" +
                            s.label + "'");
  }
  std::sort(segments_.begin(), segments_.end(), [](const Segment& a, const Segment& b) {
    return std::tie(a.onset_ms, a.label, a.duration_ms) <
           std::tie(b.onset_ms, b.label, b.duration_ms);
  });
}

std::vector<std::string> Timeline::labels() const {
  std::set<std::string> s;
  for (const auto& seg : segments_) s.insert(seg.label);
  return {s.begin(), s.end()};
}

Ticks Timeline::label_time_ms(const std::string& label) const {
  Ticks sum = 0;
  for (const auto& seg : segments_)
    if (seg.label == label) sum += seg.duration_ms;
  return sum;
}

Ticks Timeline::total_speech_ms() const {
  Ticks sum = 0;
  for (const auto& seg : segments_) sum += seg.duration_ms;
  return sum;
}

Ticks Timeline::span_begin_ms() const {
  return segments_.empty() ? 0 : segments_.front().onset_ms;
}

Ticks Timeline::span_end_ms() const {
  Ticks end = 0;
  for (const auto& seg : segments_) end = std::max(end, seg.offset_ms());
  return end;
}

IntervalSet Timeline::label_intervals(const std::string& label) const {
  IntervalSet out;
  for (const auto& seg : segments_)
    if (seg.label == label) out.add(seg.onset_ms, seg.offset_ms());
  return out;
}

IntervalSet Timeline::covered_intervals() const {
  IntervalSet out;
  for (const auto& seg : segments_) out.add(seg.onset_ms, seg.offset_ms());
  return out;
}

IntervalSet Timeline::overlap_intervals() const {
  // Sweep over onset/offset events counting distinct active labels.
  struct Event {
    Ticks at;
    int delta;
    const std::string* label;
  };
  std::vector<Event> events;
  events.reserve(segments_.size() * 2);
  for (const auto& seg : segments_) {
    events.push_back({seg.onset_ms, +1, &seg.label});
    events.push_back({seg.offset_ms(), -1, &seg.label});
  }
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.at < b.at; });

  IntervalSet out;
  std::map<std::string, int> active;
  std::size_t distinct = 0;
  std::size_t i = 0;
  Ticks prev = 0;
  while (i < events.size()) {
    Ticks at = events[i].at;
    if (distinct >= 2) out.add(prev, at);
    while (i < events.size() && events[i].at == at) {
      int& count = active[*events[i].label];
      if (count == 0 && events[i].delta > 0) ++distinct;
      count += events[i].delta;
      if (count == 0) --distinct;
      ++i;
    }
    prev = at;
  }
  return out;
}

}  // namespace diafactor
