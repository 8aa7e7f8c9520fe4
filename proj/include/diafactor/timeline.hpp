#pragma once

#include <string>
#include <vector>

#include "diafactor/intervals.hpp"
#include "diafactor/time.hpp"

namespace diafactor {

/// One speaker-labeled, timed segment of a recording.
struct Segment {
  Ticks onset_ms = 0;
  Ticks duration_ms = 0;
  std::string label;

  static Segment from_seconds(double onset, double duration, std::string label);

  Ticks offset_ms() const { return onset_ms + duration_ms; }
  double onset() const { return to_seconds(onset_ms); }
  double duration() const { return to_seconds(duration_ms); }
  double offset() const { return to_seconds(offset_ms()); }

  bool operator==(const Segment&) const = default;
};

/// A set of speaker-labeled segments over one recording, kept sorted by
/// (onset, label, duration). The shared representation for references,
/// hypotheses and VAD output. Overlap between differently-labeled segments
/// is permitted and queryable.
class Timeline {
 public:
  Timeline() = default;
  Timeline(std::string recording_id, std::vector<Segment> segments);

  const std::string& recording_id() const { return recording_id_; }
  const std::vector<Segment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }
  std::size_t size() const { return segments_.size(); }

  /// Distinct labels, sorted.
  std::vector<std::string> labels() const;

  /// Sum of segment durations carrying this label.
  Ticks label_time_ms(const std::string& label) const;

  /// Sum of all segment durations (double-counts overlap).
  Ticks total_speech_ms() const;

  Ticks span_begin_ms() const;  // first onset (0 when empty)
  Ticks span_end_ms() const;    // last offset (0 when empty)

  /// Union of this label's segments as an interval set.
  IntervalSet label_intervals(const std::string& label) const;

  /// Union of all segments regardless of label.
  IntervalSet covered_intervals() const;

  /// Regions where two or more distinct labels are simultaneously active.
  IntervalSet overlap_intervals() const;
  Ticks overlapped_time_ms() const { return overlap_intervals().total(); }
  bool has_overlap() const { return !overlap_intervals().empty(); }

  bool operator==(const Timeline&) const = default;

 private:
  std::string recording_id_;
  std::vector<Segment> segments_;
};

}  // namespace diafactor
