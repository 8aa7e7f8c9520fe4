#include "diafactor/vad.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "diafactor/errors.hpp"

namespace diafactor {

Timeline energy_vad(const AudioBuffer& a, const VadParams& params) {
  validate_audio(a);
  if (a.samples.size() == 0) throw ValidationError("energy_vad: empty audio");
  if (!(params.hop > 0) || params.frame < params.hop)
    throw ValidationError("energy_vad: need frame >= hop > 0");

  const int sr = a.sample_rate;
  const Eigen::Index n = a.samples.size();
  const Eigen::Index frame_len = std::max<Eigen::Index>(1, std::llround(params.frame * sr));
  const Eigen::Index hop_len = std::max<Eigen::Index>(1, std::llround(params.hop * sr));

  Eigen::Index n_frames = n >= frame_len ? (n - frame_len) / hop_len + 1 : 1;
  std::vector<double> energy_db(static_cast<std::size_t>(n_frames));
  for (Eigen::Index i = 0; i < n_frames; ++i) {
    Eigen::Index begin = i * hop_len;
    Eigen::Index len = std::min(frame_len, n - begin);
    double mean_square =
        a.samples.segment(begin, len).cast<double>().square().mean();
    energy_db[static_cast<std::size_t>(i)] = 10.0 * std::log10(mean_square + 1e-20);
  }

  std::vector<double> sorted = energy_db;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median_db = sorted[sorted.size() / 2];
  const double threshold = std::min(median_db + params.threshold_db, params.speech_floor_db);

  // Detected frame spans, unioned in sample space.
  IntervalSet regions;
  for (Eigen::Index i = 0; i < n_frames; ++i) {
    if (energy_db[static_cast<std::size_t>(i)] > threshold) {
      Eigen::Index begin = i * hop_len;
      regions.add(begin, std::min(begin + frame_len, n));
    }
  }

  const Eigen::Index hang = std::llround(params.hangover * sr);
  IntervalSet smoothed;
  for (const auto& [b, e] : regions.intervals()) smoothed.add(b, std::min(e + hang, n));

  std::vector<Segment> segments;
  Ticks prev_end = -1;
  for (const auto& [b, e] : smoothed.intervals()) {
    Ticks onset = to_ticks(static_cast<double>(b) / sr);
    Ticks offset = to_ticks(static_cast<double>(e) / sr);
    if (offset <= onset) continue;
    if (!segments.empty() && onset - prev_end < to_ticks(params.hangover)) {
      segments.back().duration_ms = offset - segments.back().onset_ms;
    } else {
      segments.push_back({onset, offset - onset, kSpeechLabel});
    }
    prev_end = offset;
  }
  return Timeline("", std::move(segments));
}

}  // namespace diafactor
