#pragma once

#include "diafactor/audio.hpp"
#include "diafactor/timeline.hpp"

namespace diafactor {

inline const std::string kSpeechLabel = "speech";

/// Adaptive energy voice activity detection.
struct VadParams {
  double frame = 0.03;         // analysis frame, seconds
  double hop = 0.01;           // frame hop, seconds
  double threshold_db = 6.0;   // dB over the stream's median frame energy
  double hangover = 0.1;       // region extension / merge gap, seconds
  // Absolute cap on the adaptive threshold (dBFS power). Without it a
  // stream that is entirely speech would place its median above every
  // frame and detect nothing.
  double speech_floor_db = -40.0;

  bool operator==(const VadParams&) const = default;
};

/// Marks a frame as speech when its energy exceeds both thresholds'
/// minimum: (median frame energy + threshold_db) capped at speech_floor_db.
/// Detected frames are unioned, region ends are extended by the hangover,
/// and regions separated by less than the hangover are merged. Returns a
/// Timeline labeled "speech"; all-silent audio gives an empty Timeline.
Timeline energy_vad(const AudioBuffer& a, const VadParams& params = {});

}  // namespace diafactor
