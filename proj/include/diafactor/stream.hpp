#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "diafactor/audio.hpp"
#include "diafactor/timeline.hpp"

namespace diafactor {

/// One speaker's continuous speech-only audio plus experiment tags.
struct SpeakerStream {
  std::string speaker_id;
  std::map<std::string, std::string> tags;  // factor -> level (gender, language, ...)
  AudioBuffer audio;

  double available_duration() const { return audio.duration(); }
  Ticks available_ms() const { return audio.duration_ms(); }
};

/// Concatenates the speech regions of `a` in temporal order into one
/// continuous stream. Throws ValidationError when a region leaves the buffer.
SpeakerStream build_stream(const AudioBuffer& a, const Timeline& speech,
                           std::string speaker_id,
                           std::map<std::string, std::string> tags = {});

/// Parameters of one synthetic voice: a jittered pulse-train source shaped
/// by two resonant band emphases and mixed with white noise. A stand-in for
/// natural voice characteristics so acoustic difficulty can be planted.
struct VoiceSpec {
  double f0 = 120.0;                                   // Hz, in [50, 500]
  std::array<double, 2> resonance_centers = {900.0, 2200.0};  // Hz, below Nyquist
  double noise_mix = 0.1;                              // in [0, 1]
  double jitter = 0.01;                                // fractional f0 perturbation per period
  std::uint64_t seed = 0;
};

/// Renders `duration` seconds of a deterministic synthetic voice, peak
/// normalized to 0.5. Identical specs give bit-identical streams.
SpeakerStream synth_speaker(const VoiceSpec& v, double duration, int sample_rate,
                            std::string speaker_id = "synth",
                            std::map<std::string, std::string> tags = {});

}  // namespace diafactor
