#pragma once

#include <Eigen/Dense>
#include <string>

#include "diafactor/time.hpp"

namespace diafactor {

/// Mono audio held as float amplitudes in [-1, 1].
struct AudioBuffer {
  Eigen::ArrayXf samples;
  int sample_rate = 8000;

  Eigen::Index size() const { return samples.size(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  Ticks duration_ms() const {
    return to_ticks(duration());
  }
};

/// Throws ValidationError unless samples are finite and sample_rate >= 8000.
void validate_audio(const AudioBuffer& a);

/// 16-bit PCM mono little-endian WAV. The reader rejects any other encoding,
/// channel count or bit depth with a clear error. The writer quantizes with
/// round-half-away-from-zero at 32767 full scale.
AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& a);

}  // namespace diafactor
