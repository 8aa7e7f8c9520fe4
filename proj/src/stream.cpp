#include "diafactor/stream.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "diafactor/errors.hpp"

namespace diafactor {

SpeakerStream build_stream(const AudioBuffer& a, const Timeline& speech,
                           std::string speaker_id, std::map<std::string, std::string> tags) {
  validate_audio(a);
  const int sr = a.sample_rate;
  const Eigen::Index n = a.samples.size();

  Eigen::Index total = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;
  spans.reserve(speech.size());
  for (const auto& seg : speech.segments()) {
    Eigen::Index begin = tick_to_sample(seg.onset_ms, sr);
    Eigen::Index end = tick_to_sample(seg.offset_ms(), sr);
    if (begin < 0 || end > n)
      throw ValidationError("build_stream: speech segment " + std::to_string(seg.onset()) + "-" +
                            std::to_string(seg.offset()) + " s exceeds buffer of " +
                            std::to_string(a.duration()) + " s");
    spans.emplace_back(begin, end);
    total += end - begin;
  }

  SpeakerStream out;
  out.speaker_id = std::move(speaker_id);
  out.tags = std::move(tags);
  out.audio.sample_rate = sr;
  out.audio.samples.resize(total);
  Eigen::Index at = 0;
  for (const auto& [begin, end] : spans) {
    out.audio.samples.segment(at, end - begin) = a.samples.segment(begin, end - begin);
    at += end - begin;
  }
  return out;
}

namespace {

// Deterministic helpers on top of the mt19937_64 bit stream, so identical
// seeds give identical audio on every platform.
double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double next_gauss(std::mt19937_64& rng) {
  double u1 = 1.0 - next_uniform(rng);  // (0, 1]
  double u2 = next_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Constant-peak-gain two-pole bandpass, applied as an emphasis: y = x + g*bp(x).
void apply_band_emphasis(Eigen::ArrayXd& x, double center_hz, int sr) {
  constexpr double kBandwidthHz = 150.0;
  constexpr double kGain = 2.0;
  const double w0 = 2.0 * std::numbers::pi * center_hz / sr;
  const double q = center_hz / kBandwidthHz;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0;
  const double b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0;
  const double a2 = (1.0 - alpha) / a0;

  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double in = x[i];
    double bp = b0 * in + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = in;
    y2 = y1;
    y1 = bp;
    x[i] = in + kGain * bp;
  }
}

}  // namespace

SpeakerStream synth_speaker(const VoiceSpec& v, double duration, int sample_rate,
                            std::string speaker_id, std::map<std::string, std::string> tags) {
  if (!(duration > 0)) throw ValidationError("synth_speaker: duration must be positive");
  if (sample_rate < 8000) throw ValidationError("synth_speaker: sample rate below 8000 Hz");
  if (v.f0 >= sample_rate / 2.0)
    throw ValidationError("synth_speaker: f0 at or above Nyquist");
  if (v.f0 < 50.0 || v.f0 > 500.0)
    throw ValidationError("synth_speaker: f0 must be in [50, 500] Hz");
  for (double c : v.resonance_centers)
    if (!(c > 0) || c >= sample_rate / 2.0)
      throw ValidationError("synth_speaker: resonance center must lie below Nyquist");
  if (v.noise_mix < 0.0 || v.noise_mix > 1.0)
    throw ValidationError("synth_speaker: noise_mix must be in [0, 1]");
  if (v.jitter < 0.0 || v.jitter > 0.5)
    throw ValidationError("synth_speaker: jitter must be in [0, 0.5]");

  const Eigen::Index n = std::llround(duration * sample_rate);
  std::mt19937_64 rng(v.seed);

  // Source: glottal-like raised-cosine pulses at f0, period jittered.
  const double nominal_period = sample_rate / v.f0;
  const Eigen::Index pulse_len =
      std::max<Eigen::Index>(4, std::llround(0.6 * nominal_period));
  Eigen::ArrayXd pulse(pulse_len);
  for (Eigen::Index k = 0; k < pulse_len; ++k)
    pulse[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / (pulse_len - 1)));

  Eigen::ArrayXd voiced = Eigen::ArrayXd::Zero(n);
  double at = 0.0;
  while (at < static_cast<double>(n)) {
    Eigen::Index start = static_cast<Eigen::Index>(at);
    Eigen::Index len = std::min(pulse_len, n - start);
    voiced.segment(start, len) += pulse.head(len);
    double u = 2.0 * next_uniform(rng) - 1.0;
    at += std::max(1.0, nominal_period * (1.0 + v.jitter * u));
  }

  apply_band_emphasis(voiced, v.resonance_centers[0], sample_rate);
  apply_band_emphasis(voiced, v.resonance_centers[1], sample_rate);
  double voiced_rms = std::sqrt(voiced.square().mean());
  if (voiced_rms > 0) voiced /= voiced_rms;

  Eigen::ArrayXd noise(n);
  for (Eigen::Index i = 0; i < n; ++i) noise[i] = next_gauss(rng);
  double noise_rms = std::sqrt(noise.square().mean());
  if (noise_rms > 0) noise /= noise_rms;

  Eigen::ArrayXd mixed = (1.0 - v.noise_mix) * voiced + v.noise_mix * noise;
  double peak = mixed.abs().maxCoeff();
  if (peak > 0) mixed *= 0.5 / peak;

  SpeakerStream out;
  out.speaker_id = std::move(speaker_id);
  out.tags = std::move(tags);
  out.audio.sample_rate = sample_rate;
  out.audio.samples = mixed.cast<float>();
  return out;
}

}  // namespace diafactor
