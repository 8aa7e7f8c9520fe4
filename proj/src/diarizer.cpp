#include "diafactor/diarizer.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "diafactor/errors.hpp"
#include "diafactor/intervals.hpp"

namespace diafactor {

namespace {

void validate_config(const DiarizerConfig& cfg) {
  if (!(cfg.window > 0) || !(cfg.hop > 0) || cfg.hop > cfg.window)
    throw ValidationError("diarizer: require 0 < hop <= window");
  if (!(cfg.frame > 0) || !(cfg.frame_hop > 0) || cfg.frame_hop > cfg.frame)
    throw ValidationError("diarizer: require 0 < frame_hop <= frame");
  if (cfg.n_bands < 4) throw ValidationError("diarizer: n_bands must be at least 4");
  if (cfg.linkage != "average")
    throw ValidationError("diarizer: unsupported linkage '" + cfg.linkage + "'");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular mel-spaced filters over the one-sided spectrum.
Eigen::MatrixXd mel_filterbank(int n_bands, int n_fft, int sample_rate) {
  const int bins = n_fft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_bands, bins);
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_bands + 2);
  for (int i = 0; i < n_bands + 2; ++i) edges[i] = mel_to_hz(mel_max * i / (n_bands + 1));
  for (int b = 0; b < n_bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      if (f <= lo || f >= hi) continue;
      fb(b, k) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
    }
  }
  return fb;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

std::vector<Subsegment> extract_subsegments(const AudioBuffer& audio, const Timeline& speech,
                                            const DiarizerConfig& cfg) {
  validate_config(cfg);
  validate_audio(audio);
  if (speech.empty()) return {};
  if (speech.span_begin_ms() < 0 ||
      tick_to_sample(speech.span_end_ms(), audio.sample_rate) > audio.samples.size())
    throw ValidationError("extract_subsegments: speech exceeds audio bounds");

  const int sr = audio.sample_rate;
  const Ticks w = to_ticks(cfg.window);
  const Ticks h = to_ticks(cfg.hop);
  const Eigen::Index frame_len = std::llround(cfg.frame * sr);
  const Eigen::Index frame_hop = std::llround(cfg.frame_hop * sr);
  if (frame_len < 2 || frame_hop < 1)
    throw ValidationError("extract_subsegments: frame too short for the sample rate");
  const int n_fft = next_pow2(static_cast<int>(frame_len));
  const int bins = n_fft / 2 + 1;
  const Eigen::MatrixXd fb = mel_filterbank(cfg.n_bands, n_fft, sr);

  Eigen::ArrayXd hann(frame_len);
  for (Eigen::Index i = 0; i < frame_len; ++i)
    hann[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (frame_len - 1)));

  Eigen::FFT<double> fft;
  std::vector<double> frame_buf(n_fft);
  std::vector<std::complex<double>> spectrum;

  auto embed = [&](Ticks onset, Ticks duration) {
    const Eigen::Index s0 = tick_to_sample(onset, sr);
    const Eigen::Index s1 = tick_to_sample(onset + duration, sr);

    Eigen::ArrayXd mean = Eigen::ArrayXd::Zero(cfg.n_bands);
    Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(cfg.n_bands);
    long frames = 0;
    for (Eigen::Index at = s0; at + frame_len <= s1 || (frames == 0 && at < s1);
         at += frame_hop) {
      const Eigen::Index len = std::min(frame_len, s1 - at);
      std::fill(frame_buf.begin(), frame_buf.end(), 0.0);
      for (Eigen::Index i = 0; i < len; ++i)
        frame_buf[i] = static_cast<double>(audio.samples[at + i]) * hann[i];
      fft.fwd(spectrum, frame_buf);
      Eigen::VectorXd power(bins);
      for (int k = 0; k < bins; ++k) power[k] = std::norm(spectrum[k]);
      Eigen::ArrayXd band = (fb * power).array() + 1e-12;
      Eigen::ArrayXd logs = band.log();
      mean += logs;
      sq += logs.square();
      ++frames;
      if (len < frame_len) break;  // final partial frame of a tiny window
    }
    mean /= static_cast<double>(frames);
    Eigen::ArrayXd variance = (sq / static_cast<double>(frames) - mean.square()).max(0.0);

    Subsegment s;
    s.onset_ms = onset;
    s.duration_ms = duration;
    s.embedding.resize(2 * cfg.n_bands);
    s.embedding.head(cfg.n_bands) = mean.matrix();
    s.embedding.tail(cfg.n_bands) = variance.sqrt().matrix();
    const double norm = s.embedding.norm();
    if (norm > 0) s.embedding /= norm;
    return s;
  };

  std::vector<Subsegment> out;
  const IntervalSet regions = speech.covered_intervals();
  for (const auto& [a, b] : regions.intervals()) {
    const Ticks len = b - a;
    if (2 * len < w) continue;  // shorter than half a window: no evidence
    if (len < w) {
      out.push_back(embed(a, len));
      continue;
    }
    Ticks last = a;
    for (Ticks t = a; t + w <= b; t += h) {
      out.push_back(embed(t, w));
      last = t;
    }
    if (b - w > last) out.push_back(embed(b - w, w));  // flush to the region end
  }
  return out;
}

std::vector<int> ahc_cluster(const std::vector<Subsegment>& subs, const DiarizerConfig& cfg) {
  validate_config(cfg);
  const int n = static_cast<int>(subs.size());
  if (n == 0) throw ValidationError("ahc_cluster: no subsegments");
  if (cfg.n_clusters != kAutoClusters && (cfg.n_clusters < 1 || cfg.n_clusters > n))
    throw ValidationError("ahc_cluster: n_clusters " + std::to_string(cfg.n_clusters) +
                          " out of range for " + std::to_string(n) + " subsegments");
  const auto dim = subs.front().embedding.size();
  for (const auto& s : subs)
    if (s.embedding.size() != dim)
      throw ValidationError("ahc_cluster: embeddings disagree on length");

  Eigen::MatrixXd sim(n, n);
  for (int i = 0; i < n; ++i) {
    sim(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double denom = subs[i].embedding.norm() * subs[j].embedding.norm();
      const double s = denom > 0 ? subs[i].embedding.dot(subs[j].embedding) / denom : 0.0;
      sim(i, j) = sim(j, i) = s;
    }
  }

  std::vector<bool> active(n, true);
  std::vector<int> size(n, 1);
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };

  int clusters = n;
  const int target = cfg.n_clusters == kAutoClusters ? 1 : cfg.n_clusters;
  while (clusters > target) {
    int bi = -1, bj = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        if (sim(i, j) > best) {
          best = sim(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (cfg.n_clusters == kAutoClusters && best < cfg.stop_threshold) break;
    // average linkage: similarity to the merged cluster is the size-weighted
    // mean of the similarities to its parts
    for (int k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      sim(bi, k) = sim(k, bi) =
          (size[bi] * sim(bi, k) + size[bj] * sim(bj, k)) / (size[bi] + size[bj]);
    }
    size[bi] += size[bj];
    active[bj] = false;
    parent[bj] = bi;
    --clusters;
  }

  std::vector<int> labels(n, -1);
  int next_label = 0;
  std::vector<int> label_of_root(n, -1);
  for (int i = 0; i < n; ++i) {
    const int root = find(i);
    if (label_of_root[root] < 0) label_of_root[root] = next_label++;
    labels[i] = label_of_root[root];
  }
  return labels;
}

Timeline labels_to_timeline(const std::vector<Subsegment>& subs, const std::vector<int>& labels,
                            const Timeline& speech) {
  if (labels.size() != subs.size())
    throw ValidationError("labels_to_timeline: labels do not align with subsegments");
  if (speech.empty()) return Timeline(speech.recording_id(), {});
  if (subs.empty())
    throw ValidationError("labels_to_timeline: no subsegments to paint over speech");

  auto label_at = [&](Ticks t1, Ticks t2) {
    const Ticks mid = t1 + (t2 - t1) / 2;
    // majority over covering subsegments
    std::map<int, int> votes;
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (subs[i].onset_ms <= t1 && t2 <= subs[i].offset_ms()) ++votes[labels[i]];
    if (!votes.empty()) {
      int top = 0;
      for (const auto& [label, count] : votes) top = std::max(top, count);
      // tie: the covering subsegment with the nearest center, earliest first
      Ticks best_dist = std::numeric_limits<Ticks>::max();
      int best_label = -1;
      for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!(subs[i].onset_ms <= t1 && t2 <= subs[i].offset_ms())) continue;
        if (votes[labels[i]] != top) continue;
        const Ticks dist = std::abs(subs[i].center_ms() - mid);
        if (dist < best_dist) {
          best_dist = dist;
          best_label = labels[i];
        }
      }
      return best_label;
    }
    // uncovered instant: globally nearest center
    Ticks best_dist = std::numeric_limits<Ticks>::max();
    int best_label = -1;
    for (std::size_t i = 0; i < subs.size(); ++i) {
      const Ticks dist = std::abs(subs[i].center_ms() - mid);
      if (dist < best_dist) {
        best_dist = dist;
        best_label = labels[i];
      }
    }
    return best_label;
  };

  std::vector<Segment> segments;
  const IntervalSet regions = speech.covered_intervals();
  for (const auto& [a, b] : regions.intervals()) {
    std::vector<Ticks> cuts{a, b};
    for (const auto& s : subs) {
      if (s.onset_ms > a && s.onset_ms < b) cuts.push_back(s.onset_ms);
      if (s.offset_ms() > a && s.offset_ms() < b) cuts.push_back(s.offset_ms());
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    Ticks run_begin = a;
    int run_label = label_at(cuts[0], cuts[1]);
    for (std::size_t k = 1; k + 1 < cuts.size(); ++k) {
      const int label = label_at(cuts[k], cuts[k + 1]);
      if (label != run_label) {
        segments.push_back({run_begin, cuts[k] - run_begin, std::to_string(run_label)});
        run_begin = cuts[k];
        run_label = label;
      }
    }
    segments.push_back({run_begin, b - run_begin, std::to_string(run_label)});
  }
  return Timeline(speech.recording_id(), std::move(segments));
}

Timeline diarize(const AudioBuffer& audio, const Timeline& speech, const DiarizerConfig& cfg) {
  if (speech.empty()) return Timeline(speech.recording_id(), {});
  auto subs = extract_subsegments(audio, speech, cfg);
  if (subs.empty())
    throw ValidationError("diarize: every speech region is shorter than half the window");
  DiarizerConfig effective = cfg;
  if (cfg.n_clusters != kAutoClusters)
    effective.n_clusters = std::min<int>(cfg.n_clusters, static_cast<int>(subs.size()));
  auto labels = ahc_cluster(subs, effective);
  return labels_to_timeline(subs, labels, speech);
}

}  // namespace diafactor
