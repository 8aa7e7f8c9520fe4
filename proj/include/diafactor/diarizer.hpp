#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "diafactor/audio.hpp"
#include "diafactor/timeline.hpp"

namespace diafactor {

/// One embedding window cut from a speech region.
struct Subsegment {
  Ticks onset_ms = 0;
  Ticks duration_ms = 0;
  Eigen::VectorXd embedding;  // unit Euclidean norm

  Ticks offset_ms() const { return onset_ms + duration_ms; }
  Ticks center_ms() const { return onset_ms + duration_ms / 2; }
  double onset() const { return to_seconds(onset_ms); }
  double duration() const { return to_seconds(duration_ms); }
};

/// Sentinel for threshold-stopped clustering instead of an oracle count.
inline constexpr int kAutoClusters = 0;

struct DiarizerConfig {
  double window = 1.5;   // embedding window, seconds
  double hop = 0.75;     // window hop, seconds (<= window)
  double frame = 0.025;  // analysis frame, seconds
  double frame_hop = 0.010;
  int n_bands = 20;               // mel-spaced log-energy bands (>= 4)
  int n_clusters = 2;             // oracle count; kAutoClusters for threshold stop
  std::string linkage = "average";
  double stop_threshold = 0.5;    // used when n_clusters == kAutoClusters

  bool operator==(const DiarizerConfig&) const = default;
};

/// Slides windows across each speech region (hop-spaced, plus a flush window
/// ending at the region end; a region shorter than the window yields one
/// region-length window when at least window/2 long, none otherwise). The
/// embedding is the per-band log-energy mean and standard deviation over
/// frames, length-normalized.
std::vector<Subsegment> extract_subsegments(const AudioBuffer& audio, const Timeline& speech,
                                            const DiarizerConfig& cfg = {});

/// Average-linkage agglomerative clustering on cosine similarity. Stops at
/// n_clusters when oracle, else when the best merge similarity drops below
/// stop_threshold. Returned labels are contiguous integers from 0, numbered
/// by first appearance.
std::vector<int> ahc_cluster(const std::vector<Subsegment>& subs, const DiarizerConfig& cfg = {});

/// Paints cluster labels back onto the oracle speech regions: every speech
/// instant takes the majority label of the subsegments covering it (ties go
/// to the covering subsegment with the nearest center, then to the earliest);
/// instants covered by no subsegment take the label of the globally nearest
/// center. The hypothesis covers exactly the oracle speech regions.
Timeline labels_to_timeline(const std::vector<Subsegment>& subs, const std::vector<int>& labels,
                            const Timeline& speech);

/// extract + cluster + paint. Empty speech gives an empty hypothesis.
Timeline diarize(const AudioBuffer& audio, const Timeline& speech,
                 const DiarizerConfig& cfg = {});

}  // namespace diafactor
