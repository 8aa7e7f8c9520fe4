#pragma once

#include <map>
#include <string>
#include <vector>

#include "diafactor/timeline.hpp"

namespace diafactor {

/// Time-weighted diarization error decomposition, in seconds.
struct DerBreakdown {
  double missed = 0.0;
  double false_alarm = 0.0;
  double confusion = 0.0;
  double scored_speech = 0.0;
  double der = 0.0;  // (missed + false_alarm + confusion) / scored_speech

  bool operator==(const DerBreakdown&) const = default;
};

/// Detection scores for one reference speaker, durations in seconds.
struct SpeakerScore {
  std::string speaker_id;
  std::string role;  // role held in the designed version; empty outside one
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;  // 2*tp / (2*tp + fp + fn), zero when tp = 0

  bool operator==(const SpeakerScore&) const = default;
};

/// Full scoring result for one conversation version.
struct ScoreRecord {
  std::string version_id;
  std::map<std::string, std::string> factor_levels;
  DerBreakdown der;
  std::vector<SpeakerScore> per_speaker;   // sorted by speaker_id
  std::map<std::string, double> per_role;  // role -> f1 of the holder

  bool operator==(const ScoreRecord&) const = default;
};

/// One-to-one partial mapping hyp_label -> ref_label maximizing total mapped
/// overlap duration; zero-overlap pairings are dropped. Throws
/// ValidationError when either timeline is empty.
std::map<std::string, std::string> optimal_mapping(const Timeline& ref, const Timeline& hyp);

/// Diarization error rate with optimal speaker mapping. `collar` seconds
/// around every reference segment boundary are excluded from scoring;
/// `omit_overlap` additionally excludes regions where two or more reference
/// speakers are simultaneously active. Throws ValidationError when no scored
/// reference speech remains.
DerBreakdown compute_der(const Timeline& ref, const Timeline& hyp, double collar = 0.0,
                         bool omit_overlap = false);

/// Per-reference-speaker detection scores under the optimal mapping.
/// Reference speakers left unmapped score tp = 0, f1 = 0. Sorted by
/// speaker_id.
std::vector<SpeakerScore> per_speaker_f1(const Timeline& ref, const Timeline& hyp);

/// Scores one version end to end. `role_of_speaker` (speaker -> role) fills
/// the role fields and the per-role table; pass an empty map outside a
/// designed version.
ScoreRecord score_version(const Timeline& ref, const Timeline& hyp, std::string version_id,
                          const std::map<std::string, std::string>& role_of_speaker = {},
                          std::map<std::string, std::string> factor_levels = {},
                          double collar = 0.0, bool omit_overlap = false);

/// Mirror-averaged scores over all versions of one (structure, pair) group.
struct MirrorSummary {
  std::map<std::string, double> speaker_f1;  // speaker -> mean f1 across versions
  std::map<std::string, double> role_f1;     // role -> mean f1 of its holder
  double mean_der = 0.0;
  int versions = 0;

  bool operator==(const MirrorSummary&) const = default;
};

/// Averages one mirror group. Every role bijection must appear exactly once;
/// otherwise throws ValidationError naming the missing assignments.
MirrorSummary mirror_average(const std::vector<ScoreRecord>& group);

/// Mean speaker entropy (bits) over windows slid across the recording span.
/// Within a window only speech counts toward the speaker distribution;
/// windows with no speech are skipped. A window longer than the span
/// evaluates the whole span once. Throws ValidationError when the reference
/// has no speech or window/hop are not positive.
double subsegment_entropy(const Timeline& ref, double window, double hop);
inline double subsegment_entropy(const Timeline& ref, double window) {
  return subsegment_entropy(ref, window, window / 2.0);
}

/// Tab-separated scores listing: per version one summary row
/// `version_id der missed fa confusion scored_speech factors` followed by one
/// row per speaker `version_id speaker role tp fp fn f1 factors`.
std::string emit_scores(const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> parse_scores(const std::string& text);
void write_scores_file(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores_file(const std::string& path);

}  // namespace diafactor
