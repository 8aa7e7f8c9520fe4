#pragma once

#include <map>
#include <string>
#include <vector>

#include "diafactor/design.hpp"
#include "diafactor/timeline.hpp"

namespace diafactor {

/// One conversation version rendered to audio plus its exact reference.
struct RenderedConversation {
  std::string version_id;
  AudioBuffer audio;
  Timeline reference;                      // labels are speaker_ids, no overlap
  std::map<std::string, double> consumed;  // speaker_id -> seconds drawn
};

/// Renders one version: each speech slot copies the next consecutive span
/// from the assigned speaker's stream (per-speaker cursors start at zero for
/// every version), silence slots render as zeros, and every speech slot is
/// volume-ramped linearly 0->1 over the first `taper` seconds and 1->0 over
/// the last. Throws ValidationError when a stream is missing or too short,
/// when sample rates disagree, or when taper exceeds half the shortest
/// speech slot.
RenderedConversation render(const ConversationVersion& v,
                            const std::map<std::string, SpeakerStream>& streams,
                            double taper = 0.01);

/// Descriptor of one rendered version on disk.
struct RenderedFile {
  std::string version_id;
  std::string wav_path;
  std::string rttm_path;
  double duration_sec = 0.0;
};

/// Renders every version of the design into `output_dir` as
/// `<version_id>.wav` + `<version_id>.rttm`, overwriting identically on
/// re-runs. Versions render in parallel across `workers` threads.
std::vector<RenderedFile> render_design(const Design& d,
                                        const std::map<std::string, SpeakerStream>& streams,
                                        const std::string& output_dir, double taper = 0.01,
                                        int workers = 1);

}  // namespace diafactor
