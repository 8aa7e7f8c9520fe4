#include "diafactor/splicer.hpp"

#include <algorithm>
#include <filesystem>

#include "diafactor/errors.hpp"
#include "diafactor/parallel.hpp"
#include "diafactor/rttm.hpp"

namespace diafactor {

RenderedConversation render(const ConversationVersion& v,
                            const std::map<std::string, SpeakerStream>& streams,
                            double taper) {
  if (taper < 0) throw ValidationError("render: taper must be non-negative");

  int sample_rate = 0;
  for (const auto& [role, speaker] : v.assignment.mapping) {
    auto it = streams.find(speaker);
    if (it == streams.end())
      throw ValidationError("render: no stream for speaker '" + speaker + "' (version '" +
                            v.version_id + "')");
    if (sample_rate == 0)
      sample_rate = it->second.audio.sample_rate;
    else if (it->second.audio.sample_rate != sample_rate)
      throw ValidationError("render: streams disagree on sample rate (version '" + v.version_id +
                            "')");
  }
  if (sample_rate == 0)
    throw ValidationError("render: version '" + v.version_id + "' assigns no speakers");

  const Ticks taper_ticks = to_ticks(taper);
  for (const auto& slot : v.structure.slots) {
    if (slot.is_silence()) continue;
    if (!v.assignment.mapping.count(slot.role))
      throw ValidationError("render: role '" + slot.role + "' has no assigned speaker (version '" +
                            v.version_id + "')");
    if (2 * taper_ticks > slot.duration_ms)
      throw ValidationError("render: taper " + std::to_string(taper) +
                            " s exceeds half of a " + std::to_string(slot.duration()) +
                            " s slot (version '" + v.version_id + "')");
  }

  RenderedConversation out;
  out.version_id = v.version_id;
  out.audio.sample_rate = sample_rate;
  out.audio.samples =
      Eigen::ArrayXf::Zero(tick_to_sample(v.structure.total_ms(), sample_rate));

  const Eigen::Index ramp = std::llround(taper * sample_rate);
  std::map<std::string, Eigen::Index> cursor;
  std::vector<Segment> reference;
  Ticks at_ms = 0;
  for (const auto& slot : v.structure.slots) {
    const Eigen::Index begin = tick_to_sample(at_ms, sample_rate);
    const Eigen::Index end = tick_to_sample(at_ms + slot.duration_ms, sample_rate);
    const Eigen::Index n = end - begin;
    if (!slot.is_silence()) {
      const std::string& speaker = v.assignment.mapping.at(slot.role);
      const SpeakerStream& stream = streams.at(speaker);
      Eigen::Index& c = cursor[speaker];
      if (c + n > stream.audio.samples.size())
        throw ValidationError("render: speaker '" + speaker + "' has " +
                              std::to_string(stream.available_duration()) +
                              " s available but version '" + v.version_id + "' needs more");
      auto span = out.audio.samples.segment(begin, n);
      span = stream.audio.samples.segment(c, n);
      if (ramp > 0) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double gain = std::min({1.0, static_cast<double>(i) / ramp,
                                        static_cast<double>(n - 1 - i) / ramp});
          span[i] *= static_cast<float>(gain);
        }
      }
      c += n;
      out.consumed[speaker] += static_cast<double>(n) / sample_rate;
      reference.push_back({at_ms, slot.duration_ms, speaker});
    }
    at_ms += slot.duration_ms;
  }
  out.reference = Timeline(v.version_id, std::move(reference));
  return out;
}

std::vector<RenderedFile> render_design(const Design& d,
                                        const std::map<std::string, SpeakerStream>& streams,
                                        const std::string& output_dir, double taper,
                                        int workers) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw IoError("render_design: cannot create '" + output_dir + "': " + ec.message());

  std::vector<RenderedFile> files(d.versions.size());
  parallel_for(d.versions.size(), workers, [&](std::size_t i) {
    const auto& v = d.versions[i];
    auto rendered = render(v, streams, taper);
    RenderedFile f;
    f.version_id = v.version_id;
    f.wav_path = (std::filesystem::path(output_dir) / (v.version_id + ".wav")).string();
    f.rttm_path = (std::filesystem::path(output_dir) / (v.version_id + ".rttm")).string();
    f.duration_sec = rendered.audio.duration();
    write_wav(f.wav_path, rendered.audio);
    write_rttm_file(f.rttm_path, rendered.reference);
    files[i] = std::move(f);
  });
  return files;
}

}  // namespace diafactor
