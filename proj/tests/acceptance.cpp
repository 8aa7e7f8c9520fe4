// Acceptance suite: one line per criterion, PASS/FAIL, with the measured
// values and the runtime budget. Exit code 0 only when every criterion holds.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "diafactor/design.hpp"
#include "diafactor/diarizer.hpp"
#include "diafactor/pipeline.hpp"
#include "diafactor/rttm.hpp"
#include "diafactor/scoring.hpp"
#include "diafactor/splicer.hpp"
#include "diafactor/stats.hpp"
#include "diafactor/stream.hpp"
#include "diafactor/structure.hpp"
#include "diafactor/time.hpp"

using namespace diafactor;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

namespace {

// ---- shared fixtures -------------------------------------------------------

// The 19 s worked schedule: A 3,2,4 | B 1.5,0.5 | A 6,2.
ConversationStructure worked_structure() {
  return {"worked",
          {},
          {{"A", 3000}, {"A", 2000}, {"A", 4000}, {"B", 1500}, {"B", 500}, {"A", 6000},
           {"A", 2000}}};
}

// Reference timeline of a structure under a role->speaker mapping.
Timeline schedule_reference(const ConversationStructure& st,
                            const std::map<std::string, std::string>& mapping,
                            const std::string& id) {
  std::vector<Segment> segs;
  Ticks at = 0;
  for (const auto& slot : st.slots) {
    if (slot.role != kSilenceRole) segs.push_back({at, slot.duration_ms, mapping.at(slot.role)});
    at += slot.duration_ms;
  }
  return Timeline(id, std::move(segs));
}

// Role-blind stub: perfect attribution except the first role-B slot, which it
// hands to role A's speaker.
Timeline stub_diarizer(const ConversationStructure& st,
                       const std::map<std::string, std::string>& mapping,
                       const std::string& id) {
  std::vector<Segment> segs;
  Ticks at = 0;
  bool flipped = false;
  for (const auto& slot : st.slots) {
    if (slot.role != kSilenceRole) {
      std::string label = mapping.at(slot.role);
      if (!flipped && slot.role == "B") {
        label = mapping.at("A");
        flipped = true;
      }
      segs.push_back({at, slot.duration_ms, label});
    }
    at += slot.duration_ms;
  }
  return Timeline(id, std::move(segs));
}

// The planted-effect structures, matching the bundled demo.
ConversationStructure calm_structure() {
  ConversationStructure st{"calm", {{"pace", "calm"}}, {}};
  for (int i = 0; i < 10; ++i) st.slots.push_back({i % 2 ? "B" : "A", 5000});
  return st;
}

ConversationStructure rapid_structure() {
  ConversationStructure st{"rapid", {{"pace", "rapid"}}, {}};
  for (int i = 0; i < 42; ++i) {
    st.slots.push_back({"A", 400});
    st.slots.push_back({"B", 200});
    st.slots.push_back({"B", 400});
    st.slots.push_back({"A", 200});
  }
  return st;
}

// ---- oracles ---------------------------------------------------------------

Ticks label_overlap(const Timeline& ref, const Timeline& hyp, const std::string& r,
                    const std::string& h) {
  Ticks total = 0;
  for (const auto& a : ref.segments()) {
    if (a.label != r) continue;
    for (const auto& b : hyp.segments()) {
      if (b.label != h) continue;
      total += std::max<Ticks>(
          0, std::min(a.offset_ms(), b.offset_ms()) - std::max(a.onset_ms, b.onset_ms));
    }
  }
  return total;
}

Ticks brute_force_mapping(const Timeline& ref, const Timeline& hyp) {
  std::vector<std::string> rl = ref.labels(), hl = hyp.labels();
  const std::size_t n = std::max(rl.size(), hl.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Ticks best = 0;
  do {
    Ticks total = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (i < hl.size() && perm[i] < static_cast<int>(rl.size()))
        total += label_overlap(ref, hyp, rl[static_cast<std::size_t>(perm[i])], hl[i]);
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double direct_u(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a)
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return u;
}

// Full enumeration of the rank-sum distribution (tie-free inputs).
double enumerate_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> rank(pooled.size());
  for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<double>(k + 1);

  const std::size_t n = pooled.size(), n1 = a.size();
  const double cap = static_cast<double>(n1 * b.size());
  const double observed = direct_u(a, b);
  const double u_small = std::min(observed, cap - observed);

  std::int64_t in_tail = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != n1) continue;
    ++total;
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) rank_sum += rank[i];
    const double u = rank_sum - static_cast<double>(n1 * (n1 + 1)) / 2.0;
    if (u <= u_small || u >= cap - u_small) ++in_tail;
  }
  return static_cast<double>(in_tail) / static_cast<double>(total);
}

// ---- harness ---------------------------------------------------------------

int failures = 0;

template <class Fn>
void criterion(int id, const std::string& name, double budget_sec, Fn&& fn) {
  const auto t0 = Clock::now();
  bool ok = false;
  std::string detail;
  try {
    auto [pass, text] = fn();
    ok = pass;
    detail = std::move(text);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration_cast<std::chrono::duration<double>>(Clock::now() - t0).count();
  const bool in_budget = secs < budget_sec;
  const bool pass = ok && in_budget;
  if (!pass) ++failures;
  std::printf("%s  %d  %s — %s [%.2f s, budget %g s]\n", pass ? "PASS" : "FAIL", id,
              name.c_str(), detail.c_str(), secs, budget_sec);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::path("test_tmp") / "acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

int main() {
  // 1. Worked example: first B segment misattributed on the 19 s schedule.
  criterion(1, "worked-example scoring", 1.0, [] {
    const auto st = worked_structure();
    const std::map<std::string, std::string> mapping{{"A", "x"}, {"B", "y"}};
    const Timeline ref = schedule_reference(st, mapping, "w");
    const Timeline hyp = stub_diarizer(st, mapping, "w");
    const ScoreRecord s = score_version(ref, hyp, "w", {{"x", "A"}, {"y", "B"}});

    double f1_a = 0.0, f1_b = 0.0;
    for (const auto& ps : s.per_speaker) {
      if (ps.speaker_id == "x") f1_a = ps.f1;
      if (ps.speaker_id == "y") f1_b = ps.f1;
    }
    const bool pass = std::abs(f1_a - 0.9577) <= 0.0005 &&
                      std::abs(f1_b - 0.4000) <= 0.0005 &&
                      std::abs(s.der.der - 1.5 / 19.0) <= 1e-6;
    return std::pair(pass, "F1(A)=" + fmt(f1_a) + " F1(B)=" + fmt(f1_b) +
                               " DER=" + fmt(s.der.der));
  });

  // 2. Mirror averaging equalizes speakers under a role-blind stub diarizer.
  criterion(2, "mirror averaging separates roles from voices", 5.0, [] {
    const std::vector<ConversationStructure> structures{worked_structure(),
                                                        calm_structure()};
    const std::vector<SpeakerPair> pairs{{"q", {"s1", "s2"}, {}},
                                         {"r", {"s3", "s4"}, {}}};
    double max_speaker_diff = 0.0, min_role_gap = 1e9;
    for (const auto& st : structures) {
      for (const auto& pr : pairs) {
        std::vector<ScoreRecord> group;
        for (int mirror = 1; mirror <= 2; ++mirror) {
          const std::map<std::string, std::string> mapping{
              {"A", pr.members[mirror == 1 ? 0 : 1]},
              {"B", pr.members[mirror == 1 ? 1 : 0]}};
          const std::string vid =
              st.structure_id + "__" + pr.pair_id + "__v" + std::to_string(mirror);
          const Timeline ref = schedule_reference(st, mapping, vid);
          const Timeline hyp = stub_diarizer(st, mapping, vid);
          std::map<std::string, std::string> speaker_role;
          for (const auto& [role, speaker] : mapping) speaker_role[speaker] = role;
          group.push_back(score_version(ref, hyp, vid, speaker_role));
        }
        const MirrorSummary m = mirror_average(group);
        max_speaker_diff =
            std::max(max_speaker_diff, std::abs(m.speaker_f1.at(pr.members[0]) -
                                                m.speaker_f1.at(pr.members[1])));
        min_role_gap = std::min(min_role_gap, m.role_f1.at("A") - m.role_f1.at("B"));
      }
    }
    const bool pass = max_speaker_diff < 1e-9 && min_role_gap > 0.0;
    return std::pair(pass, "max speaker diff=" + fmt(max_speaker_diff) +
                               " min role gap A-B=" + fmt(min_role_gap));
  });

  // 3. Planted-effect factorial recovery via the bundled demo.
  criterion(3, "planted-effect demo recovery", 120.0, [] {
    const auto dir = work_dir("demo");
    RunConfig cfg;
    const DemoOutcome out = cmd_demo(cfg, dir.string(), 1);

    const double calm_easy = out.cell_der.at("calm").at("easy");
    const double calm_hard = out.cell_der.at("calm").at("hard");
    const double rapid_easy = out.cell_der.at("rapid").at("easy");
    const double rapid_hard = out.cell_der.at("rapid").at("hard");
    const bool structure_dir = rapid_easy > calm_easy && rapid_hard > calm_hard;
    const bool voice_dir = calm_hard > calm_easy && rapid_hard > rapid_easy;

    bool separated = false;
    std::string gaps;
    if (!out.report.structure.empty() && !out.report.voice.empty()) {
      const FactorEffect& se = out.report.structure.front();
      const FactorEffect& ve = out.report.voice.front();
      separated = se.ci_low > ve.ci_high || ve.ci_low > se.ci_high;
      gaps = " structure gap [" + fmt(se.ci_low) + "," + fmt(se.ci_high) +
             "] voice gap [" + fmt(ve.ci_low) + "," + fmt(ve.ci_high) + "]";
    }
    const bool pass = structure_dir && voice_dir && separated;
    return std::pair(pass, "DER calm(e/h)=" + fmt(calm_easy) + "/" + fmt(calm_hard) +
                               " rapid(e/h)=" + fmt(rapid_easy) + "/" +
                               fmt(rapid_hard) + gaps);
  });

  // 4. Shorter windows: lower entropy and no worse DER on the rapid structure.
  criterion(4, "subsegment window-length effect", 60.0, [] {
    const auto calm = calm_structure();
    const auto rapid = rapid_structure();

    VoiceSpec v1, v2;
    v1.f0 = 110.0;
    v1.seed = 12;
    v2.f0 = 220.0;
    v2.seed = 13;
    std::map<std::string, SpeakerStream> streams{
        {"e1", synth_speaker(v1, 30.0, 8000, "e1")},
        {"e2", synth_speaker(v2, 30.0, 8000, "e2")}};

    const auto mean_der = [&](const ConversationStructure& st, double window) {
      DiarizerConfig dc;
      dc.window = window;
      dc.hop = window / 2.0;
      double total = 0.0;
      for (int mirror = 1; mirror <= 2; ++mirror) {
        ConversationVersion v;
        v.structure = st;
        v.pair = {"easy", {"e1", "e2"}, {}};
        v.assignment = {{{"A", mirror == 1 ? "e1" : "e2"},
                         {"B", mirror == 1 ? "e2" : "e1"}},
                        mirror};
        v.version_id = st.structure_id + "__easy__v" + std::to_string(mirror);
        const RenderedConversation r = render(v, streams, 0.01);
        const Timeline hyp = diarize(r.audio, r.reference, dc);
        total += compute_der(r.reference, hyp).der;
      }
      return total / 2.0;
    };

    const Timeline rapid_ref =
        schedule_reference(rapid, {{"A", "x"}, {"B", "y"}}, "rapid");
    const double h_short = subsegment_entropy(rapid_ref, 0.75);
    const double h_long = subsegment_entropy(rapid_ref, 1.5);

    const double rapid_short = mean_der(rapid, 0.75);
    const double rapid_long = mean_der(rapid, 1.5);
    const double calm_short = mean_der(calm, 0.75);
    const double calm_long = mean_der(calm, 1.5);
    const double rapid_gap = std::abs(rapid_long - rapid_short);
    const double calm_gap = std::abs(calm_long - calm_short);

    const bool pass = h_short <= h_long + 1e-12 && rapid_short <= rapid_long + 1e-12 &&
                      calm_gap < rapid_gap;
    return std::pair(pass, "entropy 0.75/1.5=" + fmt(h_short) + "/" + fmt(h_long) +
                               " rapid DER 0.75/1.5=" + fmt(rapid_short) + "/" +
                               fmt(rapid_long) + " calm DER 0.75/1.5=" +
                               fmt(calm_short) + "/" + fmt(calm_long));
  });

  // 5. Entropy oracle values.
  criterion(5, "entropy oracle fixtures", 1.0, [] {
    const Timeline alternating("r", {{0, 1500, "A"},
                                     {1500, 1500, "B"},
                                     {3000, 1500, "A"},
                                     {4500, 1500, "B"}});
    const double h_alt = subsegment_entropy(alternating, 1.5, 0.75);

    const Timeline solo("r", {{0, 6000, "A"}});
    const double h_solo = subsegment_entropy(solo, 1.5, 0.75);

    const Timeline half("r", {{0, 750, "A"}, {750, 750, "B"}});
    const double h_half = subsegment_entropy(half, 1.5, 0.75);

    const bool pass =
        std::abs(h_alt - 3.0 / 7.0) <= 1e-9 && h_solo == 0.0 && h_half == 1.0;
    return std::pair(pass, "alternating=" + fmt(h_alt) + " solo=" + fmt(h_solo) +
                               " half=" + fmt(h_half));
  });

  // 6. Optimal mapping equals brute force on 200 seeded instances.
  criterion(6, "mapping equals permutation brute force", 10.0, [] {
    std::mt19937 rng(977);
    std::uniform_int_distribution<int> n_labels(1, 5);
    std::uniform_int_distribution<int> n_turns(4, 10);
    std::uniform_int_distribution<Ticks> dur(300, 2500);
    int exact = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const auto random_timeline = [&](const std::string& prefix) {
        const int labels = n_labels(rng);
        std::uniform_int_distribution<int> which(0, labels - 1);
        std::vector<Segment> segs;
        Ticks at = 0;
        const int turns = n_turns(rng);
        for (int i = 0; i < turns; ++i) {
          const Ticks d = dur(rng);
          segs.push_back({at, d, prefix + std::to_string(which(rng))});
          at += d;
        }
        return Timeline("r", std::move(segs));
      };
      const Timeline ref = random_timeline("r");
      const Timeline hyp = random_timeline("h");

      const auto mapping = optimal_mapping(ref, hyp);
      Ticks achieved = 0;
      for (const auto& [h, r] : mapping) achieved += label_overlap(ref, hyp, r, h);
      if (achieved == brute_force_mapping(ref, hyp)) ++exact;
    }
    return std::pair(exact == 200, std::to_string(exact) + "/200 instances exact");
  });

  // 7. Exact Mann-Whitney p equals full enumeration for tie-free n1,n2 <= 6.
  criterion(7, "Mann-Whitney exact p equals enumeration", 10.0, [] {
    std::mt19937 rng(1299);
    int checked = 0, exact = 0;
    for (std::size_t n1 = 1; n1 <= 6; ++n1)
      for (std::size_t n2 = 1; n2 <= 6; ++n2)
        for (int trial = 0; trial < 3; ++trial) {
          std::vector<double> pooled(n1 + n2);
          for (std::size_t i = 0; i < pooled.size(); ++i)
            pooled[i] = static_cast<double>(i) * 0.75 + static_cast<double>(n1) * 0.01;
          std::shuffle(pooled.begin(), pooled.end(), rng);
          const std::vector<double> a(pooled.begin(), pooled.begin() + n1);
          const std::vector<double> b(pooled.begin() + n1, pooled.end());

          const TestResult t = mann_whitney_u(a, b);
          ++checked;
          if (t.method == "exact" && t.statistic_u == direct_u(a, b) &&
              t.p_two_sided == enumerate_p(a, b))
            ++exact;
        }
    const TestResult canon = mann_whitney_u({1, 2, 3}, {4, 5, 6});
    const bool pass = exact == checked && canon.p_two_sided == 0.1;
    return std::pair(pass, std::to_string(exact) + "/" + std::to_string(checked) +
                               " enumerations exact, {1,2,3}v{4,5,6} p=" +
                               fmt(canon.p_two_sided));
  });

  // 8. Rendering conservation on a 1,000-version randomized design.
  criterion(8, "rendering conservation at 1,000 versions", 120.0, [] {
    const auto dir = work_dir("render1000");
    std::mt19937 rng(4242);
    std::uniform_int_distribution<int> extra_slots(1, 4);
    std::uniform_int_distribution<Ticks> dur(300, 1200);
    std::uniform_int_distribution<int> role_pick(0, 4);

    std::vector<ConversationStructure> structures;
    for (int s = 0; s < 50; ++s) {
      ConversationStructure st;
      char id[8];
      std::snprintf(id, sizeof id, "s%03d", s);
      st.structure_id = id;
      st.slots.push_back({"A", dur(rng)});
      st.slots.push_back({"B", dur(rng)});
      const int extra = extra_slots(rng);
      for (int k = 0; k < extra; ++k) {
        const int pick = role_pick(rng);
        st.slots.push_back(
            {pick == 4 ? std::string(kSilenceRole) : (pick % 2 ? "B" : "A"), dur(rng)});
      }
      structures.push_back(std::move(st));
    }

    std::map<std::string, SpeakerStream> streams;
    std::vector<SpeakerPair> pairs;
    std::map<std::string, double> available;
    for (int p = 0; p < 10; ++p) {
      std::array<std::string, 2> members;
      for (int m = 0; m < 2; ++m) {
        char id[8];
        std::snprintf(id, sizeof id, "m%02d", 2 * p + m);
        SpeakerStream stream;
        stream.speaker_id = id;
        stream.audio.sample_rate = 8000;
        stream.audio.samples.resize(10 * 8000);
        for (Eigen::Index i = 0; i < stream.audio.samples.size(); ++i)
          stream.audio.samples[i] =
              1e-4f * static_cast<float>((i * (2 * p + m + 3)) % 8191 + 1);
        available[id] = stream.available_duration();
        streams[id] = std::move(stream);
        members[static_cast<std::size_t>(m)] = id;
      }
      char pid[8];
      std::snprintf(pid, sizeof pid, "p%02d", p);
      pairs.push_back({pid, members, {}});
    }

    const Design d = enumerate_versions(structures, pairs, available, 0);
    if (d.versions.size() != 1000)
      return std::pair(false, "expected 1000 versions, got " +
                                  std::to_string(d.versions.size()));

    const auto files = render_design(d, streams, dir.string(), 0.01, 2);

    std::map<std::string, const ConversationVersion*> by_id;
    for (const auto& v : d.versions) by_id[v.version_id] = &v;

    int duration_ok = 0, overlap_free = 0;
    for (const auto& f : files) {
      const ConversationVersion& v = *by_id.at(f.version_id);
      const AudioBuffer wav = read_wav(f.wav_path);
      const Eigen::Index want = tick_to_sample(v.structure.total_ms(), 8000);
      if (std::abs(wav.samples.size() - want) <=
          static_cast<Eigen::Index>(v.structure.slots.size()))
        ++duration_ok;

      const Timeline ref = read_rttm_file(f.rttm_path);
      bool clean = true;
      for (std::size_t i = 1; i < ref.segments().size(); ++i)
        if (ref.segments()[i].onset_ms < ref.segments()[i - 1].offset_ms()) clean = false;
      if (clean) ++overlap_free;
    }

    // taper ramps, sample-exact, on 10 deterministic (version, slot) picks
    const Eigen::Index ramp = std::llround(0.01 * 8000);
    int taper_ok = 0;
    for (int k = 0; k < 10; ++k) {
      const ConversationVersion& v = d.versions[(static_cast<std::size_t>(k) * 97 + 13) %
                                                d.versions.size()];
      const RenderedConversation r = render(v, streams, 0.01);

      std::size_t target = static_cast<std::size_t>(k) % v.structure.slots.size();
      while (v.structure.slots[target].is_silence())
        target = (target + 1) % v.structure.slots.size();

      std::map<std::string, Eigen::Index> cursor;
      Ticks at_ms = 0;
      bool slot_exact = true;
      for (std::size_t si = 0; si <= target; ++si) {
        const auto& slot = v.structure.slots[si];
        const Eigen::Index begin = tick_to_sample(at_ms, 8000);
        const Eigen::Index end = tick_to_sample(at_ms + slot.duration_ms, 8000);
        if (!slot.is_silence()) {
          const std::string& speaker = v.assignment.mapping.at(slot.role);
          Eigen::Index& c = cursor[speaker];
          if (si == target) {
            const auto& src = streams.at(speaker).audio.samples;
            const Eigen::Index n = end - begin;
            for (Eigen::Index i = 0; i < n; ++i) {
              const double gain = std::min({1.0, static_cast<double>(i) / ramp,
                                            static_cast<double>(n - 1 - i) / ramp});
              float expected = src[c + i];
              expected *= static_cast<float>(gain);
              if (r.audio.samples[begin + i] != expected) slot_exact = false;
            }
          }
          c += end - begin;
        }
        at_ms += slot.duration_ms;
      }
      if (slot_exact) ++taper_ok;
    }

    fs::remove_all(dir);
    const bool pass = duration_ok == 1000 && overlap_free == 1000 && taper_ok == 10;
    return std::pair(pass, "durations " + std::to_string(duration_ok) +
                               "/1000, overlap-free " + std::to_string(overlap_free) +
                               "/1000, taper-exact slots " + std::to_string(taper_ok) +
                               "/10");
  });

  // 9. Design cardinality: 150 x 150 x 2 = 45,000 from metadata alone.
  criterion(9, "design cardinality 45,000", 10.0, [] {
    std::vector<ConversationStructure> structures;
    for (int s = 0; s < 150; ++s) {
      char id[8];
      std::snprintf(id, sizeof id, "s%03d", s);
      structures.push_back(
          {id, {}, {{"A", 2000 + (s % 7) * 500}, {"B", 1500 + (s % 5) * 500}}});
    }
    std::vector<SpeakerPair> pairs;
    std::map<std::string, double> available;
    for (int p = 0; p < 150; ++p) {
      char pid[8], m1[8], m2[8];
      std::snprintf(pid, sizeof pid, "p%03d", p);
      std::snprintf(m1, sizeof m1, "ma%03d", p);
      std::snprintf(m2, sizeof m2, "mb%03d", p);
      pairs.push_back({pid, {m1, m2}, {}});
      available[m1] = 100.0;
      available[m2] = 100.0;
    }

    const Design d = enumerate_versions(structures, pairs, available, 0);
    const bool pass = d.versions.size() == 45000 && d.skipped.empty();
    return std::pair(pass, std::to_string(d.versions.size()) + " versions, " +
                               std::to_string(d.skipped.size()) + " skipped");
  });

  if (failures == 0) {
    std::printf("acceptance: all 9 criteria hold\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", failures);
  return 1;
}
