#include "diafactor/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "diafactor/assignment.hpp"
#include "diafactor/errors.hpp"
#include "diafactor/intervals.hpp"
#include "diafactor/structure.hpp"

namespace diafactor {

namespace {

struct LabeledSets {
  std::vector<std::string> labels;
  std::vector<IntervalSet> sets;
};

LabeledSets label_sets(const Timeline& t, const IntervalSet& exclusion) {
  LabeledSets out;
  out.labels = t.labels();
  out.sets.reserve(out.labels.size());
  for (const auto& label : out.labels)
    out.sets.push_back(t.label_intervals(label).subtract(exclusion));
  return out;
}

// For each hyp label index, the matched ref label index (or -1), maximizing
// total matched overlap. Zero-overlap matches are dropped.
std::vector<int> match_labels(const LabeledSets& ref, const LabeledSets& hyp) {
  std::vector<int> ref_of_hyp(hyp.labels.size(), -1);
  if (ref.labels.empty() || hyp.labels.empty()) return ref_of_hyp;
  Eigen::MatrixXd weight(hyp.labels.size(), ref.labels.size());
  for (std::size_t i = 0; i < hyp.labels.size(); ++i)
    for (std::size_t j = 0; j < ref.labels.size(); ++j)
      weight(i, j) = static_cast<double>(hyp.sets[i].intersect(ref.sets[j]).total());
  auto cols = max_weight_assignment(weight);
  for (std::size_t i = 0; i < hyp.labels.size(); ++i)
    if (cols[i] >= 0 && weight(i, cols[i]) > 0) ref_of_hyp[i] = cols[i];
  return ref_of_hyp;
}

double seconds(Ticks t) { return to_seconds(t); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double parse_number(std::string_view field, const char* what, std::size_t line_no) {
  double v{};
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || end != field.data() + field.size())
    throw ParseError("scores line " + std::to_string(line_no) + ": bad " + what + " '" +
                     std::string(field) + "'");
  return v;
}

}  // namespace

std::map<std::string, std::string> optimal_mapping(const Timeline& ref, const Timeline& hyp) {
  if (ref.empty() || hyp.empty())
    throw ValidationError("optimal_mapping: both timelines must be non-empty");
  auto r = label_sets(ref, {});
  auto h = label_sets(hyp, {});
  auto ref_of_hyp = match_labels(r, h);
  std::map<std::string, std::string> mapping;
  for (std::size_t i = 0; i < h.labels.size(); ++i)
    if (ref_of_hyp[i] >= 0) mapping[h.labels[i]] = r.labels[ref_of_hyp[i]];
  return mapping;
}

DerBreakdown compute_der(const Timeline& ref, const Timeline& hyp, double collar,
                         bool omit_overlap) {
  if (collar < 0) throw ValidationError("compute_der: collar must be non-negative");

  IntervalSet exclusion;
  const Ticks c = to_ticks(collar);
  if (c > 0) {
    for (const auto& seg : ref.segments()) {
      exclusion.add(seg.onset_ms - c, seg.onset_ms + c);
      exclusion.add(seg.offset_ms() - c, seg.offset_ms() + c);
    }
  }
  if (omit_overlap) exclusion = exclusion.unite(ref.overlap_intervals());

  const auto r = label_sets(ref, exclusion);
  const auto h = label_sets(hyp, exclusion);
  const auto ref_of_hyp = match_labels(r, h);

  // Boundary sweep over elementary intervals: kind 0 = reference, 1 = hypothesis.
  struct Event {
    Ticks at;
    int kind;
    int idx;
    int delta;
  };
  std::vector<Event> events;
  for (std::size_t j = 0; j < r.sets.size(); ++j)
    for (const auto& [a, b] : r.sets[j].intervals()) {
      events.push_back({a, 0, static_cast<int>(j), +1});
      events.push_back({b, 0, static_cast<int>(j), -1});
    }
  for (std::size_t i = 0; i < h.sets.size(); ++i)
    for (const auto& [a, b] : h.sets[i].intervals()) {
      events.push_back({a, 1, static_cast<int>(i), +1});
      events.push_back({b, 1, static_cast<int>(i), -1});
    }
  std::sort(events.begin(), events.end(),
            [](const Event& x, const Event& y) { return x.at < y.at; });

  std::vector<int> active_ref(r.sets.size(), 0), active_hyp(h.sets.size(), 0);
  int nref = 0, nhyp = 0;
  Ticks miss_t = 0, fa_t = 0, conf_t = 0, scored_t = 0;
  std::size_t e = 0;
  Ticks prev = events.empty() ? 0 : events.front().at;
  while (e < events.size()) {
    const Ticks now = events[e].at;
    if (now > prev && (nref > 0 || nhyp > 0)) {
      const Ticks dt = now - prev;
      int ncorrect = 0;
      for (std::size_t i = 0; i < active_hyp.size(); ++i)
        if (active_hyp[i] && ref_of_hyp[i] >= 0 && active_ref[ref_of_hyp[i]]) ++ncorrect;
      miss_t += dt * std::max(0, nref - nhyp);
      fa_t += dt * std::max(0, nhyp - nref);
      conf_t += dt * (std::min(nref, nhyp) - ncorrect);
      scored_t += dt * nref;
    }
    while (e < events.size() && events[e].at == now) {
      const auto& ev = events[e];
      if (ev.kind == 0) {
        active_ref[ev.idx] += ev.delta;
        nref += ev.delta;
      } else {
        active_hyp[ev.idx] += ev.delta;
        nhyp += ev.delta;
      }
      ++e;
    }
    prev = now;
  }

  DerBreakdown out;
  out.missed = seconds(miss_t);
  out.false_alarm = seconds(fa_t);
  out.confusion = seconds(conf_t);
  out.scored_speech = seconds(scored_t);
  if (scored_t == 0)
    throw ValidationError("compute_der: no scored reference speech (DER undefined)");
  out.der = (out.missed + out.false_alarm + out.confusion) / out.scored_speech;
  return out;
}

std::vector<SpeakerScore> per_speaker_f1(const Timeline& ref, const Timeline& hyp) {
  if (ref.empty()) throw ValidationError("per_speaker_f1: empty reference");
  const auto r = label_sets(ref, {});
  const auto h = label_sets(hyp, {});
  const auto ref_of_hyp = match_labels(r, h);
  std::vector<int> hyp_of_ref(r.labels.size(), -1);
  for (std::size_t i = 0; i < ref_of_hyp.size(); ++i)
    if (ref_of_hyp[i] >= 0) hyp_of_ref[ref_of_hyp[i]] = static_cast<int>(i);

  std::vector<SpeakerScore> out;
  for (std::size_t j = 0; j < r.labels.size(); ++j) {
    SpeakerScore s;
    s.speaker_id = r.labels[j];
    const IntervalSet& R = r.sets[j];
    if (hyp_of_ref[j] >= 0) {
      const IntervalSet& H = h.sets[hyp_of_ref[j]];
      s.tp = seconds(R.intersect(H).total());
      s.fp = seconds(H.subtract(R).total());
      s.fn = seconds(R.subtract(H).total());
    } else {
      s.fn = seconds(R.total());
    }
    s.precision = s.tp + s.fp > 0 ? s.tp / (s.tp + s.fp) : 0.0;
    s.recall = s.tp + s.fn > 0 ? s.tp / (s.tp + s.fn) : 0.0;
    s.f1 = s.tp > 0 ? 2.0 * s.tp / (2.0 * s.tp + s.fp + s.fn) : 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

ScoreRecord score_version(const Timeline& ref, const Timeline& hyp, std::string version_id,
                          const std::map<std::string, std::string>& role_of_speaker,
                          std::map<std::string, std::string> factor_levels, double collar,
                          bool omit_overlap) {
  ScoreRecord rec;
  rec.version_id = std::move(version_id);
  rec.factor_levels = std::move(factor_levels);
  rec.der = compute_der(ref, hyp, collar, omit_overlap);
  rec.per_speaker = per_speaker_f1(ref, hyp);
  for (auto& s : rec.per_speaker) {
    auto it = role_of_speaker.find(s.speaker_id);
    if (it != role_of_speaker.end()) {
      s.role = it->second;
      rec.per_role[s.role] = s.f1;
    }
  }
  return rec;
}

MirrorSummary mirror_average(const std::vector<ScoreRecord>& group) {
  if (group.empty()) throw ValidationError("mirror_average: empty group");

  std::set<std::string> roles, speakers;
  for (const auto& rec : group)
    for (const auto& s : rec.per_speaker) {
      if (s.role.empty())
        throw ValidationError("mirror_average: record '" + rec.version_id +
                              "' lacks role information for speaker '" + s.speaker_id + "'");
      roles.insert(s.role);
      speakers.insert(s.speaker_id);
    }
  if (roles.size() != speakers.size())
    throw ValidationError("mirror_average: " + std::to_string(speakers.size()) +
                          " speakers cannot cover " + std::to_string(roles.size()) + " roles");

  auto key_of = [](const std::map<std::string, std::string>& role_to_speaker) {
    std::string key;
    for (const auto& [role, spk] : role_to_speaker) {
      if (!key.empty()) key += ';';
      key += role + "=" + spk;
    }
    return key;
  };

  std::map<std::string, int> seen;
  for (const auto& rec : group) {
    std::map<std::string, std::string> assignment;
    std::set<std::string> assigned;
    for (const auto& s : rec.per_speaker) {
      if (!assignment.emplace(s.role, s.speaker_id).second)
        throw ValidationError("mirror_average: record '" + rec.version_id +
                              "' assigns role '" + s.role + "' twice");
      assigned.insert(s.speaker_id);
    }
    if (assignment.size() != roles.size() || assigned.size() != roles.size())
      throw ValidationError("mirror_average: record '" + rec.version_id +
                            "' is not a role bijection");
    ++seen[key_of(assignment)];
  }

  std::vector<std::string> role_list(roles.begin(), roles.end());
  std::vector<std::string> perm(speakers.begin(), speakers.end());
  std::string missing;
  do {
    std::map<std::string, std::string> assignment;
    for (std::size_t i = 0; i < role_list.size(); ++i) assignment[role_list[i]] = perm[i];
    const auto key = key_of(assignment);
    const auto it = seen.find(key);
    if (it == seen.end())
      missing += missing.empty() ? key : ", " + key;
    else if (it->second != 1)
      throw ValidationError("mirror_average: role assignment " + key + " appears " +
                            std::to_string(it->second) + " times");
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (!missing.empty())
    throw ValidationError("mirror_average: group incomplete; missing role assignments: " +
                          missing);

  MirrorSummary out;
  out.versions = static_cast<int>(group.size());
  for (const auto& rec : group) {
    out.mean_der += rec.der.der;
    for (const auto& s : rec.per_speaker) {
      out.speaker_f1[s.speaker_id] += s.f1;
      out.role_f1[s.role] += s.f1;
    }
  }
  out.mean_der /= out.versions;
  for (auto& [speaker, f1] : out.speaker_f1) f1 /= out.versions;
  for (auto& [role, f1] : out.role_f1) f1 /= out.versions;
  return out;
}

double subsegment_entropy(const Timeline& ref, double window, double hop) {
  if (!(window > 0) || !(hop > 0))
    throw ValidationError("subsegment_entropy: window and hop must be positive");
  if (ref.empty()) throw ValidationError("subsegment_entropy: reference has no speech");
  const Ticks w = to_ticks(window);
  const Ticks h = to_ticks(hop);
  if (w == 0 || h == 0)
    throw ValidationError("subsegment_entropy: window and hop must be at least 1 ms");

  const auto labels = ref.labels();
  std::vector<IntervalSet> sets;
  sets.reserve(labels.size());
  for (const auto& label : labels) sets.push_back(ref.label_intervals(label));

  const Ticks begin = ref.span_begin_ms();
  const Ticks end = ref.span_end_ms();

  double sum = 0.0;
  long windows = 0;
  auto eval = [&](Ticks a, Ticks b) {
    double total = 0.0;
    std::vector<double> times(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
      times[i] = static_cast<double>(sets[i].intersect_total(a, b));
      total += times[i];
    }
    if (total <= 0) return;  // no speech in this window
    double bits = 0.0;
    for (double t : times)
      if (t > 0) {
        const double p = t / total;
        bits -= p * std::log2(p);
      }
    sum += bits;
    ++windows;
  };

  if (begin + w > end) {
    eval(begin, end);
  } else {
    for (Ticks a = begin; a + w <= end; a += h) eval(a, a + w);
  }
  if (windows == 0) throw ValidationError("subsegment_entropy: no window contains speech");
  return sum / windows;
}

std::string emit_scores(const std::vector<ScoreRecord>& records) {
  std::string out =
      "# version_id\tder\tmissed\tfa\tconfusion\tscored_speech\tfactors\n"
      "# version_id\tspeaker\trole\ttp\tfp\tfn\tf1\tfactors\n";
  for (const auto& rec : records) {
    const std::string factors = format_tags(rec.factor_levels);
    out += rec.version_id + '\t' + fmt(rec.der.der) + '\t' + fmt(rec.der.missed) + '\t' +
           fmt(rec.der.false_alarm) + '\t' + fmt(rec.der.confusion) + '\t' +
           fmt(rec.der.scored_speech) + '\t' + factors + '\n';
    for (const auto& s : rec.per_speaker)
      out += rec.version_id + '\t' + s.speaker_id + '\t' + (s.role.empty() ? "-" : s.role) +
             '\t' + fmt(s.tp) + '\t' + fmt(s.fp) + '\t' + fmt(s.fn) + '\t' + fmt(s.f1) + '\t' +
             factors + '\n';
  }
  return out;
}

std::vector<ScoreRecord> parse_scores(const std::string& text) {
  std::vector<ScoreRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }

    if (fields.size() == 7) {  // version summary row
      ScoreRecord rec;
      rec.version_id = std::string(fields[0]);
      rec.der.der = parse_number(fields[1], "der", line_no);
      rec.der.missed = parse_number(fields[2], "missed", line_no);
      rec.der.false_alarm = parse_number(fields[3], "fa", line_no);
      rec.der.confusion = parse_number(fields[4], "confusion", line_no);
      rec.der.scored_speech = parse_number(fields[5], "scored_speech", line_no);
      rec.factor_levels = parse_tags(fields[6]);
      out.push_back(std::move(rec));
    } else if (fields.size() == 8) {  // per-speaker row
      if (out.empty() || out.back().version_id != fields[0])
        throw ParseError("scores line " + std::to_string(line_no) +
                         ": speaker row without preceding version row for '" +
                         std::string(fields[0]) + "'");
      SpeakerScore s;
      s.speaker_id = std::string(fields[1]);
      if (fields[2] != "-") s.role = std::string(fields[2]);
      s.tp = parse_number(fields[3], "tp", line_no);
      s.fp = parse_number(fields[4], "fp", line_no);
      s.fn = parse_number(fields[5], "fn", line_no);
      s.f1 = parse_number(fields[6], "f1", line_no);
      s.precision = s.tp + s.fp > 0 ? s.tp / (s.tp + s.fp) : 0.0;
      s.recall = s.tp + s.fn > 0 ? s.tp / (s.tp + s.fn) : 0.0;
      if (!s.role.empty()) out.back().per_role[s.role] = s.f1;
      out.back().per_speaker.push_back(std::move(s));
    } else {
      throw ParseError("scores line " + std::to_string(line_no) + ": expected 7 or 8 fields, got " +
                       std::to_string(fields.size()));
    }
  }
  return out;
}

std::vector<ScoreRecord> read_scores_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scores file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scores(ss.str());
}

void write_scores_file(const std::string& path, const std::vector<ScoreRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write scores file: " + path);
  out << emit_scores(records);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace diafactor
