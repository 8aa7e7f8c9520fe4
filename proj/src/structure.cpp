#include "diafactor/structure.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "diafactor/errors.hpp"

namespace diafactor {

Ticks ConversationStructure::total_ms() const {
  Ticks sum = 0;
  for (const auto& s : slots) sum += s.duration_ms;
  return sum;
}

Ticks ConversationStructure::role_time_ms(const std::string& role) const {
  Ticks sum = 0;
  for (const auto& s : slots)
    if (s.role == role) sum += s.duration_ms;
  return sum;
}

std::vector<std::string> ConversationStructure::roles() const {
  std::vector<std::string> out;
  for (const auto& s : slots) {
    if (s.is_silence()) continue;
    if (std::find(out.begin(), out.end(), s.role) == out.end()) out.push_back(s.role);
  }
  return out;
}

bool ConversationStructure::has_speech() const {
  return std::any_of(slots.begin(), slots.end(),
                     [](const StructureSlot& s) { return !s.is_silence(); });
}

ConversationStructure extract_structure(const Timeline& t,
                                        const std::map<std::string, std::string>& role_map,
                                        double min_gap) {
  for (const auto& [label, role] : role_map) {
    if (role == kSilenceRole)
      throw ValidationError("role map assigns reserved silence role to label '" + label + "'");
  }
  for (const auto& label : t.labels()) {
    if (!role_map.count(label))
      throw ValidationError("timeline '" + t.recording_id() + "': label '" + label +
                            "' missing from role map");
  }

  const Ticks min_gap_ms = to_ticks(min_gap);
  ConversationStructure out;
  out.structure_id = t.recording_id();

  const auto& segs = t.segments();
  Ticks cursor = segs.empty() ? 0 : segs.front().onset_ms;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    // Later-onset segment wins the contested region.
    Ticks end = segs[i].offset_ms();
    if (i + 1 < segs.size()) end = std::min(end, segs[i + 1].onset_ms);
    if (end <= segs[i].onset_ms) continue;  // fully swallowed by the next onset

    Ticks gap = segs[i].onset_ms - cursor;
    if (gap >= min_gap_ms && gap > 0) {
      out.slots.push_back({kSilenceRole, gap});
    }
    // Sub-threshold gaps are dropped: the schedule is compacted rather than
    // padding a role's speech beyond its original time.
    out.slots.push_back({role_map.at(segs[i].label), end - segs[i].onset_ms});
    cursor = end;
  }
  return out;
}

std::string format_tags(const std::map<std::string, std::string>& tags) {
  if (tags.empty()) return "-";
  std::string out;
  for (const auto& [k, v] : tags) {
    if (!out.empty()) out += ';';
    out += k;
    out += '=';
    out += v;
  }
  return out;
}

std::map<std::string, std::string> parse_tags(std::string_view text) {
  std::map<std::string, std::string> tags;
  if (text.empty() || text == "-") return tags;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t semi = text.find(';', pos);
    std::string_view item = text.substr(pos, semi == std::string_view::npos ? text.size() - pos
                                                                            : semi - pos);
    pos = semi == std::string_view::npos ? text.size() : semi + 1;
    if (item.empty()) continue;
    std::size_t eq = item.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("bad tag item '" + std::string(item) + "', expected k=v");
    tags[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
  }
  return tags;
}

std::string write_structures(const std::vector<ConversationStructure>& structures) {
  std::string out = "# structure_id\tindex\trole\tduration_sec\n";
  char buf[64];
  for (const auto& st : structures) {
    if (!st.source_tags.empty()) {
      out += "# tags " + st.structure_id + " " + format_tags(st.source_tags) + "\n";
    }
    int index = 0;
    for (const auto& slot : st.slots) {
      std::snprintf(buf, sizeof(buf), "%d\t%s\t%.3f\n", index, slot.role.c_str(),
                    slot.duration());
      out += st.structure_id;
      out += '\t';
      out += buf;
      ++index;
    }
  }
  return out;
}

std::vector<ConversationStructure> parse_structures(std::string_view text) {
  std::vector<ConversationStructure> out;
  std::map<std::string, std::size_t> by_id;
  std::map<std::string, std::map<std::string, std::string>> pending_tags;

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string word, id, tags;
      ls >> word;
      if (word == "tags" && (ls >> id >> tags)) pending_tags[id] = parse_tags(tags);
      continue;
    }
    std::istringstream ls(line);
    std::string id, role;
    long index = -1;
    double duration = 0.0;
    if (!(ls >> id >> index >> role >> duration))
      throw ParseError("structure file line " + std::to_string(line_no) + ": bad record '" +
                       line + "'");
    auto [it, inserted] = by_id.try_emplace(id, out.size());
    if (inserted) out.push_back({id, {}, {}});
    auto& st = out[it->second];
    if (static_cast<long>(st.slots.size()) != index)
      throw ValidationError("structure file line " + std::to_string(line_no) +
                            ": slot index " + std::to_string(index) + " out of order for '" + id +
                            "'");
    if (duration <= 0)
      throw ValidationError("structure file line " + std::to_string(line_no) +
                            ": non-positive duration");
    st.slots.push_back({role, to_ticks(duration)});
  }
  for (auto& st : out) {
    auto it = pending_tags.find(st.structure_id);
    if (it != pending_tags.end()) st.source_tags = it->second;
  }
  return out;
}

std::vector<ConversationStructure> read_structure_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open structure file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_structures(ss.str());
}

void write_structure_file(const std::string& path,
                          const std::vector<ConversationStructure>& structures) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write structure file: " + path);
  out << write_structures(structures);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace diafactor
