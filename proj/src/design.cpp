#include "diafactor/design.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "diafactor/errors.hpp"

namespace diafactor {

ConversationStructure truncate_structure(const ConversationStructure& s, double min_available) {
  if (!(min_available > 0))
    throw ValidationError("truncate_structure: min_available must be positive");
  const Ticks budget = to_ticks(min_available);

  ConversationStructure out;
  out.structure_id = s.structure_id;
  out.source_tags = s.source_tags;

  std::map<std::string, Ticks> cumulative;
  for (const auto& slot : s.slots) {
    if (!slot.is_silence()) {
      if (cumulative[slot.role] + slot.duration_ms > budget) break;
      cumulative[slot.role] += slot.duration_ms;
    }
    out.slots.push_back(slot);
  }
  return out;
}

namespace {

std::string version_id_of(const std::string& structure_id, const std::string& pair_id,
                          int version_index) {
  return structure_id + "__" + pair_id + "__v" + std::to_string(version_index);
}

std::string fmt_seconds(Ticks ms) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", to_seconds(ms));
  return buf;
}

}  // namespace

Design enumerate_versions(const std::vector<ConversationStructure>& structures,
                          const std::vector<SpeakerPair>& pairs,
                          const std::map<std::string, double>& available_sec,
                          int max_assignments) {
  std::set<std::string> structure_ids, pair_ids;
  for (const auto& s : structures)
    if (!structure_ids.insert(s.structure_id).second)
      throw ValidationError("enumerate_versions: duplicate structure id '" + s.structure_id + "'");
  for (const auto& p : pairs) {
    if (!pair_ids.insert(p.pair_id).second)
      throw ValidationError("enumerate_versions: duplicate pair id '" + p.pair_id + "'");
    if (p.members[0] == p.members[1])
      throw ValidationError("enumerate_versions: pair '" + p.pair_id +
                            "' must have two distinct members");
    for (const auto& m : p.members)
      if (!available_sec.count(m))
        throw ValidationError("enumerate_versions: unknown speaker '" + m + "' in pair '" +
                              p.pair_id + "'");
  }

  Design d;
  std::set<std::string> factor_names;
  for (const auto& s : structures)
    for (const auto& [k, v] : s.source_tags) factor_names.insert("structure_" + k);
  for (const auto& p : pairs)
    for (const auto& [k, v] : p.tags) factor_names.insert("pair_" + k);
  d.factors.assign(factor_names.begin(), factor_names.end());

  for (const auto& s : structures) {
    const auto roles = s.roles();
    for (const auto& p : pairs) {
      if (roles.size() != p.members.size()) {
        d.skipped.push_back({s.structure_id, p.pair_id,
                             "structure has " + std::to_string(roles.size()) +
                                 " roles, pair has " + std::to_string(p.members.size()) +
                                 " members"});
        continue;
      }
      const double avail =
          std::min(available_sec.at(p.members[0]), available_sec.at(p.members[1]));
      if (!(avail > 0)) {
        d.skipped.push_back({s.structure_id, p.pair_id, "a member has no available audio"});
        continue;
      }
      auto truncated = truncate_structure(s, avail);
      if (!truncated.has_speech()) {
        d.skipped.push_back(
            {s.structure_id, p.pair_id, "first speech slot exceeds available audio"});
        continue;
      }

      SpeakerPair pair = p;
      std::sort(pair.members.begin(), pair.members.end());
      std::vector<std::string> sorted_roles(roles);
      std::sort(sorted_roles.begin(), sorted_roles.end());

      std::map<std::string, std::string> merged;
      for (const auto& [k, v] : s.source_tags) merged["structure_" + k] = v;
      for (const auto& [k, v] : p.tags) merged["pair_" + k] = v;

      std::vector<std::string> perm(pair.members.begin(), pair.members.end());
      int index = 0;
      do {
        ++index;
        if (max_assignments > 0 && index > max_assignments) break;
        ConversationVersion v;
        v.structure = truncated;
        v.pair = pair;
        v.assignment.version_index = index;
        for (std::size_t i = 0; i < sorted_roles.size(); ++i)
          v.assignment.mapping[sorted_roles[i]] = perm[i];
        v.version_id = version_id_of(s.structure_id, p.pair_id, index);
        v.factor_levels = merged;
        d.versions.push_back(std::move(v));
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
  return d;
}

Design enumerate_versions(const std::vector<ConversationStructure>& structures,
                          const std::vector<SpeakerPair>& pairs,
                          const std::map<std::string, SpeakerStream>& streams,
                          int max_assignments) {
  std::map<std::string, double> available;
  for (const auto& [id, stream] : streams) available[id] = to_seconds(stream.available_ms());
  return enumerate_versions(structures, pairs, available, max_assignments);
}

std::string design_manifest(const Design& d) {
  std::string out =
      "# version_id\tstructure_id\tpair_id\tversion_index\trole_map\ttruncated_total_sec"
      "\tfactor_levels\n";
  for (const auto& sk : d.skipped)
    out += "#skip\t" + sk.structure_id + "\t" + sk.pair_id + "\t" + sk.reason + "\n";
  for (const auto& v : d.versions) {
    out += v.version_id + '\t' + v.structure.structure_id + '\t' + v.pair.pair_id + '\t' +
           std::to_string(v.assignment.version_index) + '\t' + format_tags(v.assignment.mapping) +
           '\t' + fmt_seconds(v.structure.total_ms()) + '\t' + format_tags(v.factor_levels) +
           '\n';
  }
  return out;
}

std::vector<ConversationStructure> design_structures(const Design& d) {
  std::vector<ConversationStructure> out;
  std::set<std::string> seen;
  for (const auto& v : d.versions) {
    auto st = v.structure;
    st.structure_id = v.structure.structure_id + "@" + v.pair.pair_id;
    if (seen.insert(st.structure_id).second) out.push_back(std::move(st));
  }
  return out;
}

Design design_from_manifest(const std::string& manifest_text,
                            const std::vector<ConversationStructure>& truncated) {
  std::map<std::string, const ConversationStructure*> by_key;
  for (const auto& st : truncated) by_key[st.structure_id] = &st;

  Design d;
  std::set<std::string> factor_names;
  std::istringstream in(manifest_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }

    if (line[0] == '#') {
      if (fields[0] == "#skip") {
        if (fields.size() != 4)
          throw ParseError("design manifest line " + std::to_string(line_no) +
                           ": malformed #skip record");
        d.skipped.push_back({fields[1], fields[2], fields[3]});
      }
      continue;
    }
    if (fields.size() != 7)
      throw ParseError("design manifest line " + std::to_string(line_no) +
                       ": expected 7 fields, got " + std::to_string(fields.size()));

    ConversationVersion v;
    v.version_id = fields[0];
    const std::string& sid = fields[1];
    const std::string& pid = fields[2];

    int index{};
    auto [iend, iec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), index);
    if (iec != std::errc{} || iend != fields[3].data() + fields[3].size() || index < 1)
      throw ParseError("design manifest line " + std::to_string(line_no) +
                       ": bad version_index '" + fields[3] + "'");
    v.assignment.version_index = index;
    v.assignment.mapping = parse_tags(fields[4]);
    if (v.assignment.mapping.empty())
      throw ParseError("design manifest line " + std::to_string(line_no) + ": empty role_map");

    const auto key = sid + "@" + pid;
    auto it = by_key.find(key);
    if (it == by_key.end())
      throw ValidationError("design manifest line " + std::to_string(line_no) +
                            ": no truncated structure '" + key + "'");
    v.structure = *it->second;
    v.structure.structure_id = sid;

    double total{};
    auto [tend, tec] = std::from_chars(fields[5].data(), fields[5].data() + fields[5].size(), total);
    if (tec != std::errc{} || tend != fields[5].data() + fields[5].size())
      throw ParseError("design manifest line " + std::to_string(line_no) +
                       ": bad truncated_total_sec '" + fields[5] + "'");
    if (to_ticks(total) != v.structure.total_ms())
      throw ValidationError("design manifest line " + std::to_string(line_no) +
                            ": total " + fields[5] + " disagrees with structure '" + key + "'");

    v.pair.pair_id = pid;
    std::vector<std::string> members;
    for (const auto& [role, spk] : v.assignment.mapping) members.push_back(spk);
    std::sort(members.begin(), members.end());
    if (members.size() != 2 || members[0] == members[1])
      throw ValidationError("design manifest line " + std::to_string(line_no) +
                            ": role_map must cast two distinct members");
    v.pair.members = {members[0], members[1]};

    v.factor_levels = parse_tags(fields[6]);
    for (const auto& [k, val] : v.factor_levels) {
      factor_names.insert(k);
      if (k.rfind("pair_", 0) == 0) v.pair.tags[k.substr(5)] = val;
      if (k.rfind("structure_", 0) == 0) v.structure.source_tags[k.substr(10)] = val;
    }
    d.versions.push_back(std::move(v));
  }
  d.factors.assign(factor_names.begin(), factor_names.end());
  return d;
}

Design read_design(const std::string& manifest_path, const std::string& structures_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open design manifest: " + manifest_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return design_from_manifest(ss.str(), read_structure_file(structures_path));
}

void write_design(const Design& d, const std::string& manifest_path,
                  const std::string& structures_path) {
  write_structure_file(structures_path, design_structures(d));
  std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write design manifest: " + manifest_path);
  out << design_manifest(d);
  if (!out) throw IoError("write failed: " + manifest_path);
}

}  // namespace diafactor
