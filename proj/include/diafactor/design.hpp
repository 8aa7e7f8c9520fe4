#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "diafactor/stream.hpp"
#include "diafactor/structure.hpp"

namespace diafactor {

/// Two speakers remixed together, with the pair-side factor levels
/// (gender composition, language, ...).
struct SpeakerPair {
  std::string pair_id;
  std::array<std::string, 2> members;
  std::map<std::string, std::string> tags;

  bool operator==(const SpeakerPair&) const = default;
};

/// One way of casting the pair's members into the structure's roles.
struct RoleAssignment {
  std::map<std::string, std::string> mapping;  // role -> speaker_id, a bijection
  int version_index = 1;

  bool operator==(const RoleAssignment&) const = default;
};

/// One fully specified conversation to synthesize: a (possibly truncated)
/// structure, a speaker pair, and one role assignment.
struct ConversationVersion {
  std::string version_id;  // <structure_id>__<pair_id>__v<version_index>
  ConversationStructure structure;
  SpeakerPair pair;
  RoleAssignment assignment;
  std::map<std::string, std::string> factor_levels;  // structure_* and pair_* merged

  bool operator==(const ConversationVersion&) const = default;
};

/// A (structure, pair) combination excluded from the design, with the reason.
struct SkippedCombination {
  std::string structure_id;
  std::string pair_id;
  std::string reason;

  bool operator==(const SkippedCombination&) const = default;
};

/// The full factorial crossing: structures x pairs x role assignments.
struct Design {
  std::vector<ConversationVersion> versions;
  std::vector<std::string> factors;  // declared factor names, sorted
  std::vector<SkippedCombination> skipped;

  bool operator==(const Design&) const = default;
};

/// Longest whole-slot prefix whose per-role cumulative speech duration never
/// exceeds `min_available` seconds (silence slots never limit). Returns an
/// empty-slot structure when even the first speech slot does not fit.
ConversationStructure truncate_structure(const ConversationStructure& s, double min_available);

/// Enumerates every (structure, pair, role assignment) combination.
/// Structures are truncated to the pair's minimum availability; combinations
/// whose truncation leaves no speech are recorded as skipped. Role
/// assignments cover all bijections of the pair's members onto the
/// structure's roles (members canonicalized to sorted order);
/// `max_assignments` > 0 caps how many are kept per (structure, pair).
/// Throws ValidationError for unknown speakers, duplicate ids, or structures
/// whose role count cannot be cast from two members.
Design enumerate_versions(const std::vector<ConversationStructure>& structures,
                          const std::vector<SpeakerPair>& pairs,
                          const std::map<std::string, double>& available_sec,
                          int max_assignments = 0);
Design enumerate_versions(const std::vector<ConversationStructure>& structures,
                          const std::vector<SpeakerPair>& pairs,
                          const std::map<std::string, SpeakerStream>& streams,
                          int max_assignments = 0);

/// Tab-separated manifest, one row per version:
/// `version_id structure_id pair_id version_index role_map truncated_total_sec
///  factor_levels`; skipped combinations as `#skip` comment lines.
std::string design_manifest(const Design& d);

/// Truncated structures referenced by a manifest, ids `<structure_id>@<pair_id>`,
/// one per (structure, pair) group, in first-use order.
std::vector<ConversationStructure> design_structures(const Design& d);

/// Rebuilds the Design from its manifest plus the truncated structures
/// written by design_structures. Exact inverse of the emit pair.
Design design_from_manifest(const std::string& manifest_text,
                            const std::vector<ConversationStructure>& truncated);

Design read_design(const std::string& manifest_path, const std::string& structures_path);
void write_design(const Design& d, const std::string& manifest_path,
                  const std::string& structures_path);

}  // namespace diafactor
