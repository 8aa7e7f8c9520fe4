#pragma once

#include <map>
#include <string>
#include <vector>

#include "diafactor/time.hpp"
#include "diafactor/timeline.hpp"

namespace diafactor {

/// Role label reserved for silence slots in conversation structures.
inline const std::string kSilenceRole = "SIL";

struct StructureSlot {
  std::string role;  // "A", "B", ... or kSilenceRole
  Ticks duration_ms = 0;

  bool is_silence() const { return role == kSilenceRole; }
  double duration() const { return to_seconds(duration_ms); }

  bool operator==(const StructureSlot&) const = default;
};

/// The speaker-anonymized schedule of one conversation: ordered (role,
/// duration) slots with silences, no overlap by construction.
struct ConversationStructure {
  std::string structure_id;
  std::map<std::string, std::string> source_tags;  // factor -> level of the origin conversation
  std::vector<StructureSlot> slots;

  Ticks total_ms() const;
  Ticks role_time_ms(const std::string& role) const;
  /// Non-silence roles in order of first appearance.
  std::vector<std::string> roles() const;
  bool has_speech() const;

  bool operator==(const ConversationStructure&) const = default;
};

/// Turns a speaker-labeled reference Timeline into a sequential structure.
///
/// Overlap is resolved with a later-onset-wins rule: each segment is cut at
/// the onset of the next segment in (onset, label) order, so turn-transition
/// timing is preserved. Gaps >= min_gap seconds become SIL slots; smaller
/// gaps are dropped and the schedule is compacted, so per-role speech time
/// never exceeds the original. Adjacent same-role segments stay distinct
/// slots. Throws ValidationError when a label is missing from role_map or a
/// role collides with the silence label.
ConversationStructure extract_structure(const Timeline& t,
                                        const std::map<std::string, std::string>& role_map,
                                        double min_gap = 0.1);

/// Tab-separated structure file: `structure_id index role duration_sec` with
/// durations at 3 decimals; `#` lines are comments. Source tags survive the
/// round trip via `# tags <structure_id> k=v;...` comment lines.
std::string write_structures(const std::vector<ConversationStructure>& structures);
std::vector<ConversationStructure> parse_structures(std::string_view text);

std::vector<ConversationStructure> read_structure_file(const std::string& path);
void write_structure_file(const std::string& path,
                          const std::vector<ConversationStructure>& structures);

/// `k=v;k=v` rendering of a tag map, keys sorted; "-" when empty.
std::string format_tags(const std::map<std::string, std::string>& tags);
std::map<std::string, std::string> parse_tags(std::string_view text);

}  // namespace diafactor
