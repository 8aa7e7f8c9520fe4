#pragma once

#include <string>
#include <string_view>

#include "diafactor/timeline.hpp"

namespace diafactor {

/// Parses RTTM text into a Timeline. Only SPEAKER records are read; other
/// record types are ignored. All SPEAKER records must share one recording id.
Timeline parse_rttm(std::string_view text);

/// Emits one SPEAKER line per segment:
///   SPEAKER <recording_id> 1 <onset> <duration> <NA> <NA> <label> <NA> <NA>
/// Times are printed with `precision` decimal places (>= 3).
std::string emit_rttm(const Timeline& t, int precision = 3);

Timeline read_rttm_file(const std::string& path);
void write_rttm_file(const std::string& path, const Timeline& t, int precision = 3);

}  // namespace diafactor
