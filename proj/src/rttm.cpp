#include "diafactor/rttm.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "diafactor/errors.hpp"

namespace diafactor {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

double parse_double(std::string_view sv, int line_no, const char* what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
  if (ec != std::errc() || ptr != sv.data() + sv.size())
    throw ParseError("rttm line " + std::to_string(line_no) + ": bad " + what + " '" +
                     std::string(sv) + "'");
  return value;
}

}  // namespace

Timeline parse_rttm(std::string_view text) {
  std::vector<Segment> segments;
  std::string recording_id;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                           : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto fields = split_ws(line);
    if (fields.empty() || fields[0][0] == ';') continue;
    if (fields[0] != "SPEAKER") continue;
    if (fields.size() < 9)
      throw ParseError("rttm line " + std::to_string(line_no) + ": SPEAKER record has " +
                       std::to_string(fields.size()) + " fields, expected >= 9");

    std::string rec(fields[1]);
    if (recording_id.empty()) {
      recording_id = rec;
    } else if (rec != recording_id) {
      throw ValidationError("rttm line " + std::to_string(line_no) +
                            ": multiple recording ids in one file ('" + recording_id + "' vs '" +
                            rec + "')");
    }
    double onset = parse_double(fields[3], line_no, "onset");
    double duration = parse_double(fields[4], line_no, "duration");
    if (duration < 0)
      throw ValidationError("rttm line " + std::to_string(line_no) + ": negative duration");
    segments.push_back(Segment::from_seconds(onset, duration, std::string(fields[7])));
  }
  return Timeline(recording_id, std::move(segments));
}

std::string emit_rttm(const Timeline& t, int precision) {
  if (precision < 3)
    throw ValidationError("rttm precision must be >= 3 decimal places");
  std::string out;
  char buf[64];
  for (const auto& seg : t.segments()) {
    out += "SPEAKER ";
    out += t.recording_id().empty() ? "rec" : t.recording_id();
    std::snprintf(buf, sizeof(buf), " 1 %.*f %.*f <NA> <NA> ", precision, seg.onset(), precision,
                  seg.duration());
    out += buf;
    out += seg.label;
    out += " <NA> <NA>\n";
  }
  return out;
}

Timeline read_rttm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open rttm file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_rttm(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_rttm_file(const std::string& path, const Timeline& t, int precision) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write rttm file: " + path);
  out << emit_rttm(t, precision);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace diafactor
