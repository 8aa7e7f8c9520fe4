#include "diafactor/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string_view>

#include "diafactor/audio.hpp"
#include "diafactor/design.hpp"
#include "diafactor/errors.hpp"
#include "diafactor/parallel.hpp"
#include "diafactor/rttm.hpp"
#include "diafactor/scoring.hpp"
#include "diafactor/splicer.hpp"
#include "diafactor/stream.hpp"
#include "diafactor/structure.hpp"
#include "json.hpp"

namespace diafactor {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("cannot read file: " + path);
  return os.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out << content;
  out.flush();
  if (!out) throw IoError("cannot write file: " + path);
}

void require_dir(const std::string& path) {
  if (!fs::is_directory(path)) throw IoError("missing input directory: " + path);
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw IoError("missing input file: " + path);
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create output directory: " + path);
}

std::vector<std::string> list_files(const std::string& dir, const std::string& ext) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext)
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<std::string_view> known,
                const char* scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ValidationError(std::string("unknown config key: ") + scope + it.key());
  }
}

template <class T>
T take(const json& j, const char* key, T fallback, const char* scope) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config key has the wrong type: ") + scope + key);
  }
}

void validate_config(const RunConfig& cfg) {
  if (cfg.sample_rate < 8000)
    throw ValidationError("sample_rate must be at least 8000");
  if (cfg.taper < 0.0) throw ValidationError("taper must be non-negative");
  if (cfg.min_gap < 0.0) throw ValidationError("min_gap must be non-negative");
  if (cfg.collar < 0.0) throw ValidationError("collar must be non-negative");
  if (cfg.max_assignments < 0)
    throw ValidationError("max_assignments must be non-negative");
  if (cfg.n_boot < 1000) throw ValidationError("n_boot must be at least 1000");
  if (cfg.pairing != "given" && cfg.pairing != "seeded-random")
    throw ValidationError("pairing must be 'given' or 'seeded-random'");
  if (cfg.entropy_windows.empty())
    throw ValidationError("entropy_windows must not be empty");
  for (double w : cfg.entropy_windows)
    if (!(w > 0.0)) throw ValidationError("entropy windows must be positive");
}

// --- stage bookkeeping ---------------------------------------------------

StageManifest finish_stage(const RunConfig& cfg, std::string stage,
                           std::vector<std::string> inputs,
                           std::vector<std::string> outputs,
                           std::map<std::string, std::int64_t> counts,
                           const std::string& out_dir, Clock::time_point t0) {
  std::sort(inputs.begin(), inputs.end());
  std::sort(outputs.begin(), outputs.end());
  StageManifest m;
  m.stage = std::move(stage);
  m.config_hash = config_hash(cfg);
  std::string key = m.stage + "\n" + m.config_hash;
  for (const auto& in : inputs) key += "\n" + in;
  m.run_id = hex16(fnv1a(key));
  m.inputs = std::move(inputs);
  m.outputs = std::move(outputs);
  m.counts = std::move(counts);
  m.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0)
                  .count();
  write_text(out_dir + "/" + m.stage + ".manifest.json", emit_stage_manifest(m));
  write_text(out_dir + "/" + m.stage + ".config.json", emit_config(cfg));
  return m;
}

// --- speaker pool --------------------------------------------------------

struct PoolEntry {
  std::string speaker_id;
  double duration_sec = 0.0;
  std::string file;
  std::map<std::string, std::string> tags;
};

std::string emit_pool_index(const std::vector<PoolEntry>& entries) {
  std::ostringstream os;
  os << "# speaker pool\n";
  os << "# speaker_id\tduration_sec\tfile\ttags\n";
  for (const auto& e : entries)
    os << e.speaker_id << "\t" << fmt6(e.duration_sec) << "\t" << e.file << "\t"
       << format_tags(e.tags) << "\n";
  return os.str();
}

std::vector<PoolEntry> read_pool_index(const std::string& pool_dir) {
  require_dir(pool_dir);
  const std::string path = pool_dir + "/pool.tsv";
  require_file(path);
  const std::string text = read_text(path);

  std::vector<PoolEntry> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto parts = split_tabs(line);
    if (parts.size() != 4)
      throw ParseError("pool.tsv line " + std::to_string(line_no) +
                       ": expected 4 tab-separated fields");
    PoolEntry e;
    e.speaker_id = parts[0];
    try {
      e.duration_sec = std::stod(parts[1]);
    } catch (const std::exception&) {
      throw ParseError("pool.tsv line " + std::to_string(line_no) + ": bad duration");
    }
    e.file = parts[2];
    e.tags = parse_tags(parts[3]);
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw ValidationError("pool index lists no speakers: " + path);
  return entries;
}

std::map<std::string, SpeakerStream> load_streams(const std::string& pool_dir,
                                                  const std::set<std::string>& ids) {
  const auto entries = read_pool_index(pool_dir);
  std::map<std::string, const PoolEntry*> by_id;
  for (const auto& e : entries) by_id[e.speaker_id] = &e;

  std::map<std::string, SpeakerStream> streams;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end())
      throw ValidationError("pool has no speaker named " + id);
    SpeakerStream s;
    s.speaker_id = id;
    s.tags = it->second->tags;
    s.audio = read_wav(pool_dir + "/" + it->second->file);
    streams.emplace(id, std::move(s));
  }
  return streams;
}

// --- pairs ----------------------------------------------------------------

std::string emit_pairs(const std::vector<SpeakerPair>& pairs) {
  std::ostringstream os;
  os << "# speaker pairs\n";
  os << "# pair_id\tmember1\tmember2\ttags\n";
  for (const auto& p : pairs)
    os << p.pair_id << "\t" << p.members[0] << "\t" << p.members[1] << "\t"
       << format_tags(p.tags) << "\n";
  return os.str();
}

std::vector<SpeakerPair> parse_pairs(const std::string& text, const std::string& path) {
  std::vector<SpeakerPair> pairs;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto parts = split_tabs(line);
    if (parts.size() != 4)
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected 4 tab-separated fields");
    pairs.push_back({parts[0], {parts[1], parts[2]}, parse_tags(parts[3])});
  }
  if (pairs.empty()) throw ValidationError("pairs file lists no pairs: " + path);
  return pairs;
}

// Disjoint pairs from a seeded shuffle of the pool. Tag keys shared by both
// members survive; differing values compose as "low+high".
std::vector<SpeakerPair> random_pairs(const std::vector<PoolEntry>& entries,
                                      std::uint64_t seed, int* unpaired) {
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(e.speaker_id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  std::map<std::string, const PoolEntry*> by_id;
  for (const auto& e : entries) by_id[e.speaker_id] = &e;

  std::vector<SpeakerPair> pairs;
  for (std::size_t i = 0; i + 1 < ids.size(); i += 2) {
    SpeakerPair p;
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%03zu", pairs.size());
    p.pair_id = buf;
    p.members = {ids[i], ids[i + 1]};
    const auto& t1 = by_id.at(ids[i])->tags;
    const auto& t2 = by_id.at(ids[i + 1])->tags;
    for (const auto& [k, v1] : t1) {
      const auto it = t2.find(k);
      if (it == t2.end()) continue;
      p.tags[k] = v1 == it->second ? v1
                                   : std::min(v1, it->second) + "+" + std::max(v1, it->second);
    }
    pairs.push_back(std::move(p));
  }
  *unpaired = static_cast<int>(ids.size() % 2);
  if (*unpaired)
    std::cerr << "design: odd pool size, leaving one speaker unpaired\n";
  if (pairs.empty()) throw ValidationError("pool is too small to form any pair");
  return pairs;
}

// --- shared analysis plumbing ---------------------------------------------

std::vector<AnalysisRecord> to_analysis_records(const std::vector<ScoreRecord>& scores,
                                                const Design& d) {
  std::map<std::string, std::pair<std::string, std::string>> ids;
  for (const auto& v : d.versions)
    ids[v.version_id] = {v.structure.structure_id, v.pair.pair_id};

  std::vector<AnalysisRecord> records;
  records.reserve(scores.size());
  for (const auto& s : scores) {
    const auto it = ids.find(s.version_id);
    if (it == ids.end())
      throw ValidationError("scores reference a version missing from the design: " +
                            s.version_id);
    records.push_back(
        {it->second.first, it->second.second, "", s.factor_levels, s.der.der});
  }
  return records;
}

}  // namespace

// --- config ----------------------------------------------------------------

RunConfig parse_config(const std::string& json_text) {
  const json j = parse_json_text(json_text, "config");
  if (!j.is_object()) throw ValidationError("config root must be a JSON object");
  check_keys(j,
             {"sample_rate", "seed", "taper", "min_gap", "collar", "omit_overlap",
              "max_assignments", "n_boot", "pairing", "entropy_windows", "vad",
              "diarizer"},
             "");

  RunConfig cfg;
  cfg.sample_rate = take(j, "sample_rate", cfg.sample_rate, "");
  cfg.seed = take(j, "seed", cfg.seed, "");
  cfg.taper = take(j, "taper", cfg.taper, "");
  cfg.min_gap = take(j, "min_gap", cfg.min_gap, "");
  cfg.collar = take(j, "collar", cfg.collar, "");
  cfg.omit_overlap = take(j, "omit_overlap", cfg.omit_overlap, "");
  cfg.max_assignments = take(j, "max_assignments", cfg.max_assignments, "");
  cfg.n_boot = take(j, "n_boot", cfg.n_boot, "");
  cfg.pairing = take(j, "pairing", cfg.pairing, "");
  cfg.entropy_windows = take(j, "entropy_windows", cfg.entropy_windows, "");

  if (j.contains("vad")) {
    const json& v = j.at("vad");
    if (!v.is_object()) throw ValidationError("config key 'vad' must be an object");
    check_keys(v, {"frame", "hop", "threshold_db", "hangover", "speech_floor_db"},
               "vad.");
    cfg.vad.frame = take(v, "frame", cfg.vad.frame, "vad.");
    cfg.vad.hop = take(v, "hop", cfg.vad.hop, "vad.");
    cfg.vad.threshold_db = take(v, "threshold_db", cfg.vad.threshold_db, "vad.");
    cfg.vad.hangover = take(v, "hangover", cfg.vad.hangover, "vad.");
    cfg.vad.speech_floor_db =
        take(v, "speech_floor_db", cfg.vad.speech_floor_db, "vad.");
  }
  if (j.contains("diarizer")) {
    const json& d = j.at("diarizer");
    if (!d.is_object())
      throw ValidationError("config key 'diarizer' must be an object");
    check_keys(d,
               {"window", "hop", "frame", "frame_hop", "n_bands", "n_clusters",
                "linkage", "stop_threshold"},
               "diarizer.");
    cfg.diarizer.window = take(d, "window", cfg.diarizer.window, "diarizer.");
    cfg.diarizer.hop = take(d, "hop", cfg.diarizer.hop, "diarizer.");
    cfg.diarizer.frame = take(d, "frame", cfg.diarizer.frame, "diarizer.");
    cfg.diarizer.frame_hop = take(d, "frame_hop", cfg.diarizer.frame_hop, "diarizer.");
    cfg.diarizer.n_bands = take(d, "n_bands", cfg.diarizer.n_bands, "diarizer.");
    cfg.diarizer.n_clusters =
        take(d, "n_clusters", cfg.diarizer.n_clusters, "diarizer.");
    cfg.diarizer.linkage = take(d, "linkage", cfg.diarizer.linkage, "diarizer.");
    cfg.diarizer.stop_threshold =
        take(d, "stop_threshold", cfg.diarizer.stop_threshold, "diarizer.");
  }

  validate_config(cfg);
  return cfg;
}

std::string emit_config(const RunConfig& cfg) {
  json j;
  j["sample_rate"] = cfg.sample_rate;
  j["seed"] = cfg.seed;
  j["taper"] = cfg.taper;
  j["min_gap"] = cfg.min_gap;
  j["collar"] = cfg.collar;
  j["omit_overlap"] = cfg.omit_overlap;
  j["max_assignments"] = cfg.max_assignments;
  j["n_boot"] = cfg.n_boot;
  j["pairing"] = cfg.pairing;
  j["entropy_windows"] = cfg.entropy_windows;
  j["vad"] = {{"frame", cfg.vad.frame},
              {"hop", cfg.vad.hop},
              {"threshold_db", cfg.vad.threshold_db},
              {"hangover", cfg.vad.hangover},
              {"speech_floor_db", cfg.vad.speech_floor_db}};
  j["diarizer"] = {{"window", cfg.diarizer.window},
                   {"hop", cfg.diarizer.hop},
                   {"frame", cfg.diarizer.frame},
                   {"frame_hop", cfg.diarizer.frame_hop},
                   {"n_bands", cfg.diarizer.n_bands},
                   {"n_clusters", cfg.diarizer.n_clusters},
                   {"linkage", cfg.diarizer.linkage},
                   {"stop_threshold", cfg.diarizer.stop_threshold}};
  return j.dump(2) + "\n";
}

RunConfig read_config_file(const std::string& path) {
  require_file(path);
  return parse_config(read_text(path));
}

std::string config_hash(const RunConfig& cfg) { return hex16(fnv1a(emit_config(cfg))); }

std::string emit_stage_manifest(const StageManifest& m) {
  json j;
  j["stage"] = m.stage;
  j["run_id"] = m.run_id;
  j["config_hash"] = m.config_hash;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["counts"] = m.counts;
  j["wall_ms"] = m.wall_ms;
  return j.dump(2) + "\n";
}

// --- stages -----------------------------------------------------------------

StageManifest cmd_extract(const RunConfig& cfg, const std::string& refs_dir,
                          const std::string& role_map_path, const std::string& out_dir) {
  const auto t0 = Clock::now();
  require_dir(refs_dir);

  std::map<std::string, std::string> role_map;
  const bool have_map = !role_map_path.empty();
  if (have_map) {
    require_file(role_map_path);
    std::istringstream in(read_text(role_map_path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      const auto parts = split_tabs(line);
      if (parts.size() != 2)
        throw ParseError(role_map_path + " line " + std::to_string(line_no) +
                         ": expected `label<TAB>role`");
      role_map[parts[0]] = parts[1];
    }
    if (role_map.empty())
      throw ValidationError("role map file declares no roles: " + role_map_path);
  }

  const auto files = list_files(refs_dir, ".rttm");
  if (files.empty()) throw ValidationError("no .rttm files in " + refs_dir);
  ensure_dir(out_dir);

  std::vector<ConversationStructure> structures;
  std::vector<std::string> outputs;
  std::set<std::string> seen_ids;
  std::int64_t skipped = 0;
  for (const auto& f : files) {
    try {
      const Timeline t = read_rttm_file(refs_dir + "/" + f);
      std::map<std::string, std::string> local_map;
      if (have_map) {
        local_map = role_map;
      } else {
        // roles by order of first appearance
        for (const auto& seg : t.segments())
          if (local_map.find(seg.label) == local_map.end()) {
            if (local_map.size() >= 26)
              throw ValidationError("more than 26 speakers");
            local_map[seg.label] =
                std::string(1, static_cast<char>('A' + local_map.size()));
          }
      }
      auto st = extract_structure(t, local_map, cfg.min_gap);
      if (!seen_ids.insert(st.structure_id).second)
        throw ValidationError("duplicate recording id " + st.structure_id);
      write_structure_file(out_dir + "/" + st.structure_id + ".structure.tsv", {st});
      outputs.push_back(st.structure_id + ".structure.tsv");
      structures.push_back(std::move(st));
    } catch (const std::runtime_error& e) {
      ++skipped;
      std::cerr << "extract: skipping " << f << ": " << e.what() << "\n";
    }
  }
  write_structure_file(out_dir + "/structures.tsv", structures);
  outputs.push_back("structures.tsv");

  return finish_stage(cfg, "extract", {refs_dir, role_map_path}, std::move(outputs),
                      {{"recordings", static_cast<std::int64_t>(files.size())},
                       {"structures", static_cast<std::int64_t>(structures.size())},
                       {"skipped", skipped}},
                      out_dir, t0);
}

StageManifest cmd_pool(const RunConfig& cfg, const std::string& synth_spec_path,
                       const std::string& audio_dir, const std::string& out_dir) {
  const auto t0 = Clock::now();
  if (synth_spec_path.empty() == audio_dir.empty())
    throw ValidationError("pool needs exactly one of a synth spec or an audio directory");

  std::vector<PoolEntry> entries;
  std::vector<std::string> outputs;
  std::int64_t skipped = 0;

  if (!synth_spec_path.empty()) {
    require_file(synth_spec_path);
    const json spec = parse_json_text(read_text(synth_spec_path), synth_spec_path);
    if (!spec.is_object() || !spec.contains("speakers") || !spec.at("speakers").is_array())
      throw ValidationError("synth spec must be an object with a 'speakers' array");
    check_keys(spec, {"speakers"}, "");
    const auto& speakers = spec.at("speakers");
    if (speakers.empty()) throw ValidationError("synth spec lists no speakers");
    ensure_dir(out_dir);

    std::set<std::string> seen;
    std::size_t index = 0;
    for (const auto& s : speakers) {
      if (!s.is_object()) throw ValidationError("each synth speaker must be an object");
      check_keys(s,
                 {"speaker_id", "duration_sec", "f0", "resonance_centers", "noise_mix",
                  "jitter", "seed", "tags"},
                 "speakers[].");
      const std::string id = take(s, "speaker_id", std::string(), "speakers[].");
      if (id.empty()) throw ValidationError("synth speaker without a speaker_id");
      if (!seen.insert(id).second)
        throw ValidationError("duplicate synth speaker id " + id);
      const double duration = take(s, "duration_sec", 0.0, "speakers[].");
      if (!(duration > 0.0))
        throw ValidationError("synth speaker " + id + " needs duration_sec > 0");

      VoiceSpec voice;
      voice.f0 = take(s, "f0", voice.f0, "speakers[].");
      const auto centers =
          take(s, "resonance_centers",
               std::vector<double>{voice.resonance_centers[0], voice.resonance_centers[1]},
               "speakers[].");
      if (centers.size() != 2)
        throw ValidationError("resonance_centers needs exactly 2 values for " + id);
      voice.resonance_centers = {centers[0], centers[1]};
      voice.noise_mix = take(s, "noise_mix", voice.noise_mix, "speakers[].");
      voice.jitter = take(s, "jitter", voice.jitter, "speakers[].");
      voice.seed = take(s, "seed", cfg.seed * 1000003ULL + index, "speakers[].");
      std::map<std::string, std::string> tags;
      if (s.contains("tags")) {
        const json& tj = s.at("tags");
        if (!tj.is_object()) throw ValidationError("tags must be an object for " + id);
        for (auto it = tj.begin(); it != tj.end(); ++it)
          tags[it.key()] = it.value().get<std::string>();
      }

      const auto stream = synth_speaker(voice, duration, cfg.sample_rate, id, tags);
      write_wav(out_dir + "/" + id + ".wav", stream.audio);
      outputs.push_back(id + ".wav");
      entries.push_back({id, stream.audio.duration(), id + ".wav", tags});
      ++index;
    }
  } else {
    require_dir(audio_dir);
    const auto files = list_files(audio_dir, ".wav");
    if (files.empty()) throw ValidationError("no .wav files in " + audio_dir);
    ensure_dir(out_dir);

    for (const auto& f : files) {
      const std::string id = fs::path(f).stem().string();
      const AudioBuffer a = read_wav(audio_dir + "/" + f);
      const Timeline speech = energy_vad(a, cfg.vad);
      if (speech.empty()) {
        ++skipped;
        std::cerr << "pool: skipping " << f << ": no speech detected\n";
        continue;
      }
      const auto stream = build_stream(a, speech, id);
      write_wav(out_dir + "/" + id + ".wav", stream.audio);
      outputs.push_back(id + ".wav");
      entries.push_back({id, stream.audio.duration(), id + ".wav", {}});
    }
    if (entries.empty())
      throw ValidationError("every input file was skipped; pool is empty");
  }

  write_text(out_dir + "/pool.tsv", emit_pool_index(entries));
  outputs.push_back("pool.tsv");
  return finish_stage(cfg, "pool", {synth_spec_path, audio_dir}, std::move(outputs),
                      {{"speakers", static_cast<std::int64_t>(entries.size())},
                       {"skipped", skipped}},
                      out_dir, t0);
}

StageManifest cmd_design(const RunConfig& cfg, const std::string& structures_path,
                         const std::string& pool_dir, const std::string& pairs_path,
                         const std::string& out_dir) {
  const auto t0 = Clock::now();
  require_file(structures_path);
  const auto entries = read_pool_index(pool_dir);

  int unpaired = 0;
  std::vector<SpeakerPair> pairs;
  bool echo_pairs = false;
  if (!pairs_path.empty()) {
    require_file(pairs_path);
    pairs = parse_pairs(read_text(pairs_path), pairs_path);
  } else if (cfg.pairing == "seeded-random") {
    pairs = random_pairs(entries, cfg.seed, &unpaired);
    echo_pairs = true;
  } else {
    throw ValidationError("pairing 'given' requires a pairs file");
  }

  const auto structures = read_structure_file(structures_path);
  std::map<std::string, double> available;
  for (const auto& e : entries) available[e.speaker_id] = e.duration_sec;

  const Design d = enumerate_versions(structures, pairs, available, cfg.max_assignments);

  ensure_dir(out_dir);
  write_design(d, out_dir + "/design_manifest.tsv", out_dir + "/design_structures.tsv");
  std::vector<std::string> outputs{"design_manifest.tsv", "design_structures.tsv"};
  if (echo_pairs) {
    write_text(out_dir + "/pairs.tsv", emit_pairs(pairs));
    outputs.push_back("pairs.tsv");
  }

  return finish_stage(cfg, "design", {structures_path, pool_dir, pairs_path},
                      std::move(outputs),
                      {{"structures", static_cast<std::int64_t>(structures.size())},
                       {"pairs", static_cast<std::int64_t>(pairs.size())},
                       {"versions", static_cast<std::int64_t>(d.versions.size())},
                       {"skipped", static_cast<std::int64_t>(d.skipped.size())},
                       {"unpaired", unpaired}},
                      out_dir, t0);
}

StageManifest cmd_render(const RunConfig& cfg, const std::string& manifest_path,
                         const std::string& structures_path, const std::string& pool_dir,
                         const std::string& out_dir, int workers) {
  const auto t0 = Clock::now();
  require_file(manifest_path);
  require_file(structures_path);
  const Design d = read_design(manifest_path, structures_path);
  if (d.versions.empty()) throw ValidationError("the design has no versions to render");

  std::set<std::string> needed;
  for (const auto& v : d.versions) {
    needed.insert(v.pair.members[0]);
    needed.insert(v.pair.members[1]);
  }
  const auto streams = load_streams(pool_dir, needed);

  ensure_dir(out_dir);
  const auto files = render_design(d, streams, out_dir, cfg.taper, workers);

  std::vector<std::string> outputs;
  std::int64_t total_ms = 0;
  for (const auto& f : files) {
    outputs.push_back(fs::path(f.wav_path).filename().string());
    outputs.push_back(fs::path(f.rttm_path).filename().string());
    total_ms += to_ticks(f.duration_sec);
  }
  return finish_stage(cfg, "render", {manifest_path, structures_path, pool_dir},
                      std::move(outputs),
                      {{"versions", static_cast<std::int64_t>(files.size())},
                       {"total_ms", total_ms}},
                      out_dir, t0);
}

StageManifest cmd_diarize(const RunConfig& cfg, const std::string& rendered_dir,
                          const std::string& out_dir, int workers) {
  const auto t0 = Clock::now();
  require_dir(rendered_dir);
  const auto wavs = list_files(rendered_dir, ".wav");
  if (wavs.empty()) throw ValidationError("no .wav files in " + rendered_dir);

  std::vector<std::string> ids;
  for (const auto& w : wavs) {
    const std::string id = fs::path(w).stem().string();
    require_file(rendered_dir + "/" + id + ".rttm");
    ids.push_back(id);
  }
  ensure_dir(out_dir);

  parallel_for(ids.size(), workers, [&](std::size_t i) {
    const AudioBuffer a = read_wav(rendered_dir + "/" + ids[i] + ".wav");
    const Timeline speech = read_rttm_file(rendered_dir + "/" + ids[i] + ".rttm");
    const Timeline hyp = diarize(a, speech, cfg.diarizer);
    write_rttm_file(out_dir + "/" + ids[i] + ".rttm", hyp);
  });

  std::vector<std::string> outputs;
  for (const auto& id : ids) outputs.push_back(id + ".rttm");
  return finish_stage(cfg, "diarize", {rendered_dir}, std::move(outputs),
                      {{"recordings", static_cast<std::int64_t>(ids.size())}}, out_dir,
                      t0);
}

StageManifest cmd_score(const RunConfig& cfg, const std::string& refs_dir,
                        const std::string& hyps_dir, const std::string& manifest_path,
                        const std::string& structures_path, const std::string& out_dir,
                        int workers) {
  const auto t0 = Clock::now();
  require_dir(refs_dir);
  require_dir(hyps_dir);
  require_file(manifest_path);
  require_file(structures_path);
  const Design d = read_design(manifest_path, structures_path);
  if (d.versions.empty()) throw ValidationError("the design has no versions to score");

  for (const auto& v : d.versions) {
    require_file(refs_dir + "/" + v.version_id + ".rttm");
    require_file(hyps_dir + "/" + v.version_id + ".rttm");
  }
  ensure_dir(out_dir);

  std::vector<ScoreRecord> records(d.versions.size());
  parallel_for(d.versions.size(), workers, [&](std::size_t i) {
    const auto& v = d.versions[i];
    const Timeline ref = read_rttm_file(refs_dir + "/" + v.version_id + ".rttm");
    const Timeline hyp = read_rttm_file(hyps_dir + "/" + v.version_id + ".rttm");
    std::map<std::string, std::string> speaker_role;
    for (const auto& [role, speaker] : v.assignment.mapping) speaker_role[speaker] = role;
    records[i] = score_version(ref, hyp, v.version_id, speaker_role, v.factor_levels,
                               cfg.collar, cfg.omit_overlap);
  });

  write_scores_file(out_dir + "/scores.tsv", records);
  return finish_stage(cfg, "score",
                      {refs_dir, hyps_dir, manifest_path, structures_path},
                      {"scores.tsv"},
                      {{"versions", static_cast<std::int64_t>(records.size())}}, out_dir,
                      t0);
}

StageManifest cmd_analyze(const RunConfig& cfg, const std::string& scores_path,
                          const std::string& manifest_path,
                          const std::string& structures_path, const std::string& out_dir) {
  const auto t0 = Clock::now();
  require_file(scores_path);
  require_file(manifest_path);
  require_file(structures_path);
  const Design d = read_design(manifest_path, structures_path);
  const auto scores = read_scores_file(scores_path);
  if (scores.empty()) throw ValidationError("scores file has no records: " + scores_path);

  const auto records = to_analysis_records(scores, d);
  std::vector<std::string> outputs;
  if (d.factors.empty()) {
    // nothing to attribute; mirror averaging below is still worth the stage
    std::cerr << "analyze: design declares no factor tags; skipping attribution "
                 "and marginal tables\n";
    ensure_dir(out_dir);
  } else {
    const auto report = attribution_report(records, cfg.n_boot, cfg.seed);
    ensure_dir(out_dir);
    write_text(out_dir + "/attribution.tsv", emit_attribution(report));
    outputs.push_back("attribution.tsv");
    for (const auto* bucket : {&report.voice, &report.structure})
      for (const auto& effect : *bucket) {
        const std::string name = "marginal_" + effect.factor + ".tsv";
        write_text(out_dir + "/" + name, emit_marginal_table(effect.marginals));
        outputs.push_back(name);
      }
  }

  // mirror-averaged scores per (structure, pair) group
  std::map<std::string, std::vector<ScoreRecord>> groups;
  std::map<std::string, std::pair<std::string, std::string>> group_ids;
  for (const auto& v : d.versions) {
    const std::string key = v.structure.structure_id + "\t" + v.pair.pair_id;
    group_ids[key] = {v.structure.structure_id, v.pair.pair_id};
  }
  std::map<std::string, std::string> version_group;
  for (const auto& v : d.versions)
    version_group[v.version_id] = v.structure.structure_id + "\t" + v.pair.pair_id;
  for (const auto& s : scores) groups[version_group.at(s.version_id)].push_back(s);

  std::int64_t incomplete = 0;
  std::ostringstream mirror;
  mirror << "# mirror-averaged scores\n";
  mirror << "# structure_id\tpair_id\tkind\tname\tvalue\n";
  for (const auto& [key, group] : groups) {
    const auto& [sid, pid] = group_ids.at(key);
    try {
      const MirrorSummary m = mirror_average(group);
      for (const auto& [speaker, f1] : m.speaker_f1)
        mirror << sid << "\t" << pid << "\tspeaker\t" << speaker << "\t" << fmt6(f1)
               << "\n";
      for (const auto& [role, f1] : m.role_f1)
        mirror << sid << "\t" << pid << "\trole\t" << role << "\t" << fmt6(f1) << "\n";
      mirror << sid << "\t" << pid << "\tder\t-\t" << fmt6(m.mean_der) << "\n";
    } catch (const ValidationError& e) {
      ++incomplete;
      std::cerr << "analyze: skipping mirror group " << sid << "/" << pid << ": "
                << e.what() << "\n";
    }
  }
  write_text(out_dir + "/mirror_f1.tsv", mirror.str());
  outputs.push_back("mirror_f1.tsv");

  return finish_stage(cfg, "analyze", {scores_path, manifest_path, structures_path},
                      std::move(outputs),
                      {{"versions", static_cast<std::int64_t>(scores.size())},
                       {"factors", static_cast<std::int64_t>(d.factors.size())},
                       {"groups", static_cast<std::int64_t>(groups.size())},
                       {"incomplete_groups", incomplete}},
                      out_dir, t0);
}

// --- demo -------------------------------------------------------------------

DemoOutcome cmd_demo(const RunConfig& cfg, const std::string& out_dir, int workers) {
  ensure_dir(out_dir);

  // Voices: the easy pair is far apart in fundamental frequency, the hard
  // pair nearly matched; per-speaker availability covers the longest
  // structure with headroom.
  json spec;
  spec["speakers"] = json::array();
  const auto voice = [&cfg](const char* id, double f0, std::uint64_t offset) {
    json s;
    s["speaker_id"] = id;
    s["duration_sec"] = 30.0;
    s["f0"] = f0;
    s["seed"] = cfg.seed + offset;
    return s;
  };
  spec["speakers"].push_back(voice("easy1", 110.0, 11));
  spec["speakers"].push_back(voice("easy2", 220.0, 12));
  spec["speakers"].push_back(voice("hard1", 118.0, 21));
  spec["speakers"].push_back(voice("hard2", 126.0, 22));
  write_text(out_dir + "/demo_voices.json", spec.dump(2) + "\n");

  // calm: ten 5 s turns; rapid: 0.4 s turns interleaved with 0.2 s
  // backchannels, alternating holder.
  ConversationStructure calm{"calm", {{"pace", "calm"}}, {}};
  for (int i = 0; i < 10; ++i) calm.slots.push_back({i % 2 ? "B" : "A", 5000});
  ConversationStructure rapid{"rapid", {{"pace", "rapid"}}, {}};
  for (int i = 0; i < 42; ++i) {
    rapid.slots.push_back({"A", 400});
    rapid.slots.push_back({"B", 200});
    rapid.slots.push_back({"B", 400});
    rapid.slots.push_back({"A", 200});
  }
  write_structure_file(out_dir + "/structures.tsv", {calm, rapid});

  const std::vector<SpeakerPair> pairs{
      {"easy", {"easy1", "easy2"}, {{"difficulty", "easy"}}},
      {"hard", {"hard1", "hard2"}, {{"difficulty", "hard"}}}};
  write_text(out_dir + "/pairs.tsv", emit_pairs(pairs));

  DemoOutcome outcome;
  outcome.stages.push_back(
      cmd_pool(cfg, out_dir + "/demo_voices.json", "", out_dir + "/pool"));
  outcome.stages.push_back(cmd_design(cfg, out_dir + "/structures.tsv", out_dir + "/pool",
                                      out_dir + "/pairs.tsv", out_dir + "/design"));
  const std::string manifest = out_dir + "/design/design_manifest.tsv";
  const std::string truncated = out_dir + "/design/design_structures.tsv";
  outcome.stages.push_back(
      cmd_render(cfg, manifest, truncated, out_dir + "/pool", out_dir + "/rendered",
                 workers));
  outcome.stages.push_back(cmd_diarize(cfg, out_dir + "/rendered", out_dir + "/hyp",
                                       workers));
  outcome.stages.push_back(cmd_score(cfg, out_dir + "/rendered", out_dir + "/hyp",
                                     manifest, truncated, out_dir + "/scores", workers));
  outcome.stages.push_back(cmd_analyze(cfg, out_dir + "/scores/scores.tsv", manifest,
                                       truncated, out_dir + "/analysis"));

  // outcomes the acceptance experiment asserts
  const Design d = read_design(manifest, truncated);
  const auto scores = read_scores_file(out_dir + "/scores/scores.tsv");
  outcome.report = attribution_report(to_analysis_records(scores, d), cfg.n_boot,
                                      cfg.seed);

  std::map<std::string, std::map<std::string, std::vector<double>>> cells;
  for (const auto& s : scores)
    cells[s.factor_levels.at("structure_pace")][s.factor_levels.at("pair_difficulty")]
        .push_back(s.der.der);
  for (const auto& [pace, by_pair] : cells)
    for (const auto& [difficulty, ders] : by_pair)
      outcome.cell_der[pace][difficulty] = median(ders);

  std::map<std::string, std::string> level_version;
  for (const auto& v : d.versions)
    level_version.emplace(v.factor_levels.at("structure_pace"), v.version_id);
  for (const auto& [pace, vid] : level_version) {
    const Timeline ref = read_rttm_file(out_dir + "/rendered/" + vid + ".rttm");
    for (double w : cfg.entropy_windows)
      outcome.entropy[pace][fmt2(w)] = subsegment_entropy(ref, w);
  }

  std::ostringstream summary;
  summary << "# planted-effect demo\n";
  summary << "# cell medians: structure\tpair\tmedian_der\n";
  for (const auto& [pace, by_pair] : outcome.cell_der)
    for (const auto& [difficulty, der] : by_pair)
      summary << pace << "\t" << difficulty << "\t" << fmt6(der) << "\n";
  summary << "# entropy: structure\twindow_sec\tmean_bits\n";
  for (const auto& [pace, by_window] : outcome.entropy)
    for (const auto& [window, bits] : by_window)
      summary << pace << "\t" << window << "\t" << fmt6(bits) << "\n";
  summary << "# gaps: scope\tfactor\tgap\tci_low\tci_high\n";
  for (const auto& e : outcome.report.voice)
    summary << "voice\t" << e.factor << "\t" << fmt6(e.gap) << "\t" << fmt6(e.ci_low)
            << "\t" << fmt6(e.ci_high) << "\n";
  for (const auto& e : outcome.report.structure)
    summary << "structure\t" << e.factor << "\t" << fmt6(e.gap) << "\t"
            << fmt6(e.ci_low) << "\t" << fmt6(e.ci_high) << "\n";
  summary << "ratio\t" << fmt6(outcome.report.ratio) << "\n";
  write_text(out_dir + "/demo_summary.tsv", summary.str());

  return outcome;
}

}  // namespace diafactor
