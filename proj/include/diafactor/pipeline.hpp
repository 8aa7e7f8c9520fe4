#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "diafactor/diarizer.hpp"
#include "diafactor/stats.hpp"
#include "diafactor/vad.hpp"

namespace diafactor {

// Every knob of a run, serializable as JSON. Loading rejects unknown keys;
// emitting echoes every field so archived configs are self-describing.
struct RunConfig {
  int sample_rate = 8000;
  std::uint64_t seed = 1;
  double taper = 0.01;            // splice ramp, seconds
  double min_gap = 0.1;           // smallest extracted silence, seconds
  double collar = 0.0;            // scoring collar, seconds
  bool omit_overlap = false;      // exclude reference overlap from scoring
  int max_assignments = 0;        // cap per (structure, pair); 0 = all
  int n_boot = 1000;              // bootstrap resamples
  std::string pairing = "given";  // or "seeded-random"
  std::vector<double> entropy_windows = {0.75, 1.5};  // seconds
  VadParams vad;
  DiarizerConfig diarizer;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& json_text);
std::string emit_config(const RunConfig& cfg);
RunConfig read_config_file(const std::string& path);

// 16-hex-digit FNV-1a of the full config echo.
std::string config_hash(const RunConfig& cfg);

// What one stage run did. run_id hashes the stage name, config hash, and
// input paths, so regenerating from the same config and inputs reproduces
// the manifest except for wall_ms.
struct StageManifest {
  std::string stage;
  std::string run_id;
  std::string config_hash;
  std::vector<std::string> inputs;   // paths as given, sorted
  std::vector<std::string> outputs;  // file names inside the output dir, sorted
  std::map<std::string, std::int64_t> counts;
  std::int64_t wall_ms = 0;
};

std::string emit_stage_manifest(const StageManifest& m);

// Each stage validates its inputs before writing anything, fills the output
// directory, and archives `<stage>.manifest.json` plus `<stage>.config.json`
// beside its outputs. All throw ParseError / ValidationError / IoError.

// RTTM references -> per-recording structure files plus a combined
// structures.tsv. With a role-map file (`label<TAB>role` lines) recordings
// containing unmapped labels are skipped and counted as warnings; without
// one, roles are assigned A, B, ... by order of first appearance.
StageManifest cmd_extract(const RunConfig& cfg, const std::string& refs_dir,
                          const std::string& role_map_path, const std::string& out_dir);

// Speaker streams + pool.tsv index. Either from a synth spec (JSON list of
// voices) or from a directory of per-speaker WAVs run through the energy VAD.
// Exactly one of the two source paths must be non-empty.
StageManifest cmd_pool(const RunConfig& cfg, const std::string& synth_spec_path,
                       const std::string& audio_dir, const std::string& out_dir);

// Factorial enumeration -> design_manifest.tsv + design_structures.tsv.
// Pairs come from a pairs file (`pair_id m1 m2 tags` rows) or, with
// pairing = "seeded-random", from a seeded shuffle of the pool (echoed to
// pairs.tsv).
StageManifest cmd_design(const RunConfig& cfg, const std::string& structures_path,
                         const std::string& pool_dir, const std::string& pairs_path,
                         const std::string& out_dir);

// Splices every version into `<version_id>.wav` + `<version_id>.rttm`.
StageManifest cmd_render(const RunConfig& cfg, const std::string& manifest_path,
                         const std::string& structures_path, const std::string& pool_dir,
                         const std::string& out_dir, int workers = 1);

// Runs the bundled diarizer over every rendered WAV with its reference
// speech regions (oracle segmentation) -> hypothesis RTTMs.
StageManifest cmd_diarize(const RunConfig& cfg, const std::string& rendered_dir,
                          const std::string& out_dir, int workers = 1);

// Scores every designed version -> scores.tsv.
StageManifest cmd_score(const RunConfig& cfg, const std::string& refs_dir,
                        const std::string& hyps_dir, const std::string& manifest_path,
                        const std::string& structures_path, const std::string& out_dir,
                        int workers = 1);

// Marginal tables, mirror-averaged F1, and the attribution report.
StageManifest cmd_analyze(const RunConfig& cfg, const std::string& scores_path,
                          const std::string& manifest_path,
                          const std::string& structures_path, const std::string& out_dir);

// The bundled planted-effect experiment: calm/rapid structures x easy/hard
// synthetic pairs, mirrored, rendered, diarized, scored, analyzed.
struct DemoOutcome {
  // structure level -> pair level -> median DER of that cell's versions
  std::map<std::string, std::map<std::string, double>> cell_der;
  // structure level -> entropy window (seconds, "%.2f") -> mean entropy
  std::map<std::string, std::map<std::string, double>> entropy;
  AttributionReport report;
  std::vector<StageManifest> stages;
};

DemoOutcome cmd_demo(const RunConfig& cfg, const std::string& out_dir, int workers = 1);

}  // namespace diafactor
