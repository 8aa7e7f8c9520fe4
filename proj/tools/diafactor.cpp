// Command-line front end: each subcommand is one pipeline stage, composable
// through the documented file formats. Exit codes: 0 success, 1 usage,
// 2 invalid input (parse/validation), 3 I/O failure.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "diafactor/errors.hpp"
#include "diafactor/pipeline.hpp"

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common* c, bool with_workers) {
  cmd->add_option("--config", c->config_path,
                  "JSON run configuration; defaults apply when omitted");
  cmd->add_option("--seed", c->seed, "override the configured seed");
  if (with_workers)
    cmd->add_option("--workers", c->workers, "worker threads")
        ->check(CLI::Range(1, 256));
  cmd->add_option("--out", c->out, "output directory")->required();
}

diafactor::RunConfig load_config(const CLI::App* cmd, const Common& c) {
  diafactor::RunConfig cfg = c.config_path.empty()
                                 ? diafactor::RunConfig{}
                                 : diafactor::read_config_file(c.config_path);
  if (cmd->count("--seed") > 0) cfg.seed = c.seed;
  return cfg;
}

std::string sibling_structures(const std::string& manifest_path) {
  return (std::filesystem::path(manifest_path).parent_path() / "design_structures.tsv")
      .string();
}

void report(const diafactor::StageManifest& m, const std::string& out) {
  std::cout << m.stage << ": wrote " << out;
  for (const auto& [key, value] : m.counts) std::cout << " " << key << "=" << value;
  std::cout << " (run " << m.run_id << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factorial remixing toolkit for speaker diarization analysis"};
  app.require_subcommand(1);

  Common c_extract, c_pool, c_design, c_render, c_diarize, c_score, c_analyze, c_demo;

  auto* extract = app.add_subcommand(
      "extract", "turn reference RTTM files into conversation structure tables");
  std::string refs_dir, role_map;
  extract->add_option("--refs", refs_dir, "directory of reference .rttm files")
      ->required();
  extract->add_option("--role-map", role_map,
                      "label-to-role map file (label<TAB>role); without it roles "
                      "follow first appearance");
  add_common(extract, &c_extract, false);

  auto* pool = app.add_subcommand(
      "pool", "build the speaker stream pool from a synth spec or recorded audio");
  std::string synth_spec, audio_dir;
  pool->add_option("--synth", synth_spec, "synthetic voice spec (JSON)");
  pool->add_option("--audio", audio_dir, "directory of per-speaker .wav files");
  add_common(pool, &c_pool, false);

  auto* design = app.add_subcommand(
      "design", "enumerate the factorial design of remixed conversation versions");
  std::string d_structures, d_pool, d_pairs;
  design->add_option("--structures", d_structures, "structure table")->required();
  design->add_option("--pool", d_pool, "pool directory (with pool.tsv)")->required();
  design->add_option("--pairs", d_pairs,
                     "pairs file (pair_id<TAB>m1<TAB>m2<TAB>tags); required unless "
                     "pairing is seeded-random");
  add_common(design, &c_design, false);

  auto* render = app.add_subcommand("render", "splice every designed version to WAV");
  std::string r_manifest, r_structures, r_pool;
  render->add_option("--manifest", r_manifest, "design manifest")->required();
  render->add_option("--structures", r_structures,
                     "design structures table (default: design_structures.tsv beside "
                     "the manifest)");
  render->add_option("--pool", r_pool, "pool directory")->required();
  add_common(render, &c_render, true);

  auto* diarize = app.add_subcommand(
      "diarize", "run the bundled diarizer over rendered conversations");
  std::string rendered_dir;
  diarize->add_option("--rendered", rendered_dir,
                      "directory of rendered .wav + reference .rttm files")
      ->required();
  add_common(diarize, &c_diarize, true);

  auto* score = app.add_subcommand("score", "score hypotheses against references");
  std::string s_refs, s_hyps, s_manifest, s_structures;
  score->add_option("--refs", s_refs, "reference .rttm directory")->required();
  score->add_option("--hyps", s_hyps, "hypothesis .rttm directory")->required();
  score->add_option("--manifest", s_manifest, "design manifest")->required();
  score->add_option("--structures", s_structures,
                    "design structures table (default: beside the manifest)");
  add_common(score, &c_score, true);

  auto* analyze = app.add_subcommand(
      "analyze", "marginal tables, mirror-averaged F1, attribution report");
  std::string a_scores, a_manifest, a_structures;
  analyze->add_option("--scores", a_scores, "scores.tsv from the score stage")
      ->required();
  analyze->add_option("--manifest", a_manifest, "design manifest")->required();
  analyze->add_option("--structures", a_structures,
                      "design structures table (default: beside the manifest)");
  add_common(analyze, &c_analyze, false);

  auto* demo = app.add_subcommand(
      "demo", "run the bundled planted-effect experiment end to end");
  add_common(demo, &c_demo, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*extract) {
      const auto cfg = load_config(extract, c_extract);
      report(diafactor::cmd_extract(cfg, refs_dir, role_map, c_extract.out),
             c_extract.out);
    } else if (*pool) {
      const auto cfg = load_config(pool, c_pool);
      report(diafactor::cmd_pool(cfg, synth_spec, audio_dir, c_pool.out), c_pool.out);
    } else if (*design) {
      const auto cfg = load_config(design, c_design);
      report(diafactor::cmd_design(cfg, d_structures, d_pool, d_pairs, c_design.out),
             c_design.out);
    } else if (*render) {
      const auto cfg = load_config(render, c_render);
      if (r_structures.empty()) r_structures = sibling_structures(r_manifest);
      report(diafactor::cmd_render(cfg, r_manifest, r_structures, r_pool, c_render.out,
                                   c_render.workers),
             c_render.out);
    } else if (*diarize) {
      const auto cfg = load_config(diarize, c_diarize);
      report(diafactor::cmd_diarize(cfg, rendered_dir, c_diarize.out,
                                    c_diarize.workers),
             c_diarize.out);
    } else if (*score) {
      const auto cfg = load_config(score, c_score);
      if (s_structures.empty()) s_structures = sibling_structures(s_manifest);
      report(diafactor::cmd_score(cfg, s_refs, s_hyps, s_manifest, s_structures,
                                  c_score.out, c_score.workers),
             c_score.out);
    } else if (*analyze) {
      const auto cfg = load_config(analyze, c_analyze);
      if (a_structures.empty()) a_structures = sibling_structures(a_manifest);
      report(diafactor::cmd_analyze(cfg, a_scores, a_manifest, a_structures,
                                    c_analyze.out),
             c_analyze.out);
    } else if (*demo) {
      const auto cfg = load_config(demo, c_demo);
      const auto outcome = diafactor::cmd_demo(cfg, c_demo.out, c_demo.workers);
      for (const auto& [pace, by_pair] : outcome.cell_der)
        for (const auto& [difficulty, der] : by_pair)
          std::cout << "median DER  structure=" << pace << " pair=" << difficulty
                    << ": " << der << "\n";
      for (const auto& e : outcome.report.structure)
        std::cout << "structure gap " << e.factor << ": " << e.gap << " ["
                  << e.ci_low << ", " << e.ci_high << "]\n";
      for (const auto& e : outcome.report.voice)
        std::cout << "voice gap     " << e.factor << ": " << e.gap << " ["
                  << e.ci_low << ", " << e.ci_high << "]\n";
      std::cout << "structure/voice gap ratio: " << outcome.report.ratio << "\n";
      std::cout << "demo: wrote " << c_demo.out << "\n";
    }
    return 0;
  } catch (const diafactor::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const diafactor::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const diafactor::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  }
}
