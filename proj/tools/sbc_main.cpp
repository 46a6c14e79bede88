// Command-line driver: generate demo sets, validate stored files, run the
// end-to-end policy comparison, sweep demo counts, project latents to 2D,
// and benchmark the index.
//
// Exit codes: 0 success, 2 usage or argument domain errors, 1 runtime
// failures (I/O, malformed files).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <sbc/sbc.hpp>

namespace {

struct CommonFlags {
  std::optional<std::string> config_path;
  std::optional<uint64_t> seed;
  std::optional<uint32_t> demo_count;
  std::optional<uint32_t> size;
  std::optional<double> density;
  std::optional<uint32_t> view_radius;
  std::optional<uint32_t> goal_count;
  std::optional<double> noise;
  std::optional<uint32_t> hold_steps;
  std::optional<std::string> encoder_kind;
  std::optional<uint32_t> encoder_output_dim;
  std::optional<double> encoder_scale;
  std::optional<uint32_t> encoder_window;
  std::optional<uint32_t> warmup;
  std::optional<uint32_t> max_steps;
  std::optional<std::string> div_threshold;
  std::optional<uint32_t> eval_seeds;
  std::optional<uint32_t> episodes_per_seed;
  std::optional<uint32_t> max_episode_steps;
  std::optional<uint32_t> success_window;
  std::optional<uint32_t> score_window;
  std::optional<std::vector<uint32_t>> ablation_counts;
  std::optional<uint32_t> jobs;
  bool no_timing = false;
};

void add_common_flags(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "JSON config file; flags override it");
  sub->add_option("--seed", f.seed, "base seed (default 0)");
  sub->add_option("--demos", f.demo_count, "number of demonstrations (default 100)");
  sub->add_option("--size", f.size, "grid side length (default 32)");
  sub->add_option("--density", f.density, "obstacle density (default 0.15)");
  sub->add_option("--view-radius", f.view_radius, "observation window radius (default 2)");
  sub->add_option("--goals", f.goal_count, "goal cells per world (default 64)");
  sub->add_option("--noise", f.noise, "expert noise probability (default 0.1)");
  sub->add_option("--hold", f.hold_steps, "demo steps held on goal (default 120)");
  sub->add_option("--encoder", f.encoder_kind,
                  "identity, random_projection or stacked_window (default stacked_window)");
  sub->add_option("--encoder-dim", f.encoder_output_dim,
                  "random projection output dimension (default 64)");
  sub->add_option("--encoder-scale", f.encoder_scale,
                  "random projection scale (default 1.0)");
  sub->add_option("--window", f.encoder_window, "stacked window length (default 8)");
  sub->add_option("--warmup", f.warmup, "controller warmup steps (default 0)");
  sub->add_option("--max-steps", f.max_steps,
                  "max steps followed per search (default 100)");
  sub->add_option("--div-threshold", f.div_threshold,
                  "divergence threshold: a distance or auto:Q (default auto:0.95)");
  sub->add_option("--eval-seeds", f.eval_seeds, "evaluation world seeds (default 20)");
  sub->add_option("--episodes", f.episodes_per_seed, "episodes per seed (default 10)");
  sub->add_option("--max-episode-steps", f.max_episode_steps,
                  "episode step cap (default 3600)");
  sub->add_option("--success-window", f.success_window,
                  "consecutive in-goal steps for success (default 100)");
  sub->add_option("--score-window", f.score_window,
                  "sliding score window (default 16)");
  sub->add_option("--counts", f.ablation_counts,
                  "demo counts for the ablation sweep (default 10 25 50 100)")
      ->delimiter(',');
  sub->add_option("--jobs", f.jobs, "worker threads (default 1)")->envname("SBC_JOBS");
  sub->add_flag("--no-timing", f.no_timing, "zero all timing fields in reports");
}

sbc::RunConfig resolve_config(const CommonFlags& f) {
  sbc::RunConfig cfg = sbc::default_run_config();
  if (f.config_path) cfg = sbc::load_config(*f.config_path, cfg);
  if (f.seed) cfg.seed = *f.seed;
  if (f.demo_count) cfg.demo_count = *f.demo_count;
  if (f.size) cfg.world.size = *f.size;
  if (f.density) cfg.world.density = *f.density;
  if (f.view_radius) cfg.world.view_radius = *f.view_radius;
  if (f.goal_count) cfg.world.goal_count = *f.goal_count;
  if (f.noise) cfg.world.noise = *f.noise;
  if (f.hold_steps) cfg.world.hold_steps = *f.hold_steps;
  if (f.encoder_kind) cfg.encoder_kind = *f.encoder_kind;
  if (f.encoder_output_dim) cfg.encoder_output_dim = *f.encoder_output_dim;
  if (f.encoder_scale) cfg.encoder_scale = *f.encoder_scale;
  if (f.encoder_window) cfg.encoder_window = *f.encoder_window;
  if (f.warmup) cfg.warmup = *f.warmup;
  if (f.max_steps) cfg.max_steps = *f.max_steps;
  if (f.div_threshold) cfg.div_threshold = sbc::parse_threshold(*f.div_threshold);
  if (f.eval_seeds) cfg.eval_seeds = *f.eval_seeds;
  if (f.episodes_per_seed) cfg.episodes_per_seed = *f.episodes_per_seed;
  if (f.max_episode_steps) cfg.max_episode_steps = *f.max_episode_steps;
  if (f.success_window) cfg.success_window = *f.success_window;
  if (f.score_window) cfg.score_window = *f.score_window;
  if (f.ablation_counts) cfg.ablation_counts = *f.ablation_counts;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.no_timing) cfg.timing = false;
  sbc::check_config(cfg);
  return cfg;
}

// Demos from --input when given (optionally cut to the leading
// `demo_count` when --demos was passed explicitly), generated fresh
// otherwise. Leaves cfg.demo_count equal to the returned count.
sbc::DemoSet obtain_demos(sbc::RunConfig& cfg, const CommonFlags& f,
                          const std::optional<std::string>& input) {
  if (!input) return sbc::generate_demos(cfg.world, cfg.demo_count, cfg.seed);
  sbc::DemoSet demos = sbc::load(*input);
  if (f.demo_count) {
    if (*f.demo_count > demos.trajectories.size()) {
      throw std::invalid_argument("--demos " + std::to_string(*f.demo_count) +
                                  " exceeds the " +
                                  std::to_string(demos.trajectories.size()) +
                                  " demos in " + *input);
    }
    demos = sbc::subset(demos, *f.demo_count, 0);
  }
  cfg.demo_count = static_cast<uint32_t>(demos.trajectories.size());
  sbc::check_config(cfg);
  return demos;
}

void emit_report(const nlohmann::json& report, const std::optional<std::string>& out) {
  if (out) {
    sbc::write_report(report, *out);
  } else {
    std::cout << sbc::report_to_string(report);
  }
}

int cmd_generate(const CommonFlags& f, const std::string& out, bool jsonl) {
  sbc::RunConfig cfg = resolve_config(f);
  sbc::DemoSet demos = sbc::generate_demos(cfg.world, cfg.demo_count, cfg.seed);
  if (jsonl) {
    sbc::save_jsonl(demos, out);
  } else {
    sbc::save(demos, out);
  }
  nlohmann::json info;
  info["path"] = out;
  info["count"] = demos.trajectories.size();
  info["total_frames"] = demos.total_frames();
  info["dimension"] = demos.dimension;
  std::cout << info.dump(2) << "\n";
  return 0;
}

int cmd_validate(const std::string& input) {
  sbc::DemoSet demos = sbc::load(input, false);
  std::vector<sbc::Violation> violations = sbc::validate(demos);
  for (const auto& v : violations) std::cout << v.to_string() << "\n";
  if (violations.empty()) {
    std::cout << "ok: " << demos.trajectories.size() << " demos, "
              << demos.total_frames() << " frames, dimension " << demos.dimension
              << "\n";
    return 0;
  }
  return 1;
}

int cmd_run(const CommonFlags& f, const std::optional<std::string>& input,
            const std::optional<std::string>& out) {
  sbc::RunConfig cfg = resolve_config(f);
  sbc::DemoSet demos = obtain_demos(cfg, f, input);
  emit_report(sbc::run_experiment(cfg, demos), out);
  return 0;
}

int cmd_ablate(const CommonFlags& f, const std::optional<std::string>& input,
               const std::optional<std::string>& out) {
  sbc::RunConfig cfg = resolve_config(f);
  sbc::DemoSet demos = obtain_demos(cfg, f, input);
  emit_report(sbc::run_ablation(cfg, demos), out);
  return 0;
}

int cmd_project(const CommonFlags& f, const std::optional<std::string>& input,
                const std::string& out) {
  sbc::RunConfig cfg = resolve_config(f);
  sbc::DemoSet demos = obtain_demos(cfg, f, input);
  sbc::PreparedIndex prep = sbc::prepare_index(cfg, demos);
  sbc::Projection2D proj = sbc::fit_projection(*prep.index, cfg.seed);
  sbc::write_projection_csv(*prep.index, proj, demos.schema, out);
  nlohmann::json info;
  info["path"] = out;
  info["frames"] = prep.index->size();
  info["dimension"] = prep.index->dimension();
  info["eigenvalues"] = {sbc::round_sig(proj.eigenvalues[0]),
                         sbc::round_sig(proj.eigenvalues[1])};
  info["explained_fraction"] = sbc::round_sig(proj.explained_fraction());
  info["degenerate"] = proj.degenerate;
  std::cout << info.dump(2) << "\n";
  return 0;
}

int cmd_bench(const CommonFlags& f, const std::optional<std::string>& input,
              uint32_t queries) {
  sbc::RunConfig cfg = resolve_config(f);
  sbc::DemoSet demos = obtain_demos(cfg, f, input);
  sbc::Stopwatch build_watch;
  sbc::PreparedIndex prep = sbc::prepare_index(cfg, demos);
  double build_seconds = build_watch.seconds();

  sbc::Pcg32 rng(cfg.seed, sbc::streams::kBaseline);
  const sbc::LatentIndex& index = *prep.index;
  sbc::Stopwatch query_watch;
  for (uint32_t q = 0; q < queries; ++q) {
    size_t slot = rng.uniform_below(static_cast<uint32_t>(index.size()));
    std::span<const float> base = index.embedding_at(slot);
    sbc::Embedding query(base.begin(), base.end());
    for (float& v : query) v += static_cast<float>(0.05 * rng.next_normal());
    index.nearest(query);
  }
  double query_seconds = query_watch.seconds();

  nlohmann::json info;
  info["frames"] = index.size();
  info["dimension"] = index.dimension();
  info["queries"] = queries;
  info["timing_build_seconds"] = sbc::round_sig(build_seconds);
  info["timing_mean_query_micros"] =
      sbc::round_sig(queries > 0 ? query_seconds * 1e6 / queries : 0.0);
  std::cout << info.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"search-based imitation on grid navigation"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::optional<std::string> input;
  std::optional<std::string> report_out;
  std::string file_out;
  bool jsonl = false;
  uint32_t queries = 1000;

  CLI::App* generate = app.add_subcommand("generate", "record expert demos to a file");
  add_common_flags(generate, flags);
  generate->add_option("--out", file_out, "output path")->required();
  generate->add_flag("--jsonl", jsonl, "write JSONL instead of the binary format");

  CLI::App* validate = app.add_subcommand("validate", "check a stored demo file");
  validate->add_option("--input", input, "demo file to check")->required();

  CLI::App* run = app.add_subcommand("run", "evaluate all policies and report JSON");
  add_common_flags(run, flags);
  run->add_option("--input", input, "demo file (generated fresh when omitted)");
  run->add_option("--out", report_out, "report path (stdout when omitted)");

  CLI::App* ablate = app.add_subcommand("ablate", "sweep demo counts and report JSON");
  add_common_flags(ablate, flags);
  ablate->add_option("--input", input, "demo file (generated fresh when omitted)");
  ablate->add_option("--out", report_out, "report path (stdout when omitted)");

  CLI::App* project = app.add_subcommand("project", "project indexed latents to 2D CSV");
  add_common_flags(project, flags);
  project->add_option("--input", input, "demo file (generated fresh when omitted)");
  project->add_option("--out", file_out, "CSV path")->required();

  CLI::App* bench = app.add_subcommand("bench", "time index build and queries");
  add_common_flags(bench, flags);
  bench->add_option("--input", input, "demo file (generated fresh when omitted)");
  bench->add_option("--queries", queries, "number of timed queries (default 1000)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(generate)) return cmd_generate(flags, file_out, jsonl);
    if (app.got_subcommand(validate)) return cmd_validate(*input);
    if (app.got_subcommand(run)) return cmd_run(flags, input, report_out);
    if (app.got_subcommand(ablate)) return cmd_ablate(flags, input, report_out);
    if (app.got_subcommand(project)) return cmd_project(flags, input, file_out);
    if (app.got_subcommand(bench)) return cmd_bench(flags, input, queries);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
