#pragma once

// End-to-end experiment drivers and their JSON reports. Reports are
// deterministic byte for byte under a fixed config: keys come out sorted,
// every float is rounded to six significant digits before serialization,
// and the only values that ever differ between identical runs live under
// keys prefixed "timing_" (zeroed entirely when timing is off).

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbc/demo_model.hpp"
#include "sbc/encoders.hpp"
#include "sbc/eval_harness.hpp"
#include "sbc/gridnav_env.hpp"
#include "sbc/run_config.hpp"
#include "sbc/similarity_index.hpp"

namespace sbc {

// Nearest double with six significant decimal digits; keeps report floats
// short and stable.
inline double round_sig(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return std::strtod(buf, nullptr);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline nlohmann::json summary_to_json(const PolicySummary& s, bool timing) {
  nlohmann::json j;
  j["episodes"] = s.episodes;
  j["successes"] = s.successes;
  j["success_rate"] = round_sig(s.success_rate);
  j["mean_steps_to_success"] = round_sig(s.mean_steps_to_success);
  j["mean_score"] = round_sig(s.mean_score);
  j["stddev_score"] = round_sig(s.stddev_score);
  nlohmann::json per_seed = nlohmann::json::array();
  for (double r : s.per_seed_success_rate) per_seed.push_back(round_sig(r));
  j["per_seed_success_rate"] = per_seed;
  nlohmann::json searches;
  searches["total"] = s.searches_total;
  searches["mean_per_episode"] = round_sig(s.mean_searches_per_episode);
  searches["by_trigger"] = {
      {"initial", s.searches_by_trigger[static_cast<size_t>(Trigger::initial)]},
      {"time", s.searches_by_trigger[static_cast<size_t>(Trigger::time)]},
      {"end_of_trajectory",
       s.searches_by_trigger[static_cast<size_t>(Trigger::end_of_trajectory)]},
      {"divergence", s.searches_by_trigger[static_cast<size_t>(Trigger::divergence)]}};
  j["searches"] = searches;
  j["timing_wall_seconds"] = timing ? round_sig(s.timing_wall_seconds) : 0.0;
  return j;
}

inline std::unique_ptr<Encoder> make_run_encoder(const RunConfig& cfg,
                                                 uint32_t input_dim) {
  EncoderOptions opts;
  opts.output_dim = cfg.encoder_output_dim;
  opts.scale = static_cast<float>(cfg.encoder_scale);
  opts.window = cfg.encoder_window;
  opts.seed = cfg.seed;
  return make_encoder(cfg.encoder_kind, input_dim, opts);
}

inline SuiteConfig make_suite_config(const RunConfig& cfg) {
  SuiteConfig scfg;
  scfg.world = cfg.world;
  scfg.seeds = cfg.eval_seeds;
  scfg.episodes_per_seed = cfg.episodes_per_seed;
  scfg.max_episode_steps = cfg.max_episode_steps;
  scfg.success_window = cfg.success_window;
  scfg.score_window = cfg.score_window;
  scfg.base_seed = cfg.seed;
  scfg.jobs = cfg.jobs;
  return scfg;
}

struct PreparedIndex {
  std::unique_ptr<LatentIndex> index;
  double div_threshold = 0.0;
  double timing_build_seconds = 0.0;
};

// Encodes the raw demos, builds the index over the encoded frames, and
// resolves the divergence threshold (calibrating on this very index when
// the threshold is an auto quantile).
inline PreparedIndex prepare_index(const RunConfig& cfg, const DemoSet& raw) {
  PreparedIndex prep;
  std::unique_ptr<Encoder> enc = make_run_encoder(cfg, raw.dimension);
  Stopwatch watch;
  DemoSet encoded = encode_demos(raw, *enc);
  prep.index = std::make_unique<LatentIndex>(encoded);
  prep.timing_build_seconds = watch.seconds();
  prep.div_threshold = cfg.div_threshold.is_auto
                           ? calibrate_threshold(*prep.index, cfg.div_threshold.value)
                           : cfg.div_threshold.value;
  return prep;
}

inline PolicyFactory sbc_factory(const RunConfig& cfg, const DemoSet& raw,
                                 const PreparedIndex& prep) {
  ControllerConfig cc{cfg.warmup, cfg.max_steps, prep.div_threshold};
  uint32_t input_dim = raw.dimension;
  const LatentIndex* index = prep.index.get();
  return [cfg, input_dim, index, cc]() -> std::unique_ptr<Policy> {
    return std::make_unique<SbcPolicy>(*index, make_run_encoder(cfg, input_dim), cc);
  };
}

// Full comparison run: expert, random and majority baselines, and the
// search controller, all over the same evaluation grid.
inline nlohmann::json run_experiment(const RunConfig& cfg, const DemoSet& raw) {
  check_config(cfg);
  Stopwatch total;
  PreparedIndex prep = prepare_index(cfg, raw);
  SuiteConfig scfg = make_suite_config(cfg);

  ActionRecord majority = majority_action(raw);
  nlohmann::json policies;
  policies["expert"] = summary_to_json(
      run_suite(scfg, [] { return std::make_unique<ExpertEvalPolicy>(); }, "expert"),
      cfg.timing);
  policies["random"] = summary_to_json(
      run_suite(scfg, [] { return std::make_unique<RandomPolicy>(); }, "random"),
      cfg.timing);
  policies["majority"] = summary_to_json(
      run_suite(scfg, [majority] { return std::make_unique<MajorityPolicy>(majority); },
                "majority"),
      cfg.timing);
  policies["sbc"] =
      summary_to_json(run_suite(scfg, sbc_factory(cfg, raw, prep), "sbc"), cfg.timing);

  nlohmann::json report;
  report["config"] = config_to_json(cfg);
  report["demos"] = {{"count", raw.trajectories.size()},
                     {"total_frames", raw.total_frames()},
                     {"dimension", raw.dimension}};
  report["index"] = {
      {"frames", prep.index->size()},
      {"dimension", prep.index->dimension()},
      {"div_threshold", round_sig(prep.div_threshold)},
      {"timing_build_seconds", cfg.timing ? round_sig(prep.timing_build_seconds) : 0.0}};
  report["policies"] = policies;
  report["timing_total_seconds"] = cfg.timing ? round_sig(total.seconds()) : 0.0;
  return report;
}

inline nlohmann::json run_experiment(const RunConfig& cfg) {
  check_config(cfg);
  return run_experiment(cfg, generate_demos(cfg.world, cfg.demo_count, cfg.seed));
}

// Demo-count sweep: for each count, take the leading prefix of the demo
// set, rebuild encoder, index and threshold, and evaluate the controller
// on the same grid. Counts are swept in the order given.
inline nlohmann::json run_ablation(const RunConfig& cfg, const DemoSet& raw) {
  check_config(cfg);
  if (raw.trajectories.size() < 1) throw std::invalid_argument("empty demo set");
  Stopwatch total;
  SuiteConfig scfg = make_suite_config(cfg);

  nlohmann::json points = nlohmann::json::array();
  std::vector<double> rates;
  for (uint32_t count : cfg.ablation_counts) {
    if (count > raw.trajectories.size()) {
      throw std::invalid_argument("ablation count " + std::to_string(count) +
                                  " exceeds demo count " +
                                  std::to_string(raw.trajectories.size()));
    }
    DemoSet sub = subset(raw, count, 0);
    PreparedIndex prep = prepare_index(cfg, sub);
    PolicySummary sum = run_suite(scfg, sbc_factory(cfg, sub, prep),
                                  "sbc_" + std::to_string(count));
    rates.push_back(sum.success_rate);
    nlohmann::json point;
    point["demo_count"] = count;
    point["index_frames"] = prep.index->size();
    point["div_threshold"] = round_sig(prep.div_threshold);
    point["sbc"] = summary_to_json(sum, cfg.timing);
    points.push_back(point);
  }

  uint32_t inversions = 0;
  for (size_t i = 0; i + 1 < rates.size(); ++i) {
    if (rates[i + 1] < rates[i]) ++inversions;
  }

  nlohmann::json report;
  report["config"] = config_to_json(cfg);
  report["points"] = points;
  report["inversions"] = inversions;
  report["timing_total_seconds"] = cfg.timing ? round_sig(total.seconds()) : 0.0;
  return report;
}

inline nlohmann::json run_ablation(const RunConfig& cfg) {
  check_config(cfg);
  return run_ablation(cfg, generate_demos(cfg.world, cfg.demo_count, cfg.seed));
}

// Canonical report text: sorted keys (nlohmann objects iterate sorted),
// two-space indent, trailing newline.
inline std::string report_to_string(const nlohmann::json& report) {
  return report.dump(2) + "\n";
}

inline void write_report(const nlohmann::json& report,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  std::string text = report_to_string(report);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace sbc
