#pragma once

// One knob bag for the end-to-end experiment, loadable from a JSON file.
// Execution knobs (jobs, timing) never change results, only how and how
// fast they are produced.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbc/gridnav_env.hpp"

namespace sbc {

// Shortest decimal that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Divergence threshold: either a fixed distance or "auto:Q", a quantile
// of the index's consecutive-frame distance distribution.
struct ThresholdSpec {
  bool is_auto = true;
  double value = 0.95;  // quantile when auto, distance otherwise

  std::string to_string() const {
    return (is_auto ? "auto:" : "") + format_double(value);
  }
};

inline ThresholdSpec parse_threshold(const std::string& text) {
  ThresholdSpec spec;
  std::string body = text;
  if (text.rfind("auto:", 0) == 0) {
    spec.is_auto = true;
    body = text.substr(5);
  } else {
    spec.is_auto = false;
  }
  size_t used = 0;
  double v;
  try {
    v = std::stod(body, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad threshold: " + text);
  }
  if (used != body.size() || !std::isfinite(v)) {
    throw std::invalid_argument("bad threshold: " + text);
  }
  if (spec.is_auto) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw std::invalid_argument("threshold quantile must be in (0, 1]: " + text);
    }
  } else if (v < 0.0) {
    throw std::invalid_argument("threshold must be >= 0: " + text);
  }
  spec.value = v;
  return spec;
}

struct RunConfig {
  uint64_t seed = 0;
  uint32_t demo_count = 100;
  GridWorldConfig world;

  std::string encoder_kind = "stacked_window";
  uint32_t encoder_output_dim = 64;  // random_projection only
  double encoder_scale = 1.0;        // random_projection only
  uint32_t encoder_window = 8;       // stacked_window only

  uint32_t warmup = 0;
  uint32_t max_steps = 100;
  ThresholdSpec div_threshold;  // auto:0.95

  uint32_t eval_seeds = 20;
  uint32_t episodes_per_seed = 10;
  uint32_t max_episode_steps = 3600;
  uint32_t success_window = 100;
  uint32_t score_window = 16;

  std::vector<uint32_t> ablation_counts = {10, 25, 50, 100};

  uint32_t jobs = 1;   // execution only
  bool timing = true;  // execution only: report wall-clock timings
};

inline RunConfig default_run_config() { return RunConfig{}; }

inline void check_config(const RunConfig& cfg) {
  if (cfg.demo_count < 1) throw std::invalid_argument("demo_count must be >= 1");
  if (cfg.world.size < 4) throw std::invalid_argument("world size must be >= 4");
  if (!(cfg.world.density >= 0.0 && cfg.world.density <= 0.3)) {
    throw std::invalid_argument("density must be in [0, 0.3]");
  }
  if (cfg.world.view_radius < 1) throw std::invalid_argument("view_radius must be >= 1");
  if (cfg.world.goal_count < 1) throw std::invalid_argument("goal_count must be >= 1");
  if (!(cfg.world.noise >= 0.0 && cfg.world.noise <= 1.0)) {
    throw std::invalid_argument("noise must be in [0, 1]");
  }
  if (cfg.world.hold_steps < 1) throw std::invalid_argument("hold_steps must be >= 1");
  if (cfg.encoder_kind != "identity" && cfg.encoder_kind != "random_projection" &&
      cfg.encoder_kind != "stacked_window") {
    throw std::invalid_argument("unknown encoder kind: " + cfg.encoder_kind);
  }
  if (cfg.encoder_kind == "random_projection" && cfg.encoder_output_dim < 1) {
    throw std::invalid_argument("encoder output_dim must be >= 1");
  }
  if (cfg.encoder_kind == "stacked_window" && cfg.encoder_window < 1) {
    throw std::invalid_argument("encoder window must be >= 1");
  }
  if (cfg.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (cfg.eval_seeds < 1) throw std::invalid_argument("eval_seeds must be >= 1");
  if (cfg.episodes_per_seed < 1) {
    throw std::invalid_argument("episodes_per_seed must be >= 1");
  }
  if (cfg.max_episode_steps < 1) {
    throw std::invalid_argument("max_episode_steps must be >= 1");
  }
  if (cfg.success_window < 1) throw std::invalid_argument("success_window must be >= 1");
  if (cfg.score_window < 1) throw std::invalid_argument("score_window must be >= 1");
  if (cfg.ablation_counts.empty()) {
    throw std::invalid_argument("ablation_counts must not be empty");
  }
  for (uint32_t c : cfg.ablation_counts) {
    if (c < 1) throw std::invalid_argument("ablation counts must be >= 1");
  }
  if (cfg.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

// Serialized shape (all keys optional on load, unknown keys rejected):
//   {seed, demo_count,
//    world: {size, density, view_radius, goal_count, noise, hold_steps},
//    encoder: {kind, output_dim, scale, window},
//    controller: {warmup, max_steps, div_threshold},
//    eval: {seeds, episodes_per_seed, max_episode_steps, success_window,
//           score_window},
//    ablation_counts}
// Execution knobs (jobs, timing) are command-line only.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["demo_count"] = cfg.demo_count;
  j["world"] = {{"size", cfg.world.size},
                {"density", cfg.world.density},
                {"view_radius", cfg.world.view_radius},
                {"goal_count", cfg.world.goal_count},
                {"noise", cfg.world.noise},
                {"hold_steps", cfg.world.hold_steps}};
  nlohmann::json enc;
  enc["kind"] = cfg.encoder_kind;
  if (cfg.encoder_kind == "random_projection") {
    enc["output_dim"] = cfg.encoder_output_dim;
    enc["scale"] = cfg.encoder_scale;
  }
  if (cfg.encoder_kind == "stacked_window") {
    enc["window"] = cfg.encoder_window;
  }
  j["encoder"] = enc;
  j["controller"] = {{"warmup", cfg.warmup},
                     {"max_steps", cfg.max_steps},
                     {"div_threshold", cfg.div_threshold.to_string()}};
  j["eval"] = {{"seeds", cfg.eval_seeds},
               {"episodes_per_seed", cfg.episodes_per_seed},
               {"max_episode_steps", cfg.max_episode_steps},
               {"success_window", cfg.success_window},
               {"score_window", cfg.score_window}};
  j["ablation_counts"] = cfg.ablation_counts;
  return j;
}

namespace detail {

inline void reject_unknown(const nlohmann::json& obj,
                           std::initializer_list<const char*> known,
                           const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::invalid_argument("unknown config key " + where + it.key());
    }
  }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j,
                                  RunConfig base = default_run_config()) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig cfg = base;
  try {
    detail::reject_unknown(
        j, {"seed", "demo_count", "world", "encoder", "controller", "eval",
            "ablation_counts"},
        "");
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("demo_count")) cfg.demo_count = j.at("demo_count").get<uint32_t>();
    if (j.contains("world")) {
      const auto& w = j.at("world");
      detail::reject_unknown(
          w, {"size", "density", "view_radius", "goal_count", "noise", "hold_steps"},
          "world.");
      if (w.contains("size")) cfg.world.size = w.at("size").get<uint32_t>();
      if (w.contains("density")) cfg.world.density = w.at("density").get<double>();
      if (w.contains("view_radius")) {
        cfg.world.view_radius = w.at("view_radius").get<uint32_t>();
      }
      if (w.contains("goal_count")) {
        cfg.world.goal_count = w.at("goal_count").get<uint32_t>();
      }
      if (w.contains("noise")) cfg.world.noise = w.at("noise").get<double>();
      if (w.contains("hold_steps")) {
        cfg.world.hold_steps = w.at("hold_steps").get<uint32_t>();
      }
    }
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      detail::reject_unknown(e, {"kind", "output_dim", "scale", "window"}, "encoder.");
      if (e.contains("kind")) cfg.encoder_kind = e.at("kind").get<std::string>();
      if (e.contains("output_dim")) {
        cfg.encoder_output_dim = e.at("output_dim").get<uint32_t>();
      }
      if (e.contains("scale")) cfg.encoder_scale = e.at("scale").get<double>();
      if (e.contains("window")) cfg.encoder_window = e.at("window").get<uint32_t>();
    }
    if (j.contains("controller")) {
      const auto& c = j.at("controller");
      detail::reject_unknown(c, {"warmup", "max_steps", "div_threshold"}, "controller.");
      if (c.contains("warmup")) cfg.warmup = c.at("warmup").get<uint32_t>();
      if (c.contains("max_steps")) cfg.max_steps = c.at("max_steps").get<uint32_t>();
      if (c.contains("div_threshold")) {
        const auto& t = c.at("div_threshold");
        if (t.is_number()) {
          cfg.div_threshold = ThresholdSpec{false, t.get<double>()};
          if (!(cfg.div_threshold.value >= 0.0)) {
            throw std::invalid_argument("threshold must be >= 0");
          }
        } else {
          cfg.div_threshold = parse_threshold(t.get<std::string>());
        }
      }
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      detail::reject_unknown(e,
                             {"seeds", "episodes_per_seed", "max_episode_steps",
                              "success_window", "score_window"},
                             "eval.");
      if (e.contains("seeds")) cfg.eval_seeds = e.at("seeds").get<uint32_t>();
      if (e.contains("episodes_per_seed")) {
        cfg.episodes_per_seed = e.at("episodes_per_seed").get<uint32_t>();
      }
      if (e.contains("max_episode_steps")) {
        cfg.max_episode_steps = e.at("max_episode_steps").get<uint32_t>();
      }
      if (e.contains("success_window")) {
        cfg.success_window = e.at("success_window").get<uint32_t>();
      }
      if (e.contains("score_window")) {
        cfg.score_window = e.at("score_window").get<uint32_t>();
      }
    }
    if (j.contains("ablation_counts")) {
      cfg.ablation_counts = j.at("ablation_counts").get<std::vector<uint32_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config: ") + e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path,
                             RunConfig base = default_run_config()) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config JSON: ") + e.what());
  }
  return config_from_json(j, std::move(base));
}

}  // namespace sbc
