#include "sbc/run_config.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sbc/report.hpp"

namespace {

using namespace sbc;
using nlohmann::json;

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(0.95), "0.95");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(-17.25), "-17.25");
  for (double v : {1.0 / 3.0, 0.1 + 0.2, 1e-300, -9.87654321e12,
                   123456.789012345, 5e-324}) {
    std::string text = format_double(v);
    EXPECT_EQ(std::strtod(text.c_str(), nullptr), v) << text;
  }
}

TEST(RoundSig, SixSignificantDigitsByDefault) {
  EXPECT_EQ(round_sig(0.123456789), 0.123457);
  EXPECT_EQ(round_sig(123456789.0), 123457000.0);
  EXPECT_EQ(round_sig(1.0), 1.0);
  EXPECT_EQ(round_sig(0.0), 0.0);
  EXPECT_EQ(round_sig(-0.0001234564), -0.000123456);
  EXPECT_EQ(round_sig(2.0 / 3.0), 0.666667);
  EXPECT_EQ(round_sig(0.12345, 3), 0.123);
}

TEST(ParseThreshold, AcceptsAutoAndFixedForms) {
  ThresholdSpec a = parse_threshold("auto:0.95");
  EXPECT_TRUE(a.is_auto);
  EXPECT_EQ(a.value, 0.95);

  ThresholdSpec b = parse_threshold("auto:1");
  EXPECT_TRUE(b.is_auto);
  EXPECT_EQ(b.value, 1.0);

  ThresholdSpec c = parse_threshold("12.5");
  EXPECT_FALSE(c.is_auto);
  EXPECT_EQ(c.value, 12.5);

  ThresholdSpec d = parse_threshold("0");
  EXPECT_FALSE(d.is_auto);
  EXPECT_EQ(d.value, 0.0);
}

TEST(ParseThreshold, RejectsMalformedAndOutOfDomain) {
  for (const char* bad :
       {"", "abc", "12abc", "auto:", "auto:junk", "auto:0", "auto:-0.5",
        "auto:1.5", "-3", "nan", "inf", "auto:nan"}) {
    EXPECT_THROW(parse_threshold(bad), std::invalid_argument) << bad;
  }
}

TEST(ParseThreshold, ToStringRoundTrips) {
  for (ThresholdSpec spec : {ThresholdSpec{true, 0.95}, ThresholdSpec{true, 0.5},
                             ThresholdSpec{false, 17.25}, ThresholdSpec{false, 0.0}}) {
    ThresholdSpec back = parse_threshold(spec.to_string());
    EXPECT_EQ(back.is_auto, spec.is_auto) << spec.to_string();
    EXPECT_EQ(back.value, spec.value) << spec.to_string();
  }
  EXPECT_EQ((ThresholdSpec{true, 0.95}).to_string(), "auto:0.95");
  EXPECT_EQ((ThresholdSpec{false, 3.0}).to_string(), "3");
}

TEST(ConfigJson, DefaultRoundTrips) {
  RunConfig cfg = default_run_config();
  RunConfig back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.demo_count, cfg.demo_count);
  EXPECT_EQ(back.world.size, cfg.world.size);
  EXPECT_EQ(back.world.density, cfg.world.density);
  EXPECT_EQ(back.world.view_radius, cfg.world.view_radius);
  EXPECT_EQ(back.world.goal_count, cfg.world.goal_count);
  EXPECT_EQ(back.world.noise, cfg.world.noise);
  EXPECT_EQ(back.world.hold_steps, cfg.world.hold_steps);
  EXPECT_EQ(back.encoder_kind, cfg.encoder_kind);
  EXPECT_EQ(back.encoder_window, cfg.encoder_window);
  EXPECT_EQ(back.warmup, cfg.warmup);
  EXPECT_EQ(back.max_steps, cfg.max_steps);
  EXPECT_EQ(back.div_threshold.is_auto, cfg.div_threshold.is_auto);
  EXPECT_EQ(back.div_threshold.value, cfg.div_threshold.value);
  EXPECT_EQ(back.eval_seeds, cfg.eval_seeds);
  EXPECT_EQ(back.episodes_per_seed, cfg.episodes_per_seed);
  EXPECT_EQ(back.max_episode_steps, cfg.max_episode_steps);
  EXPECT_EQ(back.success_window, cfg.success_window);
  EXPECT_EQ(back.score_window, cfg.score_window);
  EXPECT_EQ(back.ablation_counts, cfg.ablation_counts);
}

TEST(ConfigJson, CustomValuesRoundTrip) {
  RunConfig cfg;
  cfg.seed = 99;
  cfg.demo_count = 7;
  cfg.world.size = 16;
  cfg.world.density = 0.05;
  cfg.world.view_radius = 3;
  cfg.world.goal_count = 2;
  cfg.world.noise = 0.25;
  cfg.world.hold_steps = 9;
  cfg.encoder_kind = "random_projection";
  cfg.encoder_output_dim = 32;
  cfg.encoder_scale = 0.5;
  cfg.warmup = 2;
  cfg.max_steps = 40;
  cfg.div_threshold = ThresholdSpec{false, 6.25};
  cfg.eval_seeds = 3;
  cfg.episodes_per_seed = 2;
  cfg.max_episode_steps = 500;
  cfg.success_window = 50;
  cfg.score_window = 8;
  cfg.ablation_counts = {2, 5, 7};

  json j = config_to_json(cfg);
  EXPECT_TRUE(j["encoder"].contains("output_dim"));
  EXPECT_TRUE(j["encoder"].contains("scale"));
  EXPECT_FALSE(j["encoder"].contains("window"));

  RunConfig back = config_from_json(j);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.demo_count, 7u);
  EXPECT_EQ(back.world.size, 16u);
  EXPECT_EQ(back.world.density, 0.05);
  EXPECT_EQ(back.world.view_radius, 3u);
  EXPECT_EQ(back.world.goal_count, 2u);
  EXPECT_EQ(back.world.noise, 0.25);
  EXPECT_EQ(back.world.hold_steps, 9u);
  EXPECT_EQ(back.encoder_kind, "random_projection");
  EXPECT_EQ(back.encoder_output_dim, 32u);
  EXPECT_EQ(back.encoder_scale, 0.5);
  EXPECT_EQ(back.warmup, 2u);
  EXPECT_EQ(back.max_steps, 40u);
  EXPECT_FALSE(back.div_threshold.is_auto);
  EXPECT_EQ(back.div_threshold.value, 6.25);
  EXPECT_EQ(back.eval_seeds, 3u);
  EXPECT_EQ(back.episodes_per_seed, 2u);
  EXPECT_EQ(back.max_episode_steps, 500u);
  EXPECT_EQ(back.success_window, 50u);
  EXPECT_EQ(back.score_window, 8u);
  EXPECT_EQ(back.ablation_counts, (std::vector<uint32_t>{2, 5, 7}));
}

TEST(ConfigJson, ExecutionKnobsNeverAppear) {
  RunConfig cfg;
  cfg.jobs = 7;
  cfg.timing = false;
  json j = config_to_json(cfg);
  EXPECT_FALSE(j.contains("jobs"));
  EXPECT_FALSE(j.contains("timing"));
  std::string text = j.dump();
  EXPECT_EQ(text.find("jobs"), std::string::npos);
  EXPECT_EQ(text.find("timing"), std::string::npos);

  // And they are rejected on the way in.
  EXPECT_THROW(config_from_json(json{{"jobs", 3}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"timing", true}}), std::invalid_argument);
}

TEST(ConfigJson, UnknownKeysRejectedAtEveryLevel) {
  EXPECT_THROW(config_from_json(json{{"sneaky", 1}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"world", {{"frobnicate", 2}}}}),
               std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"encoder", {{"hidden", 2}}}}),
               std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"controller", {{"gain", 2}}}}),
               std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"eval", {{"budget", 2}}}}),
               std::invalid_argument);
  try {
    config_from_json(json{{"world", {{"frobnicate", 2}}}});
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("world.frobnicate"), std::string::npos);
  }
}

TEST(ConfigJson, PartialOverrideKeepsEverythingElse) {
  json j;
  j["world"]["size"] = 16;
  j["controller"]["max_steps"] = 7;
  RunConfig cfg = config_from_json(j);
  EXPECT_EQ(cfg.world.size, 16u);
  EXPECT_EQ(cfg.max_steps, 7u);
  // Untouched fields keep their defaults.
  EXPECT_EQ(cfg.demo_count, 100u);
  EXPECT_EQ(cfg.world.density, 0.15);
  EXPECT_EQ(cfg.world.goal_count, 64u);
  EXPECT_EQ(cfg.encoder_kind, "stacked_window");
  EXPECT_EQ(cfg.encoder_window, 8u);
  EXPECT_TRUE(cfg.div_threshold.is_auto);
  EXPECT_EQ(cfg.div_threshold.value, 0.95);
  EXPECT_EQ(cfg.eval_seeds, 20u);
  EXPECT_EQ(cfg.episodes_per_seed, 10u);
  EXPECT_EQ(cfg.max_episode_steps, 3600u);
  EXPECT_EQ(cfg.success_window, 100u);
  EXPECT_EQ(cfg.score_window, 16u);

  // A custom base survives keys the JSON does not mention.
  RunConfig base;
  base.demo_count = 5;
  base.world.noise = 0.0;
  RunConfig merged = config_from_json(j, base);
  EXPECT_EQ(merged.demo_count, 5u);
  EXPECT_EQ(merged.world.noise, 0.0);
  EXPECT_EQ(merged.world.size, 16u);
}

TEST(ConfigJson, ThresholdAcceptsNumberOrString) {
  RunConfig a = config_from_json(json{{"controller", {{"div_threshold", 2.5}}}});
  EXPECT_FALSE(a.div_threshold.is_auto);
  EXPECT_EQ(a.div_threshold.value, 2.5);

  RunConfig b =
      config_from_json(json{{"controller", {{"div_threshold", "auto:0.5"}}}});
  EXPECT_TRUE(b.div_threshold.is_auto);
  EXPECT_EQ(b.div_threshold.value, 0.5);

  EXPECT_THROW(config_from_json(json{{"controller", {{"div_threshold", -1.0}}}}),
               std::invalid_argument);
  EXPECT_THROW(
      config_from_json(json{{"controller", {{"div_threshold", "garbage"}}}}),
      std::invalid_argument);
}

TEST(ConfigJson, TypeErrorsBecomeInvalidArgument) {
  EXPECT_THROW(config_from_json(json{{"demo_count", "many"}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"world", 5}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json::parse("[1,2]")), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"ablation_counts", {"ten"}}}),
               std::invalid_argument);
}

TEST(CheckConfig, DefaultIsValid) {
  EXPECT_NO_THROW(check_config(default_run_config()));
}

TEST(CheckConfig, EachDomainViolationThrows) {
  auto expect_bad = [](void (*tweak)(RunConfig&), const char* what) {
    RunConfig cfg;
    tweak(cfg);
    EXPECT_THROW(check_config(cfg), std::invalid_argument) << what;
  };
  expect_bad([](RunConfig& c) { c.demo_count = 0; }, "demo_count");
  expect_bad([](RunConfig& c) { c.world.size = 3; }, "size");
  expect_bad([](RunConfig& c) { c.world.density = 0.31; }, "density high");
  expect_bad([](RunConfig& c) { c.world.density = -0.1; }, "density negative");
  expect_bad([](RunConfig& c) { c.world.view_radius = 0; }, "view_radius");
  expect_bad([](RunConfig& c) { c.world.goal_count = 0; }, "goal_count");
  expect_bad([](RunConfig& c) { c.world.noise = 1.5; }, "noise");
  expect_bad([](RunConfig& c) { c.world.hold_steps = 0; }, "hold_steps");
  expect_bad([](RunConfig& c) { c.encoder_kind = "mlp"; }, "encoder kind");
  expect_bad(
      [](RunConfig& c) {
        c.encoder_kind = "random_projection";
        c.encoder_output_dim = 0;
      },
      "output_dim");
  expect_bad([](RunConfig& c) { c.encoder_window = 0; }, "window");
  expect_bad([](RunConfig& c) { c.max_steps = 0; }, "max_steps");
  expect_bad([](RunConfig& c) { c.eval_seeds = 0; }, "eval_seeds");
  expect_bad([](RunConfig& c) { c.episodes_per_seed = 0; }, "episodes_per_seed");
  expect_bad([](RunConfig& c) { c.max_episode_steps = 0; }, "max_episode_steps");
  expect_bad([](RunConfig& c) { c.success_window = 0; }, "success_window");
  expect_bad([](RunConfig& c) { c.score_window = 0; }, "score_window");
  expect_bad([](RunConfig& c) { c.ablation_counts = {}; }, "ablation empty");
  expect_bad([](RunConfig& c) { c.ablation_counts = {10, 0}; }, "ablation zero");
  expect_bad([](RunConfig& c) { c.jobs = 0; }, "jobs");
}

TEST(LoadConfig, ReadsFileAndMergesOntoBase) {
  std::filesystem::path path =
      std::filesystem::temp_directory_path() / "sbc_cfg_test.json";
  {
    std::ofstream out(path);
    out << R"({"world": {"size": 24}, "eval": {"seeds": 2}})";
  }
  RunConfig cfg = load_config(path);
  EXPECT_EQ(cfg.world.size, 24u);
  EXPECT_EQ(cfg.eval_seeds, 2u);
  EXPECT_EQ(cfg.demo_count, 100u);
  std::filesystem::remove(path);

  EXPECT_THROW(load_config(path), std::runtime_error);

  std::filesystem::path broken =
      std::filesystem::temp_directory_path() / "sbc_cfg_broken.json";
  {
    std::ofstream out(broken);
    out << "{not json";
  }
  EXPECT_THROW(load_config(broken), std::invalid_argument);
  std::filesystem::remove(broken);
}

TEST(SummaryToJson, TimingFlagGatesWallClock) {
  PolicySummary s;
  s.name = "x";
  s.episodes = 4;
  s.successes = 2;
  s.success_rate = 0.5;
  s.mean_score = 0.25;
  s.per_seed_success_rate = {1.0, 0.0};
  s.searches_total = 6;
  s.searches_by_trigger[static_cast<size_t>(Trigger::initial)] = 4;
  s.searches_by_trigger[static_cast<size_t>(Trigger::divergence)] = 2;
  s.mean_searches_per_episode = 1.5;
  s.timing_wall_seconds = 1.25;

  json off = summary_to_json(s, false);
  EXPECT_EQ(off["timing_wall_seconds"], 0.0);
  json on = summary_to_json(s, true);
  EXPECT_EQ(on["timing_wall_seconds"], 1.25);

  EXPECT_EQ(off["episodes"], 4u);
  EXPECT_EQ(off["successes"], 2u);
  EXPECT_EQ(off["success_rate"], 0.5);
  EXPECT_EQ(off["searches"]["total"], 6u);
  EXPECT_EQ(off["searches"]["by_trigger"]["initial"], 4u);
  EXPECT_EQ(off["searches"]["by_trigger"]["divergence"], 2u);
  EXPECT_EQ(off["searches"]["by_trigger"]["time"], 0u);
  EXPECT_EQ(off["searches"]["by_trigger"]["end_of_trajectory"], 0u);
  EXPECT_EQ(off["per_seed_success_rate"], (json::array({1.0, 0.0})));

  // Apart from the timing key the two are identical.
  on["timing_wall_seconds"] = 0.0;
  EXPECT_EQ(on, off);
}

TEST(ReportToString, SortedKeysTwoSpaceIndentTrailingNewline) {
  json j;
  j["zeta"] = 1;
  j["alpha"] = {{"b", 2}, {"a", 1}};
  std::string text = report_to_string(j);
  EXPECT_EQ(text, "{\n  \"alpha\": {\n    \"a\": 1,\n    \"b\": 2\n  },\n  \"zeta\": 1\n}\n");
}

}  // namespace
