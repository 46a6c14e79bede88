#pragma once

// Evaluation machinery: the consecutive-steps success detector, the
// sliding-window occupancy scorer, policy adapters (search controller,
// scripted expert, random and majority baselines), and a threaded suite
// runner that plays a fixed grid of (world seed, episode) pairs and
// aggregates order-independent summaries.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sbc/controller.hpp"
#include "sbc/encoders.hpp"
#include "sbc/gridnav_env.hpp"
#include "sbc/prng.hpp"
#include "sbc/similarity_index.hpp"

namespace sbc {

// Seed namespace tag for evaluation ("EVL"); keeps evaluation world seeds
// disjoint from demo world seeds under the same base seed.
inline constexpr uint64_t kEvalSeedTag = 0x45564C;

// Index of the step that completes the first run of k consecutive 1s, or
// nothing if no such run exists.
inline std::optional<size_t> success_step(const std::vector<uint8_t>& labels,
                                          uint32_t k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  uint32_t run = 0;
  for (size_t t = 0; t < labels.size(); ++t) {
    run = labels[t] ? run + 1 : 0;
    if (run >= k) return t;
  }
  return std::nullopt;
}

// Means of every length-`window` contiguous block, left to right, via a
// running sum. Requires at least one full window of input.
inline std::vector<double> sliding_score(const std::vector<double>& values,
                                         size_t window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (values.size() < window) {
    throw std::invalid_argument("scores shorter than window");
  }
  std::vector<double> out;
  out.reserve(values.size() - window + 1);
  double sum = 0.0;
  for (size_t i = 0; i < window; ++i) sum += values[i];
  double inv = 1.0 / static_cast<double>(window);
  out.push_back(sum * inv);
  for (size_t i = window; i < values.size(); ++i) {
    sum += values[i] - values[i - window];
    out.push_back(sum * inv);
  }
  return out;
}

// Mean of the sliding window means; 0 when the input is shorter than one
// window.
inline double mean_window_score(const std::vector<uint8_t>& labels, size_t window) {
  if (labels.size() < window) return 0.0;
  std::vector<double> values(labels.begin(), labels.end());
  std::vector<double> scores = sliding_score(values, window);
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

// ---------------------------------------------------------------------------
// Policies

class Policy {
 public:
  virtual ~Policy() = default;
  // Called once per episode before the first act(); `seed` is the
  // episode's policy seed.
  virtual void begin_episode(const GridWorld& world, uint64_t seed) = 0;
  // Maps an observation to an action; empty means "no action yet" and the
  // runner holds still.
  virtual std::optional<ActionRecord> act(const Embedding& obs) = 0;
  // Search events accumulated since the last call; default none.
  virtual std::vector<SearchEvent> take_events() { return {}; }
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

class SbcPolicy final : public Policy {
 public:
  SbcPolicy(const LatentIndex& index, std::unique_ptr<Encoder> encoder,
            const ControllerConfig& config)
      : encoder_(std::move(encoder)), controller_(index, config) {
    if (encoder_->output_dim() != index.dimension()) {
      throw std::invalid_argument("encoder output does not match index dimension");
    }
  }

  void begin_episode(const GridWorld&, uint64_t) override {
    encoder_->reset();
    controller_.reset();
    events_.clear();
  }

  std::optional<ActionRecord> act(const Embedding& obs) override {
    StepOutput out = controller_.step(encoder_->encode(obs));
    if (out.event) events_.push_back(*out.event);
    return out.action;
  }

  std::vector<SearchEvent> take_events() override {
    return std::exchange(events_, {});
  }

 private:
  std::unique_ptr<Encoder> encoder_;
  Controller controller_;
  std::vector<SearchEvent> events_;
};

// Scripted expert run under evaluation; uses the world's own noise level.
class ExpertEvalPolicy final : public Policy {
 public:
  void begin_episode(const GridWorld& world, uint64_t seed) override {
    world_ = &world;
    rng_.emplace(seed, streams::kExpert);
  }

  std::optional<ActionRecord> act(const Embedding&) override {
    return expert_action(*world_, *rng_, world_->config().noise);
  }

 private:
  const GridWorld* world_ = nullptr;
  std::optional<Pcg32> rng_;
};

// Uniform over the five moves (four directions and stay).
class RandomPolicy final : public Policy {
 public:
  void begin_episode(const GridWorld&, uint64_t seed) override {
    rng_.emplace(seed, streams::kBaseline);
  }

  std::optional<ActionRecord> act(const Embedding&) override {
    uint32_t k = rng_->uniform_below(5);
    return k < 4 ? grid_action(k) : grid_stay();
  }

 private:
  std::optional<Pcg32> rng_;
};

// Most frequent action record across all demo frames; ties resolve to the
// smallest record in lexicographic control order.
inline ActionRecord majority_action(const DemoSet& demos) {
  std::map<std::vector<ControlValue>, uint64_t> counts;
  for (const auto& traj : demos.trajectories) {
    for (const auto& frame : traj.frames) counts[frame.action.values] += 1;
  }
  if (counts.empty()) throw std::invalid_argument("empty demo set");
  const std::vector<ControlValue>* best = nullptr;
  uint64_t best_count = 0;
  for (const auto& [values, count] : counts) {
    if (count > best_count) {
      best_count = count;
      best = &values;
    }
  }
  return ActionRecord{*best};
}

class MajorityPolicy final : public Policy {
 public:
  explicit MajorityPolicy(ActionRecord action) : action_(std::move(action)) {}
  void begin_episode(const GridWorld&, uint64_t) override {}
  std::optional<ActionRecord> act(const Embedding&) override { return action_; }

 private:
  ActionRecord action_;
};

// ---------------------------------------------------------------------------
// Episodes and suites

inline constexpr size_t kTriggerKinds = 4;

struct EpisodeResult {
  uint32_t seed_index = 0;
  uint32_t episode_index = 0;
  bool success = false;
  int64_t steps_to_success = -1;  // -1 when unsuccessful
  uint32_t steps_run = 0;
  double score = 0.0;  // mean sliding-window goal occupancy
  uint32_t searches_total = 0;
  uint32_t searches_by_trigger[kTriggerKinds] = {0, 0, 0, 0};
};

struct SuiteConfig {
  GridWorldConfig world;
  uint32_t seeds = 20;
  uint32_t episodes_per_seed = 10;
  uint32_t max_episode_steps = 3600;
  uint32_t success_window = 100;  // consecutive in-goal steps for success
  uint32_t score_window = 16;
  uint64_t base_seed = 0;
  uint32_t jobs = 1;
};

// One evaluation episode: reset the world, then step the policy until
// success or the step cap. Step t records whether the agent sits on a
// goal after its move; success is the first step completing
// `success_window` consecutive in-goal steps and the episode stops there.
inline EpisodeResult run_episode(GridWorld& world, Policy& policy,
                                 uint64_t policy_seed, const SuiteConfig& cfg) {
  world.reset();
  policy.begin_episode(world, policy_seed);
  std::vector<uint8_t> labels;
  labels.reserve(cfg.max_episode_steps);
  EpisodeResult result;
  uint32_t run = 0;
  for (uint32_t t = 0; t < cfg.max_episode_steps; ++t) {
    Embedding obs = world.observe();
    std::optional<ActionRecord> action = policy.act(obs);
    world.step(action ? *action : grid_stay());
    uint8_t label = world.in_goal() ? 1 : 0;
    labels.push_back(label);
    run = label ? run + 1 : 0;
    if (run >= cfg.success_window) {
      result.success = true;
      result.steps_to_success = static_cast<int64_t>(t);
      break;
    }
  }
  result.steps_run = static_cast<uint32_t>(labels.size());
  result.score = mean_window_score(labels, cfg.score_window);
  for (const SearchEvent& e : policy.take_events()) {
    result.searches_total += 1;
    result.searches_by_trigger[static_cast<size_t>(e.trigger)] += 1;
  }
  return result;
}

struct PolicySummary {
  std::string name;
  uint32_t episodes = 0;
  uint32_t successes = 0;
  double success_rate = 0.0;
  double mean_steps_to_success = 0.0;  // over successful episodes; 0 when none
  double mean_score = 0.0;             // over all episodes
  double stddev_score = 0.0;           // population standard deviation
  std::vector<double> per_seed_success_rate;
  uint64_t searches_total = 0;
  uint64_t searches_by_trigger[kTriggerKinds] = {0, 0, 0, 0};
  double mean_searches_per_episode = 0.0;
  double timing_wall_seconds = 0.0;  // wall clock; the only nondeterministic field
  std::vector<EpisodeResult> episode_results;  // ordered by (seed, episode)
};

// World seed for suite seed index s and policy seed for episode e under
// base seed b:
//   ns              = derive_seed(b, kEvalSeedTag)
//   world_seed(s)   = derive_seed(ns, 2s)
//   policy_seed(s,e)= derive_seed(derive_seed(ns, 2s + 1), e)
inline uint64_t suite_world_seed(uint64_t base_seed, uint32_t seed_index) {
  return derive_seed(derive_seed(base_seed, kEvalSeedTag), 2ull * seed_index);
}

inline uint64_t suite_policy_seed(uint64_t base_seed, uint32_t seed_index,
                                  uint32_t episode_index) {
  uint64_t ns = derive_seed(base_seed, kEvalSeedTag);
  return derive_seed(derive_seed(ns, 2ull * seed_index + 1), episode_index);
}

// Runs seeds x episodes_per_seed episodes. The episode grid is fixed up
// front and every worker writes into its own slot, so results and all
// aggregates are identical for any job count. Worker threads each build
// their own policy from the factory.
inline PolicySummary run_suite(const SuiteConfig& cfg, const PolicyFactory& factory,
                               const std::string& name) {
  if (cfg.seeds < 1 || cfg.episodes_per_seed < 1) {
    throw std::invalid_argument("suite needs at least one seed and one episode");
  }
  if (cfg.max_episode_steps < 1) {
    throw std::invalid_argument("max_episode_steps must be >= 1");
  }
  if (cfg.jobs < 1) throw std::invalid_argument("jobs must be >= 1");

  auto t0 = std::chrono::steady_clock::now();
  size_t total = static_cast<size_t>(cfg.seeds) * cfg.episodes_per_seed;
  std::vector<EpisodeResult> results(total);
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&]() {
    try {
      std::unique_ptr<Policy> policy = factory();
      for (;;) {
        size_t task = next.fetch_add(1);
        if (task >= total || failed.load()) break;
        uint32_t s = static_cast<uint32_t>(task / cfg.episodes_per_seed);
        uint32_t e = static_cast<uint32_t>(task % cfg.episodes_per_seed);
        GridWorld world(cfg.world, suite_world_seed(cfg.base_seed, s));
        EpisodeResult r =
            run_episode(world, *policy, suite_policy_seed(cfg.base_seed, s, e), cfg);
        r.seed_index = s;
        r.episode_index = e;
        results[task] = r;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!failed.exchange(true)) error = std::current_exception();
    }
  };

  uint32_t jobs = static_cast<uint32_t>(std::min<size_t>(cfg.jobs, total));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(jobs);
    for (uint32_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  PolicySummary sum;
  sum.name = name;
  sum.episodes = static_cast<uint32_t>(total);
  sum.per_seed_success_rate.assign(cfg.seeds, 0.0);
  double score_sum = 0.0;
  double steps_sum = 0.0;
  for (const EpisodeResult& r : results) {
    if (r.success) {
      sum.successes += 1;
      steps_sum += static_cast<double>(r.steps_to_success);
      sum.per_seed_success_rate[r.seed_index] += 1.0;
    }
    score_sum += r.score;
    sum.searches_total += r.searches_total;
    for (size_t k = 0; k < kTriggerKinds; ++k) {
      sum.searches_by_trigger[k] += r.searches_by_trigger[k];
    }
  }
  for (double& rate : sum.per_seed_success_rate) {
    rate /= static_cast<double>(cfg.episodes_per_seed);
  }
  sum.success_rate = static_cast<double>(sum.successes) / static_cast<double>(total);
  sum.mean_steps_to_success =
      sum.successes > 0 ? steps_sum / static_cast<double>(sum.successes) : 0.0;
  sum.mean_score = score_sum / static_cast<double>(total);
  double var = 0.0;
  for (const EpisodeResult& r : results) {
    double d = r.score - sum.mean_score;
    var += d * d;
  }
  sum.stddev_score = std::sqrt(var / static_cast<double>(total));
  sum.mean_searches_per_episode =
      static_cast<double>(sum.searches_total) / static_cast<double>(total);
  sum.episode_results = std::move(results);
  sum.timing_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sum;
}

}  // namespace sbc
