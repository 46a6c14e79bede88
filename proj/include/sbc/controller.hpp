#pragma once

// Search-based imitation controller. Keeps a cursor into the demo index,
// copies the demonstrated action at the cursor each step, and re-searches
// when it has no cursor yet, has followed too long, ran off the end of the
// matched trajectory, or drifted too far from it in latent space.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "sbc/similarity_index.hpp"

namespace sbc {

enum class Trigger { initial, time, end_of_trajectory, divergence };

inline const char* trigger_name(Trigger t) {
  switch (t) {
    case Trigger::initial: return "initial";
    case Trigger::time: return "time";
    case Trigger::end_of_trajectory: return "end_of_trajectory";
    case Trigger::divergence: return "divergence";
  }
  return "unknown";
}

struct SearchEvent {
  uint64_t step = 0;  // 0-based controller step the search happened on
  Trigger trigger = Trigger::initial;
  SituationRef ref;                          // match the search selected
  double distance = 0.0;                     // L1 distance to that match
  std::optional<double> distance_at_trigger; // divergence only: distance that tripped
};

enum class Phase { warming, searching, following };

struct StepOutput {
  Phase phase = Phase::warming;
  std::optional<ActionRecord> action;   // empty during warmup
  std::optional<SearchEvent> event;     // set when this step re-searched
  std::optional<double> distance;       // see Controller::step
};

struct ControllerConfig {
  uint32_t warmup = 0;        // steps at episode start with no action
  uint32_t max_steps = 100;   // follow at most this many steps per search
  double div_threshold = 0.0; // re-search when distance exceeds this
};

class Controller {
 public:
  Controller(const LatentIndex& index, const ControllerConfig& config)
      : index_(index), config_(config) {
    if (config.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
    if (!(config.div_threshold >= 0.0)) {
      throw std::invalid_argument("div_threshold must be >= 0");
    }
  }

  const ControllerConfig& config() const { return config_; }
  uint64_t step_count() const { return step_count_; }
  uint32_t steps_followed() const { return steps_followed_; }
  std::optional<SituationRef> current_ref() const { return ref_; }

  void reset() {
    step_count_ = 0;
    steps_followed_ = 0;
    ref_.reset();
  }

  // One control step. During warmup nothing happens. Afterwards triggers
  // are checked in fixed precedence: initial (no cursor yet), time
  // (steps_followed >= max_steps), end_of_trajectory (cursor past the end
  // of its trajectory), divergence (distance to cursor frame strictly
  // above the threshold). Any trigger runs a fresh nearest-neighbor
  // search and moves the cursor there; otherwise the cursor frame is
  // followed. Either way the copied action's position is advanced past.
  //
  // StepOutput.distance is the distance to the cursor frame before it
  // advances: for a plain follow or a divergence trigger, the distance to
  // the old cursor; for the other triggers, the distance to the freshly
  // matched frame.
  StepOutput step(const Embedding& query) {
    uint64_t step_index = step_count_++;
    StepOutput out;
    if (step_index < config_.warmup) {
      out.phase = Phase::warming;
      return out;
    }

    std::optional<Trigger> trigger;
    std::optional<double> old_distance;
    if (!ref_) {
      trigger = Trigger::initial;
    } else if (steps_followed_ >= config_.max_steps) {
      trigger = Trigger::time;
    } else if (ref_->offset >= index_.trajectory_length(ref_->traj_id)) {
      trigger = Trigger::end_of_trajectory;
    } else {
      double d = l1_distance(query, index_.embedding_at(*ref_));
      old_distance = d;
      if (d > config_.div_threshold) trigger = Trigger::divergence;
    }

    if (trigger) {
      SearchResult result = index_.nearest(query);
      SearchEvent event;
      event.step = step_index;
      event.trigger = *trigger;
      event.ref = result.ref;
      event.distance = result.distance;
      if (*trigger == Trigger::divergence) event.distance_at_trigger = old_distance;
      ref_ = result.ref;
      out.phase = Phase::searching;
      out.event = event;
      out.action = index_.action_at(result.ref);
      out.distance = old_distance ? old_distance : std::optional<double>(result.distance);
      ref_->offset += 1;
      steps_followed_ = 1;
    } else {
      out.phase = Phase::following;
      out.action = index_.action_at(*ref_);
      out.distance = old_distance;
      ref_->offset += 1;
      steps_followed_ += 1;
    }
    return out;
  }

 private:
  const LatentIndex& index_;
  ControllerConfig config_;
  uint64_t step_count_ = 0;
  uint32_t steps_followed_ = 0;
  std::optional<SituationRef> ref_;
};

}  // namespace sbc
