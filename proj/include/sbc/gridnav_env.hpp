#pragma once

// Deterministic grid navigation task. A square grid with Bernoulli
// obstacles, a centered spawn, and several goal cells sampled from the
// spawn's reachable component. The agent sees its normalized position
// plus a small local window; a scripted breadth-first-search expert walks
// to the nearest goal and then holds still on it.

#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sbc/demo_model.hpp"
#include "sbc/prng.hpp"

namespace sbc {

// Seed namespace tag for demo generation ("DMO"), so demo world seeds can
// never collide with evaluation world seeds derived elsewhere.
inline constexpr uint64_t kDemoSeedTag = 0x444D4F;

struct GridWorldConfig {
  uint32_t size = 32;         // grid is size x size
  double density = 0.15;      // obstacle probability per cell
  uint32_t view_radius = 2;   // window is (2r+1) x (2r+1)
  uint32_t goal_count = 64;
  double noise = 0.1;         // expert random-move probability
  uint32_t hold_steps = 120;  // demo frames recorded after goal entry
};

struct GridPos {
  int32_t x = 0;
  int32_t y = 0;
  bool operator==(const GridPos&) const = default;
};

namespace grid_controls {
inline constexpr size_t kUp = 0;     // y - 1
inline constexpr size_t kDown = 1;   // y + 1
inline constexpr size_t kLeft = 2;   // x - 1
inline constexpr size_t kRight = 3;  // x + 1
}  // namespace grid_controls

inline ActionSchema grid_schema() {
  ActionSchema schema;
  schema.entries = {{"up", ControlKind::boolean, 0, 0},
                    {"down", ControlKind::boolean, 0, 0},
                    {"left", ControlKind::boolean, 0, 0},
                    {"right", ControlKind::boolean, 0, 0}};
  return schema;
}

inline ActionRecord grid_action(size_t control) {
  ActionRecord rec = default_action(grid_schema());
  rec.values.at(control) = true;
  return rec;
}

inline ActionRecord grid_stay() { return default_action(grid_schema()); }

// Displacements in control order: up, down, left, right.
inline constexpr int32_t kDx[4] = {0, 0, -1, 1};
inline constexpr int32_t kDy[4] = {-1, 1, 0, 0};

class GridWorld {
 public:
  // Builds the world for (config, seed): obstacles are i.i.d.
  // Bernoulli(density) drawn row by row from Pcg32(seed, streams::kWorld),
  // then the spawn cell and its four neighbors are cleared, then each goal
  // is rejection-sampled (x then y per attempt, up to 1000 attempts) from
  // cells that are free, reachable from spawn, not the spawn, and not
  // already a goal. Identical (config, seed) always builds the identical
  // world.
  GridWorld(const GridWorldConfig& config, uint64_t seed)
      : config_(config), seed_(seed) {
    if (config.size < 4) throw std::invalid_argument("grid size must be >= 4");
    if (!(config.density >= 0.0 && config.density <= 0.3)) {
      throw std::invalid_argument("density must be in [0, 0.3]");
    }
    if (config.view_radius < 1) {
      throw std::invalid_argument("view_radius must be >= 1");
    }
    if (!(config.noise >= 0.0 && config.noise <= 1.0)) {
      throw std::invalid_argument("noise must be in [0, 1]");
    }
    if (config.goal_count < 1) throw std::invalid_argument("goal_count must be >= 1");
    int32_t n = static_cast<int32_t>(config.size);
    spawn_ = {n / 2, n / 2};

    Pcg32 rng(seed, streams::kWorld);
    obstacle_.assign(static_cast<size_t>(n) * n, 0);
    for (int32_t y = 0; y < n; ++y) {
      for (int32_t x = 0; x < n; ++x) {
        obstacle_[cell(x, y)] = rng.next_double() < config.density ? 1 : 0;
      }
    }
    obstacle_[cell(spawn_.x, spawn_.y)] = 0;
    for (int d = 0; d < 4; ++d) {
      int32_t nx = spawn_.x + kDx[d];
      int32_t ny = spawn_.y + kDy[d];
      if (in_bounds(nx, ny)) obstacle_[cell(nx, ny)] = 0;
    }

    reachable_ = flood_from({spawn_});

    goal_.assign(obstacle_.size(), 0);
    for (uint32_t g = 0; g < config.goal_count; ++g) {
      bool ok = false;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        int32_t x = static_cast<int32_t>(rng.uniform_below(config.size));
        int32_t y = static_cast<int32_t>(rng.uniform_below(config.size));
        if (obstacle_[cell(x, y)] || !reachable_[cell(x, y)]) continue;
        if (GridPos{x, y} == spawn_ || goal_[cell(x, y)]) continue;
        goal_[cell(x, y)] = 1;
        goals_.push_back({x, y});
        ok = true;
        break;
      }
      if (!ok) break;
    }
    if (goals_.empty()) {
      throw std::runtime_error("no goal placeable for seed " + std::to_string(seed));
    }

    goal_dist_ = distance_field(goals_);
    reset();
  }

  const GridWorldConfig& config() const { return config_; }
  uint64_t seed() const { return seed_; }
  int32_t size() const { return static_cast<int32_t>(config_.size); }
  GridPos spawn() const { return spawn_; }
  const std::vector<GridPos>& goals() const { return goals_; }
  GridPos position() const { return pos_; }

  void reset() { pos_ = spawn_; }

  bool in_bounds(int32_t x, int32_t y) const {
    return x >= 0 && y >= 0 && x < size() && y < size();
  }

  bool is_obstacle(int32_t x, int32_t y) const {
    return !in_bounds(x, y) || obstacle_[cell(x, y)] != 0;
  }

  bool is_goal(int32_t x, int32_t y) const {
    return in_bounds(x, y) && goal_[cell(x, y)] != 0;
  }

  bool is_reachable(int32_t x, int32_t y) const {
    return in_bounds(x, y) && reachable_[cell(x, y)] != 0;
  }

  bool in_goal() const { return is_goal(pos_.x, pos_.y); }

  // BFS steps from (x, y) to the nearest goal; INT32_MAX when unreachable.
  int32_t goal_distance(int32_t x, int32_t y) const {
    if (!in_bounds(x, y)) return std::numeric_limits<int32_t>::max();
    return goal_dist_[cell(x, y)];
  }

  static uint32_t observation_dim(const GridWorldConfig& config) {
    uint32_t w = 2 * config.view_radius + 1;
    return 2 + w * w;
  }

  // [x/size, y/size] then the (2r+1)^2 window row by row (dy from -r to r,
  // dx from -r to r): free 0.0, obstacle or out of bounds 0.5, goal 1.0.
  Embedding observe() const {
    Embedding obs;
    obs.reserve(observation_dim(config_));
    float n = static_cast<float>(size());
    obs.push_back(static_cast<float>(pos_.x) / n);
    obs.push_back(static_cast<float>(pos_.y) / n);
    int32_t r = static_cast<int32_t>(config_.view_radius);
    for (int32_t dy = -r; dy <= r; ++dy) {
      for (int32_t dx = -r; dx <= r; ++dx) {
        int32_t x = pos_.x + dx;
        int32_t y = pos_.y + dy;
        if (is_goal(x, y)) {
          obs.push_back(1.0f);
        } else if (is_obstacle(x, y)) {
          obs.push_back(0.5f);
        } else {
          obs.push_back(0.0f);
        }
      }
    }
    return obs;
  }

  // Applies the first set movement control in schema order; no set control
  // means stay. Moves into obstacles or out of bounds are ignored.
  void step(const ActionRecord& action) {
    if (action.values.size() != 4) {
      throw std::invalid_argument("action does not match grid schema");
    }
    for (int d = 0; d < 4; ++d) {
      if (std::holds_alternative<bool>(action.values[d]) &&
          std::get<bool>(action.values[d])) {
        int32_t nx = pos_.x + kDx[d];
        int32_t ny = pos_.y + kDy[d];
        if (!is_obstacle(nx, ny)) pos_ = {nx, ny};
        return;
      }
    }
  }

 private:
  size_t cell(int32_t x, int32_t y) const {
    return static_cast<size_t>(y) * config_.size + static_cast<size_t>(x);
  }

  std::vector<uint8_t> flood_from(const std::vector<GridPos>& sources) const {
    std::vector<uint8_t> seen(obstacle_.size(), 0);
    std::deque<GridPos> queue;
    for (const auto& s : sources) {
      if (!seen[cell(s.x, s.y)]) {
        seen[cell(s.x, s.y)] = 1;
        queue.push_back(s);
      }
    }
    while (!queue.empty()) {
      GridPos p = queue.front();
      queue.pop_front();
      for (int d = 0; d < 4; ++d) {
        int32_t nx = p.x + kDx[d];
        int32_t ny = p.y + kDy[d];
        if (!in_bounds(nx, ny) || obstacle_[cell(nx, ny)] || seen[cell(nx, ny)]) continue;
        seen[cell(nx, ny)] = 1;
        queue.push_back({nx, ny});
      }
    }
    return seen;
  }

  std::vector<int32_t> distance_field(const std::vector<GridPos>& sources) const {
    std::vector<int32_t> dist(obstacle_.size(), std::numeric_limits<int32_t>::max());
    std::deque<GridPos> queue;
    for (const auto& s : sources) {
      if (dist[cell(s.x, s.y)] != 0) {
        dist[cell(s.x, s.y)] = 0;
        queue.push_back(s);
      }
    }
    while (!queue.empty()) {
      GridPos p = queue.front();
      queue.pop_front();
      int32_t d0 = dist[cell(p.x, p.y)];
      for (int d = 0; d < 4; ++d) {
        int32_t nx = p.x + kDx[d];
        int32_t ny = p.y + kDy[d];
        if (!in_bounds(nx, ny) || obstacle_[cell(nx, ny)]) continue;
        if (dist[cell(nx, ny)] <= d0 + 1) continue;
        dist[cell(nx, ny)] = d0 + 1;
        queue.push_back({nx, ny});
      }
    }
    return dist;
  }

  GridWorldConfig config_;
  uint64_t seed_;
  GridPos spawn_;
  GridPos pos_;
  std::vector<uint8_t> obstacle_;
  std::vector<uint8_t> goal_;
  std::vector<uint8_t> reachable_;
  std::vector<int32_t> goal_dist_;
  std::vector<GridPos> goals_;
};

// Scripted expert. On a goal cell it stays put and draws nothing from the
// generator. Otherwise with probability `noise` it moves uniformly among
// the unblocked directional moves (stay excluded; one double plus one
// bounded draw), and with the remaining probability it steps onto the
// neighbor with the smallest goal distance, ties broken in control order
// up, down, left, right.
inline ActionRecord expert_action(const GridWorld& world, Pcg32& rng, double noise) {
  GridPos p = world.position();
  if (world.is_goal(p.x, p.y)) return grid_stay();

  if (noise > 0.0 && rng.next_double() < noise) {
    int legal[4];
    uint32_t count = 0;
    for (int d = 0; d < 4; ++d) {
      if (!world.is_obstacle(p.x + kDx[d], p.y + kDy[d])) legal[count++] = d;
    }
    if (count == 0) return grid_stay();
    return grid_action(static_cast<size_t>(legal[rng.uniform_below(count)]));
  }

  int best = -1;
  int32_t best_dist = std::numeric_limits<int32_t>::max();
  for (int d = 0; d < 4; ++d) {
    int32_t nx = p.x + kDx[d];
    int32_t ny = p.y + kDy[d];
    if (world.is_obstacle(nx, ny)) continue;
    int32_t dist = world.goal_distance(nx, ny);
    if (dist < best_dist) {
      best_dist = dist;
      best = d;
    }
  }
  if (best < 0) return grid_stay();
  return grid_action(static_cast<size_t>(best));
}

// Records `count` expert episodes as raw-observation trajectories with ids
// 0..count-1. Episode i runs in GridWorld(config, world_seed) with
// world_seed = derive_seed(derive_seed(base_seed, kDemoSeedTag), 2 * i)
// and expert generator Pcg32(derive_seed(derive_seed(base_seed,
// kDemoSeedTag), 2 * i + 1), streams::kExpert). Each step records the
// observation and the expert's action, then applies the action; the
// episode ends once the agent has spent hold_steps post-move steps on a
// goal (or at a 10000-step safety cap).
inline DemoSet generate_demos(const GridWorldConfig& config, uint32_t count,
                              uint64_t base_seed) {
  if (count < 1) throw std::invalid_argument("demo count must be >= 1");
  constexpr uint32_t kEpisodeCap = 10000;
  DemoSet demos;
  demos.dimension = GridWorld::observation_dim(config);
  demos.schema = grid_schema();
  demos.trajectories.reserve(count);
  uint64_t ns = derive_seed(base_seed, kDemoSeedTag);
  for (uint32_t i = 0; i < count; ++i) {
    GridWorld world(config, derive_seed(ns, 2ull * i));
    Pcg32 rng(derive_seed(ns, 2ull * i + 1), streams::kExpert);
    Trajectory traj;
    traj.id = i;
    uint32_t hold = 0;
    for (uint32_t t = 0; t < kEpisodeCap; ++t) {
      Embedding obs = world.observe();
      ActionRecord act = expert_action(world, rng, config.noise);
      traj.frames.push_back({std::move(obs), act});
      world.step(act);
      if (world.in_goal()) {
        ++hold;
        if (hold >= config.hold_steps) break;
      }
    }
    demos.trajectories.push_back(std::move(traj));
  }
  return demos;
}

}  // namespace sbc
