#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sbc/prng.hpp"
#include "sbc/similarity_index.hpp"

namespace {

using namespace sbc;

ActionSchema tiny_schema() {
  ActionSchema s;
  s.entries = {{"go", ControlKind::boolean, 0, 0}};
  return s;
}

// Independent nearest neighbor: double loop over (trajectory, frame) in the
// DemoSet itself, no index involved. Accumulation mirrors the documented
// canonical order: ascending component index, each term widened to double.
struct NaiveBest {
  uint64_t traj_id;
  uint32_t offset;
  double distance;
};

NaiveBest naive_nearest(const DemoSet& demos, const std::vector<float>& query) {
  NaiveBest best{0, 0, std::numeric_limits<double>::infinity()};
  std::vector<const Trajectory*> order;
  for (const auto& t : demos.trajectories) order.push_back(&t);
  std::sort(order.begin(), order.end(),
            [](const Trajectory* a, const Trajectory* b) { return a->id < b->id; });
  for (const Trajectory* t : order) {
    for (uint32_t f = 0; f < t->frames.size(); ++f) {
      const auto& e = t->frames[f].embedding;
      double d = 0.0;
      for (size_t i = 0; i < e.size(); ++i) {
        d += std::abs(static_cast<double>(query[i]) - static_cast<double>(e[i]));
      }
      if (d < best.distance) best = {t->id, f, d};
    }
  }
  return best;
}

DemoSet random_demos(uint32_t traj_count, uint32_t max_frames, uint32_t dim,
                     uint64_t seed, double spread = 1.0) {
  DemoSet d;
  d.dimension = dim;
  d.schema = tiny_schema();
  Pcg32 rng(seed, 31);
  for (uint32_t t = 0; t < traj_count; ++t) {
    Trajectory traj;
    traj.id = t;
    uint32_t frames = 1 + rng.uniform_below(max_frames);
    for (uint32_t f = 0; f < frames; ++f) {
      Frame frame;
      for (uint32_t i = 0; i < dim; ++i) {
        frame.embedding.push_back(
            static_cast<float>((rng.next_double() * 2 - 1) * spread));
      }
      frame.action = default_action(d.schema);
      frame.action.values[0] = (rng.next_u32() & 1) != 0;
      traj.frames.push_back(std::move(frame));
    }
    d.trajectories.push_back(std::move(traj));
  }
  return d;
}

std::vector<float> random_query(uint32_t dim, Pcg32& rng, double spread = 1.0) {
  std::vector<float> q(dim);
  for (auto& v : q) v = static_cast<float>((rng.next_double() * 2 - 1) * spread);
  return q;
}

TEST(L1Distance, HandValues) {
  std::vector<float> z{0, 0, 0};
  EXPECT_EQ(l1_distance(z, z), 0.0);
  std::vector<float> a{1, 2}, b{4, 0};
  EXPECT_EQ(l1_distance(a, b), 5.0);
  EXPECT_EQ(l1_distance(b, a), 5.0);
}

TEST(L1Distance, MatchesNaiveLoopExactly) {
  Pcg32 rng(3, 1);
  for (uint32_t dim : {1u, 7u, 64u, 1024u}) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<float> a = random_query(dim, rng, 10.0);
      std::vector<float> b = random_query(dim, rng, 10.0);
      double want = 0.0;
      for (uint32_t i = 0; i < dim; ++i) {
        want += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
      }
      ASSERT_EQ(l1_distance(a, b), want);
    }
  }
}

TEST(L1Distance, DimensionMismatchThrows) {
  std::vector<float> a{1, 2, 3}, b{1, 2};
  EXPECT_THROW((void)l1_distance(a, b), std::invalid_argument);
}

TEST(LatentIndex, FlatOrderAndAccessors) {
  DemoSet d = random_demos(5, 8, 4, 11);
  // Shuffle trajectory storage order; flat order must still ascend by id.
  std::swap(d.trajectories[0], d.trajectories[3]);
  std::swap(d.trajectories[1], d.trajectories[4]);
  LatentIndex index(d);

  size_t total = 0;
  for (const auto& t : d.trajectories) total += t.frames.size();
  ASSERT_EQ(index.size(), total);
  ASSERT_EQ(index.dimension(), 4u);

  SituationRef prev{0, 0};
  for (size_t slot = 0; slot < index.size(); ++slot) {
    SituationRef ref = index.ref_at(slot);
    if (slot > 0) ASSERT_LT(prev, ref);
    prev = ref;
    // Accessors agree with the source DemoSet.
    const Trajectory* src = nullptr;
    for (const auto& t : d.trajectories) {
      if (t.id == ref.traj_id) src = &t;
    }
    ASSERT_NE(src, nullptr);
    const Frame& frame = src->frames[ref.offset];
    auto emb = index.embedding_at(slot);
    ASSERT_TRUE(std::equal(emb.begin(), emb.end(), frame.embedding.begin()));
    ASSERT_EQ(index.action_at(slot), frame.action);
    ASSERT_EQ(index.action_at(ref), frame.action);
    auto by_ref = index.embedding_at(ref);
    ASSERT_TRUE(std::equal(by_ref.begin(), by_ref.end(), frame.embedding.begin()));
  }
  for (const auto& t : d.trajectories) {
    EXPECT_EQ(index.trajectory_length(t.id), t.frames.size());
  }
  EXPECT_EQ(index.trajectory_length(999), 0u);
}

TEST(LatentIndex, RejectsInvalidDemos) {
  DemoSet d = random_demos(2, 3, 4, 12);
  d.trajectories[1].id = d.trajectories[0].id;
  EXPECT_THROW(LatentIndex{d}, std::invalid_argument);
}

TEST(Nearest, EqualsBruteForceAndNaiveOnRandomCases) {
  Pcg32 rng(21, 2);
  // Dims straddle the 16-wide screening strips: below, at, above, ragged.
  for (uint32_t dim : {2u, 15u, 16u, 17u, 64u, 129u}) {
    DemoSet d = random_demos(10, 20, dim, 100 + dim);
    LatentIndex index(d);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<float> q = random_query(dim, rng);
      SearchResult fast = index.nearest(q);
      SearchResult brute = index.nearest_bruteforce(q);
      NaiveBest naive = naive_nearest(d, q);
      ASSERT_EQ(fast.ref, brute.ref);
      ASSERT_EQ(fast.distance, brute.distance);
      ASSERT_EQ(brute.ref.traj_id, naive.traj_id);
      ASSERT_EQ(brute.ref.offset, naive.offset);
      ASSERT_EQ(brute.distance, naive.distance);
    }
  }
}

TEST(Nearest, ClusteredPointsStressAbandonPath) {
  // Near-identical candidates keep the best bound tight so the screening
  // pass abandons aggressively; results must still match exactly.
  const uint32_t dim = 48;
  DemoSet d = random_demos(4, 50, dim, 77, 1e-4);
  LatentIndex index(d);
  Pcg32 rng(5, 3);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<float> q = random_query(dim, rng, 1e-4);
    SearchResult fast = index.nearest(q);
    SearchResult brute = index.nearest_bruteforce(q);
    ASSERT_EQ(fast.ref, brute.ref);
    ASSERT_EQ(fast.distance, brute.distance);
  }
}

TEST(Nearest, StoredEmbeddingComesBackWithZeroDistance) {
  DemoSet d = random_demos(6, 10, 9, 13);
  LatentIndex index(d);
  for (size_t slot = 0; slot < index.size(); slot += 3) {
    auto emb = index.embedding_at(slot);
    std::vector<float> q(emb.begin(), emb.end());
    SearchResult r = index.nearest(q);
    EXPECT_EQ(r.distance, 0.0);
    // Possibly an earlier duplicate; never a later ref.
    EXPECT_LE(r.ref, index.ref_at(slot));
  }
}

TEST(Nearest, TiesResolveToSmallestRef) {
  DemoSet d;
  d.dimension = 2;
  d.schema = tiny_schema();
  // Identical frame stored under three refs; build input out of id order.
  for (uint64_t id : {7ull, 2ull, 5ull}) {
    Trajectory t;
    t.id = id;
    Frame f;
    f.embedding = {1.0f, -1.0f};
    f.action = default_action(d.schema);
    t.frames.push_back(f);
    if (id == 2) {
      Frame g;
      g.embedding = {1.0f, -1.0f};
      g.action = default_action(d.schema);
      t.frames.push_back(g);
    }
    d.trajectories.push_back(std::move(t));
  }
  LatentIndex index(d);
  std::vector<float> q{1.0f, -1.0f};
  SearchResult fast = index.nearest(q);
  SearchResult brute = index.nearest_bruteforce(q);
  EXPECT_EQ(fast.ref, (SituationRef{2, 0}));
  EXPECT_EQ(brute.ref, (SituationRef{2, 0}));

  // Symmetric pair equidistant from the query: |0.9-1|+... both frames at
  // distance 0.2; smaller (traj_id, offset) wins.
  std::vector<float> mid{0.9f, -1.0f};
  DemoSet d2;
  d2.dimension = 2;
  d2.schema = tiny_schema();
  Trajectory t2;
  t2.id = 4;
  Frame a;
  a.embedding = {0.8f, -1.0f};
  a.action = default_action(d2.schema);
  Frame b;
  b.embedding = {1.0f, -1.0f};
  b.action = default_action(d2.schema);
  t2.frames = {a, b};
  d2.trajectories.push_back(t2);
  LatentIndex index2(d2);
  SearchResult r = index2.nearest(mid);
  EXPECT_EQ(r.ref, (SituationRef{4, 0}));
  EXPECT_EQ(r.distance, index2.nearest_bruteforce(mid).distance);
}

TEST(Nearest, DimensionMismatchThrows) {
  DemoSet d = random_demos(2, 3, 4, 14);
  LatentIndex index(d);
  std::vector<float> q{1, 2, 3};
  EXPECT_THROW((void)index.nearest(q), std::invalid_argument);
  EXPECT_THROW((void)index.nearest_bruteforce(q), std::invalid_argument);
}

TEST(CalibrateThreshold, NearestRankOnKnownGaps) {
  // One trajectory whose consecutive embedding gaps are exactly 1..100:
  // partial sums of 1..100 stay integral, so every gap is exact in f32.
  DemoSet d;
  d.dimension = 1;
  d.schema = tiny_schema();
  Trajectory t;
  t.id = 0;
  float acc = 0.0f;
  for (int g = 0; g <= 100; ++g) {
    Frame f;
    acc += static_cast<float>(g);  // frame 0 at 0, then +1, +2, ...
    f.embedding = {acc};
    f.action = default_action(d.schema);
    t.frames.push_back(std::move(f));
  }
  d.trajectories.push_back(std::move(t));
  LatentIndex index(d);
  EXPECT_EQ(calibrate_threshold(index, 0.95), 95.0);
  EXPECT_EQ(calibrate_threshold(index, 1.0), 100.0);
  EXPECT_EQ(calibrate_threshold(index, 0.001), 1.0);  // ceil(0.1) -> rank 1
  EXPECT_EQ(calibrate_threshold(index, 0.5), 50.0);
}

TEST(CalibrateThreshold, MatchesSortAndPickOracle) {
  DemoSet d = random_demos(6, 30, 5, 15);
  LatentIndex index(d);
  std::vector<double> gaps;
  for (const auto& t : d.trajectories) {
    for (size_t f = 0; f + 1 < t.frames.size(); ++f) {
      gaps.push_back(l1_distance(t.frames[f].embedding, t.frames[f + 1].embedding));
    }
  }
  std::sort(gaps.begin(), gaps.end());
  for (double q : {0.1, 0.5, 0.9, 0.95, 1.0}) {
    size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(gaps.size())));
    ASSERT_EQ(calibrate_threshold(index, q), gaps[rank - 1]) << "q " << q;
  }
}

TEST(CalibrateThreshold, DomainChecks) {
  DemoSet d = random_demos(2, 5, 3, 16);
  LatentIndex index(d);
  EXPECT_THROW((void)calibrate_threshold(index, 0.0), std::invalid_argument);
  EXPECT_THROW((void)calibrate_threshold(index, 1.5), std::invalid_argument);

  // All trajectories single-frame: no consecutive pairs to calibrate on.
  DemoSet ones = random_demos(3, 1, 3, 17);
  LatentIndex index1(ones);
  EXPECT_THROW((void)calibrate_threshold(index1, 0.95), std::invalid_argument);
}

}  // namespace
