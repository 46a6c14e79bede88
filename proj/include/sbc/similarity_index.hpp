#pragma once

// Exact L1 nearest-neighbor index over every frame of a demo set.
//
// Embeddings are copied into one flat float buffer sorted by ascending
// trajectory id, frames in order, so results never depend on insertion
// order. Queries scan all frames with partial-distance early abandoning;
// the result is always identical to a full brute-force scan, ties broken
// toward the smallest (traj_id, offset).

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(__AVX2__)
#include <immintrin.h>
#endif

#include "sbc/demo_model.hpp"

namespace sbc {

// Frames of one trajectory occupy a contiguous run of slots.
struct TrajectorySpan {
  uint64_t traj_id = 0;
  size_t first_slot = 0;
  uint32_t frame_count = 0;
};

struct SearchResult {
  SituationRef ref;
  double distance = 0.0;
};

// Sum over i of |a[i] - b[i]|, accumulated in double.
inline double l1_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("l1_distance: length mismatch");
  }
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sum += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  }
  return sum;
}

class LatentIndex {
 public:
  explicit LatentIndex(const DemoSet& demos) : dimension_(demos.dimension) {
    auto violations = validate(demos);
    if (!violations.empty()) {
      throw std::invalid_argument("cannot index invalid demo set: " +
                                  violations.front().to_string());
    }
    std::vector<const Trajectory*> order;
    order.reserve(demos.trajectories.size());
    for (const auto& t : demos.trajectories) order.push_back(&t);
    std::sort(order.begin(), order.end(),
              [](const Trajectory* a, const Trajectory* b) { return a->id < b->id; });

    size_t total = 0;
    for (const auto* t : order) total += t->frames.size();
    flat_.reserve(total * dimension_);
    refs_.reserve(total);
    actions_.reserve(total);
    spans_.reserve(order.size());
    for (const auto* t : order) {
      TrajectorySpan span;
      span.traj_id = t->id;
      span.first_slot = refs_.size();
      span.frame_count = static_cast<uint32_t>(t->frames.size());
      spans_.push_back(span);
      for (uint32_t f = 0; f < t->frames.size(); ++f) {
        const Frame& frame = t->frames[f];
        flat_.insert(flat_.end(), frame.embedding.begin(), frame.embedding.end());
        refs_.push_back({t->id, f});
        actions_.push_back(frame.action);
      }
    }
  }

  uint32_t dimension() const { return dimension_; }
  size_t size() const { return refs_.size(); }
  const std::vector<TrajectorySpan>& spans() const { return spans_; }

  std::span<const float> embedding_at(size_t slot) const {
    return {flat_.data() + slot * dimension_, dimension_};
  }

  const SituationRef& ref_at(size_t slot) const { return refs_[slot]; }
  const ActionRecord& action_at(size_t slot) const { return actions_[slot]; }

  // Frame count of the trajectory holding `ref`, or 0 if the id is unknown.
  uint32_t trajectory_length(uint64_t traj_id) const {
    const TrajectorySpan* span = find_span(traj_id);
    return span ? span->frame_count : 0;
  }

  // Action stored at `ref`; throws if the ref does not exist.
  const ActionRecord& action_at(const SituationRef& ref) const {
    return actions_[slot_of(ref)];
  }

  // Embedding stored at `ref`; throws if the ref does not exist.
  std::span<const float> embedding_at(const SituationRef& ref) const {
    return embedding_at(slot_of(ref));
  }

  // Exact nearest neighbor under L1, identical to nearest_bruteforce
  // including ties (which resolve to the smallest (traj_id, offset)).
  //
  // Candidates go through a cheap screening pass first, abandoned once
  // its running sum reaches the current best scaled by a safety margin.
  // The screen may sum in a different order and precision than the
  // canonical sequential double sum, but its terms are the same
  // nonnegative quantities up to one rounding each, so it stays within a
  // relative error far below the margin; a non-finite screen sum simply
  // fails to abandon. Any candidate that survives is re-measured with
  // the canonical sequential sum, and the winner is chosen only on those
  // canonical values, so the result matches brute force bit for bit.
  SearchResult nearest(std::span<const float> query) const {
    if (query.size() != dimension_) {
      throw std::invalid_argument("query length " + std::to_string(query.size()) +
                                  " does not match index dimension " +
                                  std::to_string(dimension_));
    }
    if (refs_.empty()) throw std::logic_error("empty index");
    size_t best_slot = 0;
    double best = std::numeric_limits<double>::infinity();
    // The screen's worst-case relative error is one f32 rounding per term
    // plus the f32 chain accumulation, about 6e-8 * dims; this margin
    // stays more than an order of magnitude above it at every dimension.
    const double margin = 1.0 + 1e-6 * std::max<double>(1000.0, static_cast<double>(dimension_));
    double bound = std::numeric_limits<double>::infinity();
    float bound_f = std::numeric_limits<float>::infinity();
    const float* q = query.data();
    const float* base = flat_.data();
    const size_t dims = dimension_;
    const size_t strip_end = dims & ~static_cast<size_t>(15);
    for (size_t slot = 0; slot < refs_.size(); ++slot) {
      const float* cand = base + slot * dims;
      float partial = 0.0f;
      size_t i = 0;
      bool abandoned = false;
#if defined(__AVX2__)
      const __m256 absmask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
      __m256 acc0 = _mm256_setzero_ps();
      __m256 acc1 = _mm256_setzero_ps();
      int strips = 0;
      while (i < strip_end) {
        __m256 d0 = _mm256_sub_ps(_mm256_loadu_ps(q + i), _mm256_loadu_ps(cand + i));
        __m256 d1 = _mm256_sub_ps(_mm256_loadu_ps(q + i + 8),
                                  _mm256_loadu_ps(cand + i + 8));
        acc0 = _mm256_add_ps(acc0, _mm256_and_ps(d0, absmask));
        acc1 = _mm256_add_ps(acc1, _mm256_and_ps(d1, absmask));
        i += 16;
        if (++strips == 4) {
          strips = 0;
          __m256 s8 = _mm256_add_ps(acc0, acc1);
          __m128 s4 = _mm_add_ps(_mm256_castps256_ps128(s8),
                                 _mm256_extractf128_ps(s8, 1));
          __m128 s2 = _mm_add_ps(s4, _mm_movehl_ps(s4, s4));
          __m128 s1 = _mm_add_ss(s2, _mm_shuffle_ps(s2, s2, 1));
          partial = _mm_cvtss_f32(s1);
          if (partial >= bound_f && std::isfinite(partial)) {
            abandoned = true;
            break;
          }
        }
      }
      if (!abandoned && strips != 0) {
        __m256 s8 = _mm256_add_ps(acc0, acc1);
        __m128 s4 =
            _mm_add_ps(_mm256_castps256_ps128(s8), _mm256_extractf128_ps(s8, 1));
        __m128 s2 = _mm_add_ps(s4, _mm_movehl_ps(s4, s4));
        __m128 s1 = _mm_add_ss(s2, _mm_shuffle_ps(s2, s2, 1));
        partial = _mm_cvtss_f32(s1);
      }
#else
      float a0 = 0.0f, a1 = 0.0f, a2 = 0.0f, a3 = 0.0f;
      int strips = 0;
      while (i < strip_end) {
        for (size_t k = i; k < i + 16; k += 4) {
          a0 += std::abs(q[k] - cand[k]);
          a1 += std::abs(q[k + 1] - cand[k + 1]);
          a2 += std::abs(q[k + 2] - cand[k + 2]);
          a3 += std::abs(q[k + 3] - cand[k + 3]);
        }
        i += 16;
        if (++strips == 4) {
          strips = 0;
          partial = (a0 + a1) + (a2 + a3);
          if (partial >= bound_f && std::isfinite(partial)) {
            abandoned = true;
            break;
          }
        }
      }
      if (!abandoned) partial = (a0 + a1) + (a2 + a3);
#endif
      if (abandoned) continue;
      double screened = static_cast<double>(partial);
      for (; i < dims; ++i) {
        screened += std::abs(static_cast<double>(q[i]) - static_cast<double>(cand[i]));
      }
      if (screened >= bound && std::isfinite(screened)) continue;
      double d = l1_distance(query, {cand, dims});
      if (d < best) {
        best = d;
        best_slot = slot;
        bound = best * margin;
        bound_f = static_cast<float>(bound);
      }
    }
    return {refs_[best_slot], best};
  }

  // Reference scan with no abandoning; for verification.
  SearchResult nearest_bruteforce(std::span<const float> query) const {
    if (query.size() != dimension_) {
      throw std::invalid_argument("query length does not match index dimension");
    }
    if (refs_.empty()) throw std::logic_error("empty index");
    size_t best_slot = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t slot = 0; slot < refs_.size(); ++slot) {
      double d = l1_distance(query, embedding_at(slot));
      if (d < best) {
        best = d;
        best_slot = slot;
      }
    }
    return {refs_[best_slot], best};
  }

 private:
  size_t slot_of(const SituationRef& ref) const {
    const TrajectorySpan* span = find_span(ref.traj_id);
    if (!span || ref.offset >= span->frame_count) {
      throw std::out_of_range("no frame at traj " + std::to_string(ref.traj_id) +
                              " offset " + std::to_string(ref.offset));
    }
    return span->first_slot + ref.offset;
  }

  const TrajectorySpan* find_span(uint64_t traj_id) const {
    auto it = std::lower_bound(
        spans_.begin(), spans_.end(), traj_id,
        [](const TrajectorySpan& s, uint64_t id) { return s.traj_id < id; });
    if (it == spans_.end() || it->traj_id != traj_id) return nullptr;
    return &*it;
  }

  uint32_t dimension_;
  std::vector<float> flat_;
  std::vector<SituationRef> refs_;
  std::vector<ActionRecord> actions_;
  std::vector<TrajectorySpan> spans_;
};

// Distance threshold from the empirical distribution of nearest-neighbor
// distances between consecutive frames: for each frame with a successor,
// take d(frame, successor); the threshold is the q-quantile by nearest
// rank, sorted[ceil(q * M) - 1] over M sampled gaps.
inline double calibrate_threshold(const LatentIndex& index, double quantile) {
  if (!(quantile > 0.0 && quantile <= 1.0)) {
    throw std::invalid_argument("quantile must be in (0, 1]");
  }
  std::vector<double> gaps;
  for (const auto& span : index.spans()) {
    for (uint32_t f = 0; f + 1 < span.frame_count; ++f) {
      gaps.push_back(l1_distance(index.embedding_at(span.first_slot + f),
                                 index.embedding_at(span.first_slot + f + 1)));
    }
  }
  if (gaps.empty()) {
    throw std::invalid_argument("threshold calibration needs a trajectory with >= 2 frames");
  }
  std::sort(gaps.begin(), gaps.end());
  size_t rank = static_cast<size_t>(std::ceil(quantile * static_cast<double>(gaps.size())));
  if (rank == 0) rank = 1;
  return gaps[rank - 1];
}

}  // namespace sbc
