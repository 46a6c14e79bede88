#pragma once

// Observation encoders. An encoder maps a raw observation vector to the
// latent the index and controller operate on. Encoders may carry per-episode
// state (the stacked window does); reset() clears it at episode start.

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sbc/demo_model.hpp"
#include "sbc/prng.hpp"

namespace sbc {

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual uint32_t input_dim() const = 0;
  virtual uint32_t output_dim() const = 0;
  virtual void reset() {}
  virtual Embedding encode(const Embedding& x) = 0;

 protected:
  void check_input(const Embedding& x) const {
    if (x.size() != input_dim()) {
      throw std::invalid_argument("encoder input length " + std::to_string(x.size()) +
                                  " does not match expected " +
                                  std::to_string(input_dim()));
    }
  }
};

class IdentityEncoder final : public Encoder {
 public:
  explicit IdentityEncoder(uint32_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("dimension must be positive");
  }
  uint32_t input_dim() const override { return dim_; }
  uint32_t output_dim() const override { return dim_; }
  Embedding encode(const Embedding& x) override {
    check_input(x);
    return x;
  }

 private:
  uint32_t dim_;
};

// y = scale * W x with W entries drawn i.i.d. N(0, 1) / sqrt(output_dim)
// from Pcg32(seed, streams::kProjection) in row-major order (one output
// row at a time). The same (seed, shape) always yields the same matrix.
class RandomProjectionEncoder final : public Encoder {
 public:
  RandomProjectionEncoder(uint32_t input_dim, uint32_t output_dim, uint64_t seed,
                          float scale = 1.0f)
      : in_(input_dim), out_(output_dim), scale_(scale) {
    if (input_dim == 0 || output_dim == 0) {
      throw std::invalid_argument("dimensions must be positive");
    }
    Pcg32 rng(seed, streams::kProjection);
    double norm = 1.0 / std::sqrt(static_cast<double>(output_dim));
    weights_.resize(static_cast<size_t>(in_) * out_);
    for (auto& w : weights_) {
      w = static_cast<float>(rng.next_normal() * norm);
    }
  }

  uint32_t input_dim() const override { return in_; }
  uint32_t output_dim() const override { return out_; }

  Embedding encode(const Embedding& x) override {
    check_input(x);
    Embedding y(out_);
    for (uint32_t j = 0; j < out_; ++j) {
      const float* row = weights_.data() + static_cast<size_t>(j) * in_;
      double sum = 0.0;
      for (uint32_t i = 0; i < in_; ++i) {
        sum += static_cast<double>(row[i]) * static_cast<double>(x[i]);
      }
      y[j] = static_cast<float>(static_cast<double>(scale_) * sum);
    }
    return y;
  }

  const std::vector<float>& weights() const { return weights_; }

 private:
  uint32_t in_;
  uint32_t out_;
  float scale_;
  std::vector<float> weights_;  // row-major, out_ rows of in_ entries
};

// Concatenates the last `window` observations, oldest first, zero-padded
// on the left until the window fills. Output dim = window * input dim.
class StackedWindowEncoder final : public Encoder {
 public:
  StackedWindowEncoder(uint32_t frame_dim, uint32_t window)
      : dim_(frame_dim), window_(window) {
    if (frame_dim == 0) throw std::invalid_argument("dimension must be positive");
    if (window == 0) throw std::invalid_argument("window must be positive");
  }

  uint32_t input_dim() const override { return dim_; }
  uint32_t output_dim() const override { return dim_ * window_; }

  void reset() override { history_.clear(); }

  Embedding encode(const Embedding& x) override {
    check_input(x);
    history_.push_back(x);
    if (history_.size() > window_) history_.erase(history_.begin());
    Embedding y(static_cast<size_t>(dim_) * window_, 0.0f);
    size_t pad = window_ - history_.size();
    for (size_t h = 0; h < history_.size(); ++h) {
      std::copy(history_[h].begin(), history_[h].end(),
                y.begin() + static_cast<ptrdiff_t>((pad + h) * dim_));
    }
    return y;
  }

 private:
  uint32_t dim_;
  uint32_t window_;
  std::vector<Embedding> history_;
};

struct EncoderOptions {
  uint32_t output_dim = 0;  // random_projection
  float scale = 1.0f;       // random_projection
  uint32_t window = 8;      // stacked_window
  uint64_t seed = 0;
};

inline std::unique_ptr<Encoder> make_encoder(std::string_view kind, uint32_t input_dim,
                                             const EncoderOptions& opts = {}) {
  if (kind == "identity") {
    return std::make_unique<IdentityEncoder>(input_dim);
  }
  if (kind == "random_projection") {
    if (opts.output_dim == 0) {
      throw std::invalid_argument("random_projection needs output_dim > 0");
    }
    return std::make_unique<RandomProjectionEncoder>(input_dim, opts.output_dim,
                                                     opts.seed, opts.scale);
  }
  if (kind == "stacked_window") {
    return std::make_unique<StackedWindowEncoder>(input_dim, opts.window);
  }
  throw std::invalid_argument("unknown encoder kind: " + std::string(kind));
}

// Re-embeds every trajectory through `enc`, resetting it at each
// trajectory start. Actions and ids are kept as-is.
inline DemoSet encode_demos(const DemoSet& demos, Encoder& enc) {
  if (demos.dimension != enc.input_dim()) {
    throw std::invalid_argument("demo dimension does not match encoder input");
  }
  DemoSet out;
  out.dimension = enc.output_dim();
  out.schema = demos.schema;
  out.trajectories.reserve(demos.trajectories.size());
  for (const auto& traj : demos.trajectories) {
    enc.reset();
    Trajectory t;
    t.id = traj.id;
    t.frames.reserve(traj.frames.size());
    for (const auto& frame : traj.frames) {
      t.frames.push_back({enc.encode(frame.embedding), frame.action});
    }
    out.trajectories.push_back(std::move(t));
  }
  enc.reset();
  return out;
}

}  // namespace sbc
