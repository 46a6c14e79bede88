#pragma once

// Rank-2 PCA of indexed latents for 2D inspection plots. The covariance
// is never materialized: power iteration applies it matrix-free, with
// deflation and re-orthogonalization for the second component.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbc/prng.hpp"
#include "sbc/similarity_index.hpp"

namespace sbc {

struct Projection2D {
  uint32_t dimension = 0;
  std::vector<double> mean;           // per-dimension mean of the inputs
  std::vector<double> components[2];  // unit-length principal directions
  double eigenvalues[2] = {0.0, 0.0};
  double total_variance = 0.0;        // trace of the covariance
  bool degenerate = false;            // some component had no variance left

  // Fraction of variance the two components carry; 1 when there is none.
  double explained_fraction() const {
    if (total_variance <= 0.0) return 1.0;
    return (eigenvalues[0] + eigenvalues[1]) / total_variance;
  }

  std::pair<double, double> project(std::span<const float> x) const {
    if (x.size() != dimension) {
      throw std::invalid_argument("projection input length mismatch");
    }
    double px = 0.0;
    double py = 0.0;
    for (uint32_t i = 0; i < dimension; ++i) {
      double c = static_cast<double>(x[i]) - mean[i];
      px += c * components[0][i];
      py += c * components[1][i];
    }
    return {px, py};
  }
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

// Population covariance (divide by N) over every frame in the index.
// Each component runs power iteration from a Pcg32(seed, streams::kPca)
// start vector, at most 300 iterations, stopping when the direction moves
// by less than 1e-12 between iterations. The second component deflates
// the first and re-orthogonalizes every iteration. A component whose
// image under the covariance vanishes relative to the total variance has
// no real variance left to find: it is left as an arbitrary unit vector
// orthogonal to the earlier one, with eigenvalue 0 and the degenerate
// flag set. The threshold is relative because on exactly collinear data
// the deflated image is pure cancellation noise; normalizing it would
// hand back a direction contaminated by the first component.
inline Projection2D fit_projection(const LatentIndex& index, uint64_t seed = 0) {
  size_t n = index.size();
  uint32_t d = index.dimension();
  if (n == 0) throw std::invalid_argument("cannot fit projection on an empty index");
  if (d < 2) throw std::invalid_argument("projection needs dimension >= 2");

  Projection2D proj;
  proj.dimension = d;
  proj.mean.assign(d, 0.0);
  for (size_t s = 0; s < n; ++s) {
    std::span<const float> x = index.embedding_at(s);
    for (uint32_t i = 0; i < d; ++i) proj.mean[i] += static_cast<double>(x[i]);
  }
  for (uint32_t i = 0; i < d; ++i) proj.mean[i] /= static_cast<double>(n);

  for (size_t s = 0; s < n; ++s) {
    std::span<const float> x = index.embedding_at(s);
    for (uint32_t i = 0; i < d; ++i) {
      double c = static_cast<double>(x[i]) - proj.mean[i];
      proj.total_variance += c * c;
    }
  }
  proj.total_variance /= static_cast<double>(n);

  // y = C v = (1/n) sum_s centered_s (centered_s . v)
  auto apply_cov = [&](const std::vector<double>& v) {
    std::vector<double> y(d, 0.0);
    for (size_t s = 0; s < n; ++s) {
      std::span<const float> x = index.embedding_at(s);
      double t = 0.0;
      for (uint32_t i = 0; i < d; ++i) {
        t += (static_cast<double>(x[i]) - proj.mean[i]) * v[i];
      }
      for (uint32_t i = 0; i < d; ++i) {
        y[i] += (static_cast<double>(x[i]) - proj.mean[i]) * t;
      }
    }
    for (uint32_t i = 0; i < d; ++i) y[i] /= static_cast<double>(n);
    return y;
  };

  Pcg32 rng(seed, streams::kPca);
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<double> v(d);
    for (auto& vi : v) vi = rng.next_normal();
    if (comp == 1) {
      double p = detail::dot(v, proj.components[0]);
      for (uint32_t i = 0; i < d; ++i) v[i] -= p * proj.components[0][i];
    }
    double nv = detail::norm(v);
    if (nv == 0.0) {
      v.assign(d, 0.0);
      v[static_cast<size_t>(comp)] = 1.0;
      nv = 1.0;
    }
    for (auto& vi : v) vi /= nv;

    bool dead = false;
    for (int iter = 0; iter < 300; ++iter) {
      std::vector<double> y = apply_cov(v);
      if (comp == 1) {
        double p = detail::dot(y, proj.components[0]);
        for (uint32_t i = 0; i < d; ++i) y[i] -= p * proj.components[0][i];
      }
      double ny = detail::norm(y);
      if (ny <= 1e-12 * proj.total_variance) {
        dead = true;
        break;
      }
      for (auto& yi : y) yi /= ny;
      if (detail::dot(y, v) < 0.0) {
        for (auto& yi : y) yi = -yi;
      }
      double delta = 0.0;
      for (uint32_t i = 0; i < d; ++i) {
        double diff = y[i] - v[i];
        delta += diff * diff;
      }
      v = std::move(y);
      if (std::sqrt(delta) < 1e-12) break;
    }

    if (dead) {
      // No variance along anything orthogonal so far; pick any unit
      // vector orthogonal to the previous component.
      proj.degenerate = true;
      std::vector<double> u(d, 0.0);
      for (uint32_t i = 0; i < d; ++i) {
        u.assign(d, 0.0);
        u[i] = 1.0;
        if (comp == 1) {
          double p = detail::dot(u, proj.components[0]);
          for (uint32_t j = 0; j < d; ++j) u[j] -= p * proj.components[0][j];
        }
        double nu = detail::norm(u);
        if (nu > 1e-6) {
          for (auto& ui : u) ui /= nu;
          break;
        }
      }
      proj.components[comp] = std::move(u);
      proj.eigenvalues[comp] = 0.0;
      continue;
    }

    std::vector<double> y = apply_cov(v);
    proj.eigenvalues[comp] = detail::dot(v, y);
    proj.components[comp] = std::move(v);
  }
  return proj;
}

// Label for a frame's action: the name of the first set boolean control,
// "none" when no boolean control is set.
inline std::string action_label(const ActionRecord& action, const ActionSchema& schema) {
  for (size_t c = 0; c < schema.entries.size() && c < action.values.size(); ++c) {
    if (schema.entries[c].kind == ControlKind::boolean &&
        std::holds_alternative<bool>(action.values[c]) &&
        std::get<bool>(action.values[c])) {
      return schema.entries[c].name;
    }
  }
  return "none";
}

// CSV with header x,y,traj_id,offset,label and one row per indexed frame,
// in index (flat) order. Coordinates use %.9g.
inline void write_projection_csv(const LatentIndex& index, const Projection2D& proj,
                                 const ActionSchema& schema,
                                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "x,y,traj_id,offset,label\n";
  char buf[64];
  for (size_t s = 0; s < index.size(); ++s) {
    auto [x, y] = proj.project(index.embedding_at(s));
    const SituationRef& ref = index.ref_at(s);
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g", x, y);
    out << buf << ',' << ref.traj_id << ',' << ref.offset << ','
        << action_label(index.action_at(s), schema) << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace sbc
