// Test-only oracles, independent of the library implementation paths they
// check, plus small fixture helpers shared across the suites.
#pragma once

#include <functional>
#include <vector>

#include "nerfgs/nerfgs.hpp"

namespace oracle {

using nerfgs::real;
using nerfgs::Vec3;

// Straightforward dense matrix-product MLP, written independently of
// nerfgs::mlp_forward (checks it at <= 1e-12).
inline std::vector<real> naive_mlp(const nerfgs::MlpSpec& spec, const std::vector<real>& weights,
                                   const std::vector<real>& input) {
  std::vector<real> x = input;
  std::size_t off = 0;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.layer_in(l), out = spec.layer_out(l);
    std::vector<real> y(out, 0);
    for (int o = 0; o < out; ++o) {
      for (int i = 0; i < in; ++i) y[o] += weights[off + std::size_t(o) * in + i] * x[i];
      y[o] += weights[off + std::size_t(out) * in + o];
    }
    off += std::size_t(out) * (in + 1);
    const bool last = l == spec.layer_count() - 1;
    for (int o = 0; o < out; ++o) {
      if (!last) {
        y[o] = std::max(real(0), y[o]);
      } else {
        switch (spec.output_activation) {
          case nerfgs::OutputActivation::none: break;
          case nerfgs::OutputActivation::sigmoid: y[o] = 1 / (1 + std::exp(-y[o])); break;
          case nerfgs::OutputActivation::exp: y[o] = std::exp(y[o]); break;
          case nerfgs::OutputActivation::softplus: y[o] = std::log1p(std::exp(y[o])); break;
        }
      }
    }
    x = std::move(y);
  }
  return x;
}

// Direct unrolled Eq. 3 blend for one pixel over depth-sorted splats; no
// early stop, no bounding-box skip.
inline Vec3 unrolled_blend(const std::vector<nerfgs::Splat2D>& splats, real px, real py, const Vec3& bg,
                           real alpha_clamp = real(0.99), real alpha_cutoff = real(1) / 255) {
  auto order = nerfgs::depth_sorted_order(splats);
  Vec3 c{0, 0, 0};
  real T = 1;
  for (auto idx : order) {
    const auto& s = splats[idx];
    real det = s.cov2d.det();
    if (!(det > 0)) continue;
    real ixx = s.cov2d.yy / det, ixy = -s.cov2d.xy / det, iyy = s.cov2d.xx / det;
    real dx = px - s.mean2d.x, dy = py - s.mean2d.y;
    real power = real(-0.5) * (ixx * dx * dx + 2 * ixy * dx * dy + iyy * dy * dy);
    if (power > 0) continue;
    real a = std::min(s.opacity * std::exp(power), alpha_clamp);
    if (a < alpha_cutoff) continue;
    c += s.color * (a * T);
    T *= (1 - a);
  }
  return c + bg * T;
}

// Analytic first hit of |o + t d - c| = r (smallest positive root).
inline bool ray_sphere_first_hit(const Vec3& o, const Vec3& d, const Vec3& c, real r, real& t_hit) {
  Vec3 oc = o - c;
  real b = oc.dot(d);
  real disc = b * b - (oc.dot(oc) - r * r);
  if (disc < 0) return false;
  real s = std::sqrt(disc);
  real t0 = -b - s, t1 = -b + s;
  if (t0 > 0) {
    t_hit = t0;
    return true;
  }
  if (t1 > 0) {
    t_hit = t1;
    return true;
  }
  return false;
}

// ---- parameter views: flatten chosen (block, index) slots for FD checks ----

struct ParamView {
  struct Slot {
    nerfgs::ParamBlock* block;
    std::size_t index;
  };
  std::vector<Slot> slots;

  void add_block(nerfgs::ParamBlock& b) {
    for (std::size_t i = 0; i < b.size(); ++i) slots.push_back({&b, i});
  }
  void add_values(nerfgs::ParamBlock& b, std::size_t begin, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) slots.push_back({&b, begin + i});
  }

  std::vector<real> gather() const {
    std::vector<real> v(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) v[i] = slots[i].block->values[slots[i].index];
    return v;
  }
  void scatter(const std::vector<real>& v) const {
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i].block->values[slots[i].index] = v[i];
  }
  std::vector<real> gather_grads() const {
    std::vector<real> v(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) v[i] = slots[i].block->grads[slots[i].index];
    return v;
  }
  void zero_grads() const {
    for (const auto& s : slots) s.block->zero_grads();
  }
};

// Wraps forward/backward lambdas over a ParamView into the library's
// finite-difference harness.
inline nerfgs::DifferentiableScalar view_scalar(const ParamView& view, std::function<real()> forward,
                                                std::function<void()> backward) {
  nerfgs::DifferentiableScalar f;
  f.value = [view, forward](const std::vector<real>& x) {
    view.scatter(x);
    return forward();
  };
  f.gradient = [view, forward, backward](const std::vector<real>& x) {
    view.scatter(x);
    view.zero_grads();
    forward();
    backward();
    return view.gather_grads();
  };
  return f;
}

// ---- tiny fixtures ----

// A small shared-feature model: 2 hash levels (features dim 4), 8-wide MLPs.
inline nerfgs::Model tiny_model(std::uint64_t seed, int levels = 2, int table_log2 = 5) {
  nerfgs::ModelSpec spec;
  spec.grid.levels = levels;
  spec.grid.features_per_level = 2;
  spec.grid.table_size_log2.assign(std::size_t(levels), table_log2);
  spec.grid.base_resolution = 4;
  spec.grid.per_level_scale = real(1.6);
  spec.grid.bounds = {{-1, -1, -1}, {1, 1, 1}};
  spec.sigma_hidden = {8};
  spec.color_hidden = {8};
  spec.gs_hidden = {8};
  spec.sh_degree = 1;
  return nerfgs::make_model(spec, seed);
}

inline nerfgs::Camera test_camera(int w = 8, int h = 8) {
  return nerfgs::look_at_camera({0, 0, -3}, {0, 0, 0}, {0, 1, 0}, real(0.8), w, h);
}

// Randomizes every trainable block so ReLU units and activations sit away
// from their kinks with high probability.
inline void randomize_params(nerfgs::Model& m, nerfgs::Rng& rng, real mlp_scale = real(0.4),
                             real table_scale = real(0.5)) {
  for (std::size_t b = 0; b < m.registry.count(); ++b) {
    nerfgs::ParamBlock& blk = m.registry.block(b);
    bool is_table = blk.name.rfind("hash_table_", 0) == 0;
    real s = is_table ? table_scale : mlp_scale;
    for (auto& v : blk.values) v = rng.uniform(-s, s);
  }
}

}  // namespace oracle
