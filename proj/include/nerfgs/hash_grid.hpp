#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/counters.hpp"
#include "nerfgs/param.hpp"
#include "nerfgs/rng.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

struct HashGridConfig {
  int levels = 16;
  int features_per_level = 2;
  std::vector<int> table_size_log2 = std::vector<int>(16, 15);
  int base_resolution = 16;
  real per_level_scale = real(1.26);  // finest level ~512 on a unit box
  Aabb bounds;

  int feature_dim() const { return levels * features_per_level; }

  int resolution(int level) const {
    return int(std::floor(real(base_resolution) * std::pow(per_level_scale, real(level))));
  }

  std::size_t table_size(int level) const { return std::size_t(1) << table_size_log2[level]; }

  void validate() const {
    require(levels >= 1 && features_per_level >= 1, Errc::usage, "hash grid: levels/features must be >= 1");
    require(int(table_size_log2.size()) == levels, Errc::usage, "hash grid: need one table_size_log2 per level");
    require(per_level_scale > 1, Errc::usage, "hash grid: per_level_scale must be > 1");
    for (int l = 1; l < levels; ++l)
      require(resolution(l) > resolution(l - 1), Errc::usage, "hash grid: resolutions must be strictly increasing");
  }
};

struct HashGridParams {
  std::vector<ParamBlock*> tables;  // one per level, shape [2^log2, features]
};

inline HashGridParams make_hash_grid(const HashGridConfig& cfg, ParamRegistry& reg, Rng& rng) {
  cfg.validate();
  HashGridParams p;
  for (int l = 0; l < cfg.levels; ++l) {
    ParamBlock& b = reg.add("hash_table_" + std::to_string(l),
                            {cfg.table_size(l), std::size_t(cfg.features_per_level)});
    for (auto& v : b.values) v = rng.uniform(real(-1e-4), real(1e-4));
    p.tables.push_back(&b);
  }
  return p;
}

// Vertex index for one level. Levels whose dense vertex grid fits in the
// table use collision-free row-major indexing; the rest use the fixed
// odd-prime XOR spatial hash.
inline std::uint32_t hash_index(int level, std::uint32_t cx, std::uint32_t cy, std::uint32_t cz,
                                const HashGridConfig& cfg) {
  const std::uint64_t grid_dim = std::uint64_t(cfg.resolution(level)) + 1;
  const std::size_t table = cfg.table_size(level);
  if (grid_dim * grid_dim * grid_dim <= table) {
    return std::uint32_t((std::uint64_t(cx) * grid_dim + cy) * grid_dim + cz);
  }
  std::uint32_t h = cx * 1u;
  h ^= cy * 2654435761u;
  h ^= cz * 805459861u;
  return h & std::uint32_t(table - 1);
}

// The 8-corner interpolation footprint of a point at one level.
struct LevelStencil {
  std::uint32_t idx[8];
  real w[8];
  real frac[3];
  int corner[3];  // base cell coordinates
};

inline LevelStencil level_stencil(const HashGridConfig& cfg, int level, const Vec3& unit_pos) {
  const int res = cfg.resolution(level);
  LevelStencil st;
  real pos[3];
  for (int a = 0; a < 3; ++a) {
    pos[a] = unit_pos[a] * real(res);
    int c = int(std::floor(pos[a]));
    c = clamp(c, 0, res - 1);
    st.corner[a] = c;
    st.frac[a] = pos[a] - real(c);
  }
  for (int i = 0; i < 8; ++i) {
    int dx = (i >> 2) & 1, dy = (i >> 1) & 1, dz = i & 1;
    real wx = dx ? st.frac[0] : 1 - st.frac[0];
    real wy = dy ? st.frac[1] : 1 - st.frac[1];
    real wz = dz ? st.frac[2] : 1 - st.frac[2];
    st.w[i] = wx * wy * wz;
    st.idx[i] = hash_index(level, std::uint32_t(st.corner[0] + dx), std::uint32_t(st.corner[1] + dy),
                           std::uint32_t(st.corner[2] + dz), cfg);
  }
  return st;
}

inline Vec3 to_unit_cube(const HashGridConfig& cfg, const Vec3& x) {
  require(x.finite(), Errc::non_finite, "hash encode: non-finite position");
  Vec3 p = cfg.bounds.clamp_point(x);
  Vec3 e = cfg.bounds.extent();
  return {(p.x - cfg.bounds.lo.x) / e.x, (p.y - cfg.bounds.lo.y) / e.y, (p.z - cfg.bounds.lo.z) / e.z};
}

inline std::vector<LevelStencil> compute_stencils(const HashGridConfig& cfg, const Vec3& x) {
  Vec3 u = to_unit_cube(cfg, x);
  std::vector<LevelStencil> st(cfg.levels);
  for (int l = 0; l < cfg.levels; ++l) st[l] = level_stencil(cfg, l, u);
  return st;
}

inline void encode_from_stencils(const HashGridParams& params, const HashGridConfig& cfg,
                                 const std::vector<LevelStencil>& st, real* out) {
  const int F = cfg.features_per_level;
  for (int l = 0; l < cfg.levels; ++l) {
    const real* table = params.tables[l]->values.data();
    real* o = out + std::size_t(l) * F;
    for (int f = 0; f < F; ++f) o[f] = 0;
    for (int i = 0; i < 8; ++i) {
      const real* entry = table + std::size_t(st[l].idx[i]) * F;
      const real w = st[l].w[i];
      for (int f = 0; f < F; ++f) o[f] += w * entry[f];
    }
  }
}

// f = H(x): per level, trilinear interpolation of the 8 corner entries,
// levels concatenated coarse-to-fine. Points outside the bounds are clamped
// to the box surface.
inline void encode(const HashGridParams& params, const HashGridConfig& cfg, const Vec3& x, real* out) {
  counters::hash_encode_calls()++;
  auto st = compute_stencils(cfg, x);
  encode_from_stencils(params, cfg, st, out);
}

inline std::vector<real> encode(const HashGridParams& params, const HashGridConfig& cfg, const Vec3& x) {
  std::vector<real> f(cfg.feature_dim());
  encode(params, cfg, x, f.data());
  return f;
}

// Scatters grad_f into per-level table gradient buffers by the stencil
// weights. grad_tables[l] must point at a buffer of table l's size.
inline void scatter_grad_from_stencils(const HashGridConfig& cfg, const std::vector<LevelStencil>& st,
                                       const real* grad_f, const std::vector<real*>& grad_tables) {
  const int F = cfg.features_per_level;
  for (int l = 0; l < cfg.levels; ++l) {
    const real* g = grad_f + std::size_t(l) * F;
    for (int i = 0; i < 8; ++i) {
      real* entry = grad_tables[l] + std::size_t(st[l].idx[i]) * F;
      const real w = st[l].w[i];
      for (int f = 0; f < F; ++f) entry[f] += w * g[f];
    }
  }
}

// Analytic derivative of the interpolant w.r.t. the world-space position.
// Defined on cell interiors; faces take the one-sided value of the cell
// chosen by floor(). Zero outside the bounds (clamp region).
inline Vec3 encode_grad_x(const HashGridParams& params, const HashGridConfig& cfg, const Vec3& x,
                          const real* grad_f) {
  const int F = cfg.features_per_level;
  Vec3 u = to_unit_cube(cfg, x);
  Vec3 ext = cfg.bounds.extent();
  Vec3 gx{0, 0, 0};
  const bool inside = cfg.bounds.contains(x);
  if (!inside) return gx;
  for (int l = 0; l < cfg.levels; ++l) {
    LevelStencil st = level_stencil(cfg, l, u);
    const real* table = params.tables[l]->values.data();
    const real* g = grad_f + std::size_t(l) * F;
    const real res = real(cfg.resolution(l));
    for (int i = 0; i < 8; ++i) {
      int d[3] = {(i >> 2) & 1, (i >> 1) & 1, i & 1};
      real wv[3];
      for (int a = 0; a < 3; ++a) wv[a] = d[a] ? st.frac[a] : 1 - st.frac[a];
      const real* entry = table + std::size_t(st.idx[i]) * F;
      real gdot = 0;
      for (int f = 0; f < F; ++f) gdot += g[f] * entry[f];
      for (int a = 0; a < 3; ++a) {
        real dw = (d[a] ? real(1) : real(-1));
        for (int b = 0; b < 3; ++b)
          if (b != a) dw *= wv[b];
        gx[a] += gdot * dw * res / ext[a];
      }
    }
  }
  return gx;
}

// Directional derivative of encode w.r.t. x along u (forward mode); the
// adjoint partner of encode_grad_x.
inline std::vector<real> encode_jvp_x(const HashGridParams& params, const HashGridConfig& cfg, const Vec3& x,
                                      const Vec3& dir) {
  const int F = cfg.features_per_level;
  std::vector<real> df(cfg.feature_dim(), 0);
  if (!cfg.bounds.contains(x)) return df;
  Vec3 u = to_unit_cube(cfg, x);
  Vec3 ext = cfg.bounds.extent();
  for (int l = 0; l < cfg.levels; ++l) {
    LevelStencil st = level_stencil(cfg, l, u);
    const real* table = params.tables[l]->values.data();
    const real res = real(cfg.resolution(l));
    for (int i = 0; i < 8; ++i) {
      int d[3] = {(i >> 2) & 1, (i >> 1) & 1, i & 1};
      real wv[3];
      for (int a = 0; a < 3; ++a) wv[a] = d[a] ? st.frac[a] : 1 - st.frac[a];
      real dwdt = 0;  // d w_i / d t along dir
      for (int a = 0; a < 3; ++a) {
        real dw = (d[a] ? real(1) : real(-1));
        for (int b = 0; b < 3; ++b)
          if (b != a) dw *= wv[b];
        dwdt += dw * res / ext[a] * dir[a];
      }
      const real* entry = table + std::size_t(st.idx[i]) * F;
      for (int f = 0; f < F; ++f) df[std::size_t(l) * F + f] += dwdt * entry[f];
    }
  }
  return df;
}

// Convenience wrapper matching the (grad_tables, grad_x) contract: scatters
// into the blocks' own grad arrays.
inline Vec3 encode_backward(const HashGridParams& params, const HashGridConfig& cfg, const Vec3& x,
                            const std::vector<real>& grad_f) {
  require(int(grad_f.size()) == cfg.feature_dim(), Errc::dimension_mismatch, "encode_backward: grad_f dim");
  auto st = compute_stencils(cfg, x);
  std::vector<real*> sinks(cfg.levels);
  for (int l = 0; l < cfg.levels; ++l) sinks[l] = params.tables[l]->grads.data();
  scatter_grad_from_stencils(cfg, st, grad_f.data(), sinks);
  return encode_grad_x(params, cfg, x, grad_f.data());
}

}  // namespace nerfgs
