#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/model.hpp"
#include "nerfgs/rng.hpp"
#include "nerfgs/threading.hpp"

namespace nerfgs {

// Mean nearest-neighbor distance of the current Gaussian set (brute force;
// desk-scale sets stay small). Returns 0 for fewer than 2 points.
inline real mean_nn_distance(const std::vector<Vec3>& pts, ThreadPool* pool = nullptr) {
  const std::size_t n = pts.size();
  if (n < 2) return 0;
  std::vector<real> nn(n);
  auto body = [&](int, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      real best = std::numeric_limits<real>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        Vec3 d = pts[i] - pts[j];
        best = std::min(best, d.dot(d));
      }
      nn[i] = std::sqrt(best);
    }
  };
  if (pool)
    pool->parallel_for(n, body);
  else
    body(0, 0, n);
  real sum = 0;
  for (real v : nn) sum += v;
  return sum / real(n);
}

struct GrowthCandidate {
  Vec3 pos;
  real alpha_nerf = 0;
};

// NeRF-assisted growth: candidates with alpha_nerf >= threshold, sorted by
// descending opacity, greedily accepted when at least r_min from every
// existing and every already-accepted Gaussian, capped at max_new. Returns
// indices into `candidates`.
inline std::vector<int> densify_from_nerf(const std::vector<GrowthCandidate>& candidates,
                                          const std::vector<Vec3>& existing, int max_new,
                                          real alpha_threshold, real r_min) {
  require(r_min > 0, Errc::usage, "densify_from_nerf: r_min must be > 0");
  std::vector<int> order;
  order.reserve(candidates.size());
  for (int i = 0; i < int(candidates.size()); ++i)
    if (candidates[i].alpha_nerf >= alpha_threshold) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (candidates[a].alpha_nerf != candidates[b].alpha_nerf)
      return candidates[a].alpha_nerf > candidates[b].alpha_nerf;
    return a < b;
  });

  const real r2 = r_min * r_min;
  std::vector<int> accepted;
  for (int idx : order) {
    if (int(accepted.size()) >= max_new) break;
    const Vec3& p = candidates[idx].pos;
    bool ok = true;
    for (const Vec3& q : existing) {
      Vec3 d = p - q;
      if (d.dot(d) < r2) {
        ok = false;
        break;
      }
    }
    if (ok)
      for (int aidx : accepted) {
        Vec3 d = p - candidates[aidx].pos;
        if (d.dot(d) < r2) {
          ok = false;
          break;
        }
      }
    if (ok) accepted.push_back(idx);
  }
  return accepted;
}

// 3DGS pruning: drop Gaussians with decoded opacity < tau; survivors keep
// their ids.
inline std::vector<char> prune_mask(const std::vector<DecodeCtx>& ctxs, real tau_prune) {
  require(tau_prune > 0 && tau_prune < 1, Errc::usage, "prune: tau must be in (0,1)");
  std::vector<char> keep(ctxs.size(), 1);
  for (std::size_t i = 0; i < ctxs.size(); ++i)
    if (ctxs[i].attrs.opacity < tau_prune) keep[i] = 0;
  return keep;
}

// Accumulated screen-space position gradients between densify events
// (3DGS adaptive density control statistics).
struct GradDensifyState {
  std::vector<real> grad2d_sum;
  std::vector<int> seen;

  void reset(std::size_t n) {
    grad2d_sum.assign(n, 0);
    seen.assign(n, 0);
  }

  void accumulate(const GsForward& fwd, const std::vector<SplatGrad>& sgrads) {
    for (std::size_t s = 0; s < sgrads.size(); ++s) {
      int gi = fwd.splat_gauss[s];
      real n = std::sqrt(sgrads[s].mean2d.x * sgrads[s].mean2d.x + sgrads[s].mean2d.y * sgrads[s].mean2d.y);
      grad2d_sum[gi] += n;
      seen[gi]++;
    }
  }
};

struct GradDensifyResult {
  int cloned = 0;
  int split = 0;
};

// 3DGS clone/split driven by mean accumulated 2D position gradients: small
// Gaussians are cloned in place, large ones are replaced by two children
// sampled from N(p_eff, Sigma) with scale divided by 1.6.
inline GradDensifyResult gradient_densify(Model& m, const std::vector<DecodeCtx>& ctxs,
                                          GradDensifyState& state, real tau_grad, real split_scale_threshold,
                                          Rng& rng) {
  GradDensifyResult res;
  const std::size_t n = m.gaussians.size();
  std::vector<char> keep(n, 1);
  struct NewGauss {
    Vec3 p;
    std::vector<real> dfea;
    real scale_offset;
  };
  std::vector<NewGauss> born;
  const int F = m.feature_dim();
  static const real kSplitShrink = std::log(real(1.6));

  for (std::size_t i = 0; i < n; ++i) {
    if (state.seen[i] == 0) continue;
    real mean_grad = state.grad2d_sum[i] / real(state.seen[i]);
    if (!(mean_grad > tau_grad)) continue;
    const GaussianAttributes& a = ctxs[i].attrs;
    real max_scale = std::max(a.scale.x, std::max(a.scale.y, a.scale.z));
    const real* dfrow = m.gaussians.delta_fea->values.data() + i * F;
    if (max_scale <= split_scale_threshold) {
      // Clone keeps the parent; the copy diverges through blend ordering.
      born.push_back({m.gaussians.positions[i], {dfrow, dfrow + F}, m.scale_offsets[i]});
      res.cloned++;
    } else {
      Mat3 R = quat_to_rot(a.rot);
      Vec3 pe = m.gaussians.effective_position(i);
      for (int c = 0; c < 2; ++c) {
        Vec3 z{rng.normal(), rng.normal(), rng.normal()};
        Vec3 offs = R * Vec3{z.x * a.scale.x, z.y * a.scale.y, z.z * a.scale.z};
        born.push_back({pe + offs, {dfrow, dfrow + F}, m.scale_offsets[i] - kSplitShrink});
      }
      keep[i] = 0;
      res.split++;
    }
  }
  if (res.split > 0) m.keep_gaussians(keep);
  for (const auto& nb : born) {
    m.append_gaussian(nb.p);
    std::size_t row = m.gaussians.size() - 1;
    std::copy(nb.dfea.begin(), nb.dfea.end(), m.gaussians.delta_fea->values.data() + row * F);
    m.scale_offsets[row] = nb.scale_offset;
  }
  return res;
}

}  // namespace nerfgs
