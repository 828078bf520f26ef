#pragma once

#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/model.hpp"
#include "nerfgs/nerf.hpp"
#include "nerfgs/project.hpp"
#include "nerfgs/rng.hpp"

namespace nerfgs {

// One GS-Ray: camera origin through a visible high-opacity Gaussian center
// (Eq. 8), with the pixel its source Gaussian projects to.
struct GsRay {
  Ray ray;
  int gauss_index = -1;  // -1 for random rays (no source Gaussian)
  int px = 0, py = 0;
  real source_t = 0;  // distance of the source Gaussian along the ray
};

inline std::vector<int> visible_high_opacity_indices(const GaussianSet& set,
                                                     const std::vector<DecodeCtx>& ctxs, const Camera& cam,
                                                     real tau_op) {
  std::vector<int> result;
  for (std::size_t i = 0; i < set.size(); ++i) {
    Vec3 t = cam.world_to_cam(set.effective_position(i));
    if (!(t.z > cam.near && t.z < cam.far)) continue;
    Vec2 pix{cam.fx * t.x / t.z + cam.cx, cam.fy * t.y / t.z + cam.cy};
    if (pix.x < 0 || pix.x >= real(cam.width) || pix.y < 0 || pix.y >= real(cam.height)) continue;
    if (ctxs[i].attrs.opacity < tau_op) continue;
    result.push_back(int(i));
  }
  return result;
}

inline GsRay make_gs_ray(const Model& m, const Camera& cam, const Aabb& bounds, int gauss_index) {
  GsRay r;
  r.gauss_index = gauss_index;
  Vec3 o = cam.center();
  Vec3 pe = m.gaussians.effective_position(std::size_t(gauss_index));
  Vec3 rel = pe - o;
  r.source_t = rel.norm();
  r.ray.origin = o;
  r.ray.dir = rel / r.source_t;
  real t0, t1;
  if (bounds.intersect(o, r.ray.dir, t0, t1)) {
    r.ray.near = std::max(t0, real(1e-3));
    r.ray.far = std::max(t1, r.ray.near + real(1e-3));
  } else {
    r.ray.near = cam.near;
    r.ray.far = cam.far;
  }
  Vec2 pix;
  real depth;
  cam.project(pe, pix, depth);
  r.px = clamp(int(pix.x), 0, cam.width - 1);
  r.py = clamp(int(pix.y), 0, cam.height - 1);
  return r;
}

// min(k, |candidates|) rays without replacement through visible Gaussians
// with opacity >= tau_op. empty_counter ticks when no candidate exists.
inline std::vector<GsRay> select_gs_rays(const Model& m, const std::vector<DecodeCtx>& ctxs,
                                         const Camera& cam, const Aabb& bounds, int k, real tau_op, Rng& rng,
                                         std::size_t* empty_counter = nullptr) {
  require(k >= 0, Errc::usage, "select_gs_rays: k must be >= 0");
  std::vector<int> cand = visible_high_opacity_indices(m.gaussians, ctxs, cam, tau_op);
  if (cand.empty()) {
    if (empty_counter) (*empty_counter)++;
    return {};
  }
  const int take = std::min<std::size_t>(std::size_t(k), cand.size());
  std::vector<GsRay> rays;
  rays.reserve(take);
  for (int i = 0; i < take; ++i) {
    std::size_t j = std::size_t(i) + rng.below(cand.size() - i);
    std::swap(cand[i], cand[j]);
    rays.push_back(make_gs_ray(m, cam, bounds, cand[i]));
  }
  return rays;
}

// The no_gs_rays ablation: the same count of rays through uniformly random
// pixels (no source Gaussian, so the opacity alignment term has no pairing).
inline std::vector<GsRay> select_random_rays(const Camera& cam, const Aabb& bounds, int k, Rng& rng) {
  std::vector<GsRay> rays;
  rays.reserve(k);
  for (int i = 0; i < k; ++i) {
    GsRay r;
    r.px = int(rng.below(std::uint64_t(cam.width)));
    r.py = int(rng.below(std::uint64_t(cam.height)));
    r.ray.origin = cam.center();
    r.ray.dir = cam.pixel_dir(real(r.px), real(r.py));
    real t0, t1;
    if (bounds.intersect(r.ray.origin, r.ray.dir, t0, t1) && std::max(t0, real(1e-3)) < t1) {
      r.ray.near = std::max(t0, real(1e-3));
      r.ray.far = t1;
    } else {
      r.ray.near = cam.near;
      r.ray.far = cam.far;
    }
    rays.push_back(r);
  }
  return rays;
}

}  // namespace nerfgs
