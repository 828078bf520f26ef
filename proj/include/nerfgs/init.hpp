#pragma once

#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/edges.hpp"
#include "nerfgs/nerf.hpp"
#include "nerfgs/threading.hpp"

namespace nerfgs {

struct InitGaussiansResult {
  std::vector<Vec3> positions;   // one per kept ray, p = o + z * d
  std::vector<int> source_draw;  // index into the draw list
  std::size_t dropped = 0;       // rays below the opacity floor
};

// Places one Gaussian per ray at the pretrained NeRF's median depth.
// Rays whose accumulated opacity stays below the floor are dropped; if every
// ray drops, the NeRF is unusable and this is an error.
inline InitGaussiansResult init_gaussians(const NerfField& nerf, const std::vector<RayDraw>& draws,
                                          int samples_per_ray, real opacity_floor, std::uint64_t seed,
                                          ThreadPool* pool = nullptr) {
  InitGaussiansResult res;
  std::vector<char> keep(draws.size(), 0);
  std::vector<Vec3> pos(draws.size());

  auto body = [&](int, std::size_t begin, std::size_t end) {
    NerfRayWorkspace ws;
    for (std::size_t i = begin; i < end; ++i) {
      if (!draws[i].hits_bounds) continue;
      Rng rng = Rng::split(seed, 0x1217, i);
      render_ray_cached(nerf, draws[i].ray, samples_per_ray, rng, SampleMode::stratified, ws);
      if (ws.out.accumulated_opacity < opacity_floor) continue;
      real z = ws.out.median_depth;
      pos[i] = draws[i].ray.origin + draws[i].ray.dir * z;
      keep[i] = 1;
    }
  };
  if (pool)
    pool->parallel_for(draws.size(), body);
  else
    body(0, 0, draws.size());

  for (std::size_t i = 0; i < draws.size(); ++i) {
    if (keep[i]) {
      res.positions.push_back(pos[i]);
      res.source_draw.push_back(int(i));
    } else {
      res.dropped++;
    }
  }
  if (!draws.empty() && res.positions.empty())
    fail(Errc::untrained_nerf, "init_gaussians: all " + std::to_string(res.dropped) +
                                   " rays fell below the opacity floor; is the NeRF branch trained?");
  return res;
}

}  // namespace nerfgs
