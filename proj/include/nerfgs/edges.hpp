#pragma once

#include <algorithm>
#include <vector>

#include "nerfgs/camera.hpp"
#include "nerfgs/common.hpp"
#include "nerfgs/image.hpp"
#include "nerfgs/nerf.hpp"
#include "nerfgs/rng.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

struct EdgeMask {
  int width = 0, height = 0;
  int view_id = -1;
  real threshold = 0;
  std::vector<char> mask;  // row-major, 1 = edge pixel

  bool at(int x, int y) const { return mask[std::size_t(y) * width + x] != 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (char c : mask) n += c != 0;
    return n;
  }
};

inline real luminance(const Vec3& c) {
  return real(0.299) * c.x + real(0.587) * c.y + real(0.114) * c.z;
}

// 3x3 Sobel gradient magnitude on luminance; a pixel is an edge iff the
// magnitude exceeds the threshold. threshold < 0 means "use the 80th
// percentile of this image's magnitudes". Border pixels are never marked.
inline EdgeMask detect_edges(const Image& img, real threshold = -1, int view_id = -1) {
  EdgeMask em;
  em.width = img.width;
  em.height = img.height;
  em.view_id = view_id;
  em.mask.assign(img.size(), 0);

  std::vector<real> lum(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) lum[i] = luminance(img.pixels[i]);
  auto L = [&](int x, int y) { return lum[std::size_t(y) * img.width + x]; };

  std::vector<real> mag(img.size(), 0);
  std::vector<real> interior;
  interior.reserve(img.size());
  for (int y = 1; y + 1 < img.height; ++y)
    for (int x = 1; x + 1 < img.width; ++x) {
      real gx = (L(x + 1, y - 1) + 2 * L(x + 1, y) + L(x + 1, y + 1)) -
                (L(x - 1, y - 1) + 2 * L(x - 1, y) + L(x - 1, y + 1));
      real gy = (L(x - 1, y + 1) + 2 * L(x, y + 1) + L(x + 1, y + 1)) -
                (L(x - 1, y - 1) + 2 * L(x, y - 1) + L(x + 1, y - 1));
      mag[std::size_t(y) * img.width + x] = std::sqrt(gx * gx + gy * gy);
      interior.push_back(mag[std::size_t(y) * img.width + x]);
    }

  if (threshold < 0) {
    if (interior.empty()) {
      threshold = 0;
    } else {
      std::vector<real> sorted = interior;
      std::size_t k = std::size_t(real(0.8) * real(sorted.size() - 1));
      std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
      threshold = sorted[k];
    }
  }
  em.threshold = threshold;
  for (std::size_t i = 0; i < img.size(); ++i) em.mask[i] = mag[i] > threshold ? 1 : 0;
  return em;
}

struct InitBudget {
  int total_points = 5000;
  real edge_ratio = real(0.8);

  void validate() const {
    require(total_points >= 0, Errc::usage, "init budget: total must be >= 0");
    require(edge_ratio >= 0 && edge_ratio <= 1, Errc::usage, "init budget: edge_ratio must be in [0,1]");
  }
};

struct RayDraw {
  int view = -1;
  int px = 0, py = 0;
  Ray ray;
  bool from_edge = false;
  bool hits_bounds = false;
};

// floor(edge_ratio * total) draws from the edge pixel pool across all views
// (without replacement while the pool lasts), the rest uniform over all
// pixels with replacement. An empty edge pool falls back to the random pool.
inline std::vector<RayDraw> sample_init_rays(const std::vector<Camera>& cams,
                                             const std::vector<EdgeMask>& masks, const Aabb& bounds,
                                             const InitBudget& budget, Rng& rng) {
  require(!cams.empty(), Errc::usage, "sample_init_rays: empty view set");
  require(cams.size() == masks.size(), Errc::dimension_mismatch, "sample_init_rays: views/masks mismatch");
  budget.validate();

  struct Pix {
    int view, x, y;
  };
  std::vector<Pix> edge_pool;
  for (std::size_t v = 0; v < masks.size(); ++v)
    for (int y = 0; y < masks[v].height; ++y)
      for (int x = 0; x < masks[v].width; ++x)
        if (masks[v].at(x, y)) edge_pool.push_back({int(v), x, y});

  auto make_draw = [&](int view, int x, int y, bool from_edge) {
    RayDraw d;
    d.view = view;
    d.px = x;
    d.py = y;
    d.from_edge = from_edge;
    d.ray.origin = cams[view].center();
    d.ray.dir = cams[view].pixel_dir(real(x), real(y));
    real t0, t1;
    if (bounds.intersect(d.ray.origin, d.ray.dir, t0, t1) && std::max(t0, real(1e-3)) < t1) {
      d.ray.near = std::max(t0, real(1e-3));
      d.ray.far = t1;
      d.hits_bounds = true;
    } else {
      d.ray.near = cams[view].near;
      d.ray.far = cams[view].far;
      d.hits_bounds = false;
    }
    return d;
  };

  auto random_pix = [&]() {
    int view = int(rng.below(cams.size()));
    int x = int(rng.below(std::uint64_t(cams[view].width)));
    int y = int(rng.below(std::uint64_t(cams[view].height)));
    return Pix{view, x, y};
  };

  std::vector<RayDraw> draws;
  draws.reserve(budget.total_points);
  const int edge_count = int(std::floor(budget.edge_ratio * real(budget.total_points)));

  if (edge_pool.empty()) {
    for (int i = 0; i < edge_count; ++i) {
      Pix p = random_pix();
      draws.push_back(make_draw(p.view, p.x, p.y, false));
    }
  } else if (std::size_t(edge_count) <= edge_pool.size()) {
    // Partial Fisher-Yates: uniform without replacement.
    for (int i = 0; i < edge_count; ++i) {
      std::size_t j = std::size_t(i) + rng.below(edge_pool.size() - i);
      std::swap(edge_pool[i], edge_pool[j]);
      draws.push_back(make_draw(edge_pool[i].view, edge_pool[i].x, edge_pool[i].y, true));
    }
  } else {
    for (int i = 0; i < edge_count; ++i) {
      const Pix& p = edge_pool[rng.below(edge_pool.size())];
      draws.push_back(make_draw(p.view, p.x, p.y, true));
    }
  }

  for (int i = edge_count; i < budget.total_points; ++i) {
    Pix p = random_pix();
    draws.push_back(make_draw(p.view, p.x, p.y, false));
  }
  return draws;
}

}  // namespace nerfgs
