#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/image.hpp"
#include "nerfgs/project.hpp"
#include "nerfgs/threading.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

// 3DGS blending conventions; gradient-check fixtures relax the cutoffs to
// keep the map smooth around the probe point.
struct RasterizeOptions {
  real alpha_clamp = real(0.99);
  real alpha_cutoff = real(1) / 255;
  real transmittance_stop = real(1e-4);
  bool bbox_skip = true;   // skip pixels outside the splat's 3-sigma box
  int tile_size = 0;       // 0 = reference per-pixel path, else e.g. 16
};

struct PixelContrib {
  std::int32_t splat;  // index into the depth-sorted order
  real alpha;
  std::uint8_t clamped;
};

struct RasterRecords {
  int width = 0, height = 0;
  std::size_t splat_count = 0;
  std::vector<std::int32_t> order;  // depth-sorted splat indices
  std::vector<std::vector<PixelContrib>> contribs;  // per pixel
  std::vector<real> final_T;
  std::size_t skipped_singular = 0;
};

inline std::vector<std::int32_t> depth_sorted_order(const std::vector<Splat2D>& splats) {
  std::vector<std::int32_t> order(splats.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
    return splats[a].source < splats[b].source;
  });
  return order;
}

namespace detail {

struct SplatInverse {
  real ixx, ixy, iyy;
  bool ok;
};

inline SplatInverse invert_cov2d(const Sym2& c) {
  real det = c.det();
  if (!(det > 0) || !std::isfinite(det)) return {0, 0, 0, false};
  return {c.yy / det, -c.xy / det, c.xx / det, true};
}

// Front-to-back blend of one pixel over a candidate splat sequence.
template <class Iter>
inline void blend_pixel(const std::vector<Splat2D>& splats, Iter begin, Iter end, real px, real py,
                        const std::vector<SplatInverse>& inv, const RasterizeOptions& opt, const Vec3& bg,
                        Vec3& out, std::vector<PixelContrib>& contribs, real& final_T) {
  Vec3 c{0, 0, 0};
  real T = 1;
  for (Iter it = begin; it != end; ++it) {
    const std::int32_t si = *it;
    const Splat2D& s = splats[si];
    if (!inv[si].ok) continue;
    const real dx = px - s.mean2d.x, dy = py - s.mean2d.y;
    if (opt.bbox_skip && (std::abs(dx) > s.radius || std::abs(dy) > s.radius)) continue;
    const real power = real(-0.5) * (inv[si].ixx * dx * dx + 2 * inv[si].ixy * dx * dy + inv[si].iyy * dy * dy);
    if (power > 0) continue;
    real a = s.opacity * std::exp(power);
    bool clamped = a > opt.alpha_clamp;
    if (clamped) a = opt.alpha_clamp;
    if (a < opt.alpha_cutoff) continue;
    c += s.color * (T * a);
    contribs.push_back({si, a, std::uint8_t(clamped)});
    T *= (1 - a);
    if (T < opt.transmittance_stop) break;
  }
  out = c + bg * T;
  final_T = T;
}

}  // namespace detail

// Eq. 3 compositing over globally depth-sorted splats (ties broken by
// ascending source id). Returns the image plus per-pixel contribution
// records for the backward pass. The optional 16x16 tile path is
// bit-identical to the reference path.
inline Image rasterize(const std::vector<Splat2D>& splats, const Camera& cam, const Vec3& background,
                       RasterRecords& rec, const RasterizeOptions& opt = {}, ThreadPool* pool = nullptr) {
  for (const auto& s : splats)
    require(std::isfinite(s.mean2d.x) && std::isfinite(s.mean2d.y) && std::isfinite(s.opacity),
            Errc::non_finite, "rasterize: non-finite splat");
  const int W = cam.width, H = cam.height;
  Image img(W, H);
  rec.width = W;
  rec.height = H;
  rec.splat_count = splats.size();
  rec.order = depth_sorted_order(splats);
  rec.contribs.assign(std::size_t(W) * H, {});
  rec.final_T.assign(std::size_t(W) * H, real(1));
  rec.skipped_singular = 0;

  std::vector<detail::SplatInverse> inv(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i) {
    inv[i] = detail::invert_cov2d(splats[i].cov2d);
    if (!inv[i].ok) rec.skipped_singular++;
  }

  if (opt.tile_size > 0) {
    const int tile = opt.tile_size;
    const int tx_count = (W + tile - 1) / tile;
    const int ty_count = (H + tile - 1) / tile;
    auto run_tile = [&](int tx, int ty) {
      const real x0 = real(tx * tile), x1 = real(std::min(W, (tx + 1) * tile));
      const real y0 = real(ty * tile), y1 = real(std::min(H, (ty + 1) * tile));
      std::vector<std::int32_t> local;
      for (std::int32_t si : rec.order) {
        const Splat2D& s = splats[si];
        if (opt.bbox_skip &&
            (s.mean2d.x + s.radius < x0 + real(0.5) || s.mean2d.x - s.radius > x1 - real(0.5) ||
             s.mean2d.y + s.radius < y0 + real(0.5) || s.mean2d.y - s.radius > y1 - real(0.5)))
          continue;
        local.push_back(si);
      }
      for (int y = ty * tile; y < std::min(H, (ty + 1) * tile); ++y)
        for (int x = tx * tile; x < std::min(W, (tx + 1) * tile); ++x) {
          std::size_t pi = std::size_t(y) * W + x;
          detail::blend_pixel(splats, local.begin(), local.end(), real(x) + real(0.5), real(y) + real(0.5),
                              inv, opt, background, img.pixels[pi], rec.contribs[pi], rec.final_T[pi]);
        }
    };
    auto body = [&](int, std::size_t begin, std::size_t end) {
      for (std::size_t t = begin; t < end; ++t) run_tile(int(t % tx_count), int(t / tx_count));
    };
    if (pool)
      pool->parallel_for(std::size_t(tx_count) * ty_count, body);
    else
      body(0, 0, std::size_t(tx_count) * ty_count);
  } else {
    auto body = [&](int, std::size_t rbegin, std::size_t rend) {
      for (std::size_t y = rbegin; y < rend; ++y)
        for (int x = 0; x < W; ++x) {
          std::size_t pi = y * W + x;
          detail::blend_pixel(splats, rec.order.begin(), rec.order.end(), real(x) + real(0.5),
                              real(y) + real(0.5), inv, opt, background, img.pixels[pi], rec.contribs[pi],
                              rec.final_T[pi]);
        }
    };
    if (pool)
      pool->parallel_for(std::size_t(H), body);
    else
      body(0, 0, std::size_t(H));
  }
  return img;
}

struct SplatGrad {
  Vec2 mean2d;
  Sym2 cov2d;  // per stored component; xy counted once
  Vec3 color;
  real opacity = 0;
};

// Exact gradients of the Eq. 3 blend, including the transmittance product
// and the background term, from the forward records.
inline void rasterize_backward(const std::vector<Splat2D>& splats, const RasterRecords& rec,
                               const Image& grad_image, const Vec3& background,
                               std::vector<SplatGrad>& grads, ThreadPool* pool = nullptr) {
  require(rec.splat_count == splats.size() && rec.width * rec.height == int(grad_image.size()),
          Errc::stale_records, "rasterize_backward: records do not match this forward pass");
  grads.assign(splats.size(), SplatGrad{});

  std::vector<detail::SplatInverse> inv(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i) inv[i] = detail::invert_cov2d(splats[i].cov2d);

  const int W = rec.width, H = rec.height;
  const int workers = pool ? pool->workers() : 1;
  std::vector<std::vector<SplatGrad>> partial(workers);

  auto body = [&](int w, std::size_t rbegin, std::size_t rend) {
    auto& acc = partial[w];
    acc.assign(splats.size(), SplatGrad{});
    std::vector<real> Ts;
    for (std::size_t y = rbegin; y < rend; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t pi = y * W + x;
        const auto& contribs = rec.contribs[pi];
        if (contribs.empty()) continue;
        const Vec3 gpix = grad_image.pixels[pi];
        if (gpix.x == 0 && gpix.y == 0 && gpix.z == 0) continue;
        const int n = int(contribs.size());
        Ts.resize(n);
        real T = 1;
        for (int i = 0; i < n; ++i) {
          Ts[i] = T;
          T *= (1 - contribs[i].alpha);
        }
        // Suffix recurrences as in the volume-render backward.
        Vec3 Q{0, 0, 0};
        real R = 1;  // product of (1-a) over the suffix
        for (int i = n - 1; i >= 0; --i) {
          const PixelContrib& ct = contribs[i];
          const Splat2D& s = splats[ct.splat];
          SplatGrad& g = acc[ct.splat];
          const real a = ct.alpha;
          Vec3 dCda = (s.color - Q - background * R) * Ts[i];
          real ga = dCda.dot(gpix);
          g.color += gpix * (Ts[i] * a);
          Q = s.color * a + Q * (1 - a);
          R *= (1 - a);
          if (ct.clamped) continue;  // flat region of min(.., clamp)
          const real epow = a / s.opacity;
          g.opacity += ga * epow;
          const real gp = ga * a;  // d alpha / d power = alpha
          const real dx = (real(x) + real(0.5)) - s.mean2d.x;
          const real dy = (real(y) + real(0.5)) - s.mean2d.y;
          const real vx = inv[ct.splat].ixx * dx + inv[ct.splat].ixy * dy;
          const real vy = inv[ct.splat].ixy * dx + inv[ct.splat].iyy * dy;
          g.mean2d.x += gp * vx;
          g.mean2d.y += gp * vy;
          g.cov2d.xx += real(0.5) * gp * vx * vx;
          g.cov2d.yy += real(0.5) * gp * vy * vy;
          g.cov2d.xy += gp * vx * vy;
        }
      }
  };
  if (pool)
    pool->parallel_for(std::size_t(H), body);
  else
    body(0, 0, std::size_t(H));

  for (int w = 0; w < workers; ++w) {
    if (partial[w].empty()) continue;
    for (std::size_t i = 0; i < splats.size(); ++i) {
      grads[i].mean2d = grads[i].mean2d + partial[w][i].mean2d;
      grads[i].cov2d.xx += partial[w][i].cov2d.xx;
      grads[i].cov2d.xy += partial[w][i].cov2d.xy;
      grads[i].cov2d.yy += partial[w][i].cov2d.yy;
      grads[i].color += partial[w][i].color;
      grads[i].opacity += partial[w][i].opacity;
    }
  }
}

}  // namespace nerfgs
