#pragma once

#include <optional>
#include <vector>

#include "nerfgs/camera.hpp"
#include "nerfgs/common.hpp"
#include "nerfgs/gaussian.hpp"
#include "nerfgs/sh.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

struct Splat2D {
  Vec2 mean2d;       // pixels
  Sym2 cov2d;        // pixels^2, includes the 0.3 low-pass dilation
  real depth = 0;    // camera-space z
  Vec3 color;        // view-dependent SH color for this camera
  real opacity = 0;
  int source = -1;   // Gaussian id (sort tie-break)
  real radius = 0;   // 3-sigma screen radius
};

// Cached forward state needed to run project_backward.
struct ProjectCtx {
  Vec3 t;            // camera-space mean
  real xe = 0, ye = 0;
  bool clamped_x = false, clamped_y = false;
  Mat3 sigma;
  Vec3 dir;          // unit view direction, world space
  real dist = 0;     // |p_eff - camera center|
};

// EWA projection of one Gaussian. Returns false when culled (behind the
// camera, outside depth range, or fully off-screen at 3 sigma).
inline bool project_gaussian(const Vec3& p_eff, const GaussianAttributes& attrs, int sh_degree,
                             const Camera& cam, Splat2D& out, ProjectCtx* ctx = nullptr) {
  Vec3 t = cam.world_to_cam(p_eff);
  if (!(t.z > cam.near && t.z < cam.far)) return false;

  out.mean2d = {cam.fx * t.x / t.z + cam.cx, cam.fy * t.y / t.z + cam.cy};
  out.depth = t.z;

  // EWA Jacobian at the (fov-clamped) camera-space point.
  const real limx = real(1.3) * (real(cam.width) / (2 * cam.fx));
  const real limy = real(1.3) * (real(cam.height) / (2 * cam.fy));
  real txz = t.x / t.z, tyz = t.y / t.z;
  bool cx_clamp = txz < -limx || txz > limx;
  bool cy_clamp = tyz < -limy || tyz > limy;
  real xe = clamp(txz, -limx, limx) * t.z;
  real ye = clamp(tyz, -limy, limy) * t.z;
  const real rz = 1 / t.z, rz2 = rz * rz;
  // J = [fx rz, 0, -fx xe rz2; 0, fy rz, -fy ye rz2], A = J * R_w
  real j00 = cam.fx * rz, j02 = -cam.fx * xe * rz2;
  real j11 = cam.fy * rz, j12 = -cam.fy * ye * rz2;
  real A[2][3];
  for (int c = 0; c < 3; ++c) {
    A[0][c] = j00 * cam.rot(0, c) + j02 * cam.rot(2, c);
    A[1][c] = j11 * cam.rot(1, c) + j12 * cam.rot(2, c);
  }
  Mat3 sigma = covariance(attrs.rot, attrs.scale);
  real AS[2][3];
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) AS[r][c] = A[r][0] * sigma(0, c) + A[r][1] * sigma(1, c) + A[r][2] * sigma(2, c);
  out.cov2d.xx = AS[0][0] * A[0][0] + AS[0][1] * A[0][1] + AS[0][2] * A[0][2] + real(0.3);
  out.cov2d.xy = AS[0][0] * A[1][0] + AS[0][1] * A[1][1] + AS[0][2] * A[1][2];
  out.cov2d.yy = AS[1][0] * A[1][0] + AS[1][1] * A[1][1] + AS[1][2] * A[1][2] + real(0.3);

  const real mid = (out.cov2d.xx + out.cov2d.yy) / 2;
  const real disc = std::sqrt(std::max(real(0), mid * mid - out.cov2d.det()));
  out.radius = 3 * std::sqrt(std::max(real(0), mid + disc));
  if (out.mean2d.x + out.radius < 0 || out.mean2d.x - out.radius > real(cam.width) ||
      out.mean2d.y + out.radius < 0 || out.mean2d.y - out.radius > real(cam.height))
    return false;

  Vec3 cam_center = cam.center();
  Vec3 rel = p_eff - cam_center;
  real dist = rel.norm();
  Vec3 dir = dist > 0 ? rel / dist : Vec3{0, 0, 1};
  out.color = eval_sh(sh_degree, attrs.sh.data(), dir);
  out.opacity = attrs.opacity;

  if (ctx) {
    ctx->t = t;
    ctx->xe = xe;
    ctx->ye = ye;
    ctx->clamped_x = cx_clamp;
    ctx->clamped_y = cy_clamp;
    ctx->sigma = sigma;
    ctx->dir = dir;
    ctx->dist = dist;
  }
  return true;
}

// Gradients of the splat outputs w.r.t. the projection inputs. cov2d grads
// arrive per stored component (xy counted once). Accumulates into
// grad_p_eff / grad_rot / grad_scale / grad_sh; opacity passes through
// upstream unchanged.
inline void project_backward(const Vec3& p_eff, const GaussianAttributes& attrs, int sh_degree,
                             const Camera& cam, const ProjectCtx& ctx, const Vec2& g_mean2d,
                             const Sym2& g_cov2d, const Vec3& g_color, Vec3& grad_p_eff, Vec4& grad_rot,
                             Vec3& grad_scale, real* grad_sh) {
  const Vec3& t = ctx.t;
  const real rz = 1 / t.z, rz2 = rz * rz;
  const real j00 = cam.fx * rz, j02 = -cam.fx * ctx.xe * rz2;
  const real j11 = cam.fy * rz, j12 = -cam.fy * ctx.ye * rz2;
  real A[2][3];
  for (int c = 0; c < 3; ++c) {
    A[0][c] = j00 * cam.rot(0, c) + j02 * cam.rot(2, c);
    A[1][c] = j11 * cam.rot(1, c) + j12 * cam.rot(2, c);
  }
  // Matrix-form G2 with the shared off-diagonal split evenly.
  const real G2[2][2] = {{g_cov2d.xx, g_cov2d.xy / 2}, {g_cov2d.xy / 2, g_cov2d.yy}};

  // dL/dSigma = A^T G2 A (symmetric).
  Mat3 gsigma;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      real s = 0;
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) s += A[r][i] * G2[r][c] * A[c][j];
      gsigma(i, j) = s;
    }
  covariance_backward(attrs.rot, attrs.scale, gsigma, grad_rot, grad_scale);

  // dL/dA = 2 G2 A Sigma.
  real GA[2][3];
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) {
      real s = 0;
      for (int k = 0; k < 2; ++k)
        for (int m = 0; m < 3; ++m) s += 2 * G2[r][k] * A[k][m] * ctx.sigma(m, c);
      GA[r][c] = s;
    }
  // dL/dJ entries via A = J R_w.
  real gj00 = 0, gj02 = 0, gj11 = 0, gj12 = 0;
  for (int c = 0; c < 3; ++c) {
    gj00 += GA[0][c] * cam.rot(0, c);
    gj02 += GA[0][c] * cam.rot(2, c);
    gj11 += GA[1][c] * cam.rot(1, c);
    gj12 += GA[1][c] * cam.rot(2, c);
  }
  // J's dependence on t (xe/ye fold in the fov clamp).
  Vec3 gt{0, 0, 0};
  gt.z += gj00 * (-cam.fx * rz2) + gj11 * (-cam.fy * rz2);
  gt.z += gj02 * (2 * cam.fx * ctx.xe * rz2 * rz) + gj12 * (2 * cam.fy * ctx.ye * rz2 * rz);
  real gxe = gj02 * (-cam.fx * rz2);
  real gye = gj12 * (-cam.fy * rz2);
  if (ctx.clamped_x)
    gt.z += gxe * (ctx.xe * rz);  // xe = +/-lim * t.z
  else
    gt.x += gxe;
  if (ctx.clamped_y)
    gt.z += gye * (ctx.ye * rz);
  else
    gt.y += gye;

  // mean2d = (fx tx/tz + cx, fy ty/tz + cy), unclamped.
  gt.x += g_mean2d.x * cam.fx * rz;
  gt.z += g_mean2d.x * (-cam.fx * t.x * rz2);
  gt.y += g_mean2d.y * cam.fy * rz;
  gt.z += g_mean2d.y * (-cam.fy * t.y * rz2);

  grad_p_eff += cam.rot.transposed_mul(gt);

  // Color path: SH coefficients and view direction.
  Vec3 gdir = eval_sh_backward(sh_degree, attrs.sh.data(), ctx.dir, g_color, grad_sh);
  if (ctx.dist > 0) {
    real along = ctx.dir.dot(gdir);
    grad_p_eff += (gdir - ctx.dir * along) / ctx.dist;
  }
}

// Ids of Gaussians whose effective position lands inside the view frustum
// (depth range and image bounds) with decoded opacity >= tau.
inline std::vector<int> visible_high_opacity(const GaussianSet& set,
                                             const std::vector<GaussianAttributes>& attrs, const Camera& cam,
                                             real tau_op) {
  std::vector<int> result;
  for (std::size_t i = 0; i < set.size(); ++i) {
    Vec3 pe = set.effective_position(i);
    Vec3 t = cam.world_to_cam(pe);
    if (!(t.z > cam.near && t.z < cam.far)) continue;
    Vec2 pix{cam.fx * t.x / t.z + cam.cx, cam.fy * t.y / t.z + cam.cy};
    if (pix.x < 0 || pix.x >= real(cam.width) || pix.y < 0 || pix.y >= real(cam.height)) continue;
    if (attrs[i].opacity < tau_op) continue;
    result.push_back(set.ids[i]);
  }
  return result;
}

}  // namespace nerfgs
