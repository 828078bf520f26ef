#pragma once

#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

// Real spherical harmonics through degree 3 in the 3DGS basis ordering and
// sign convention. d must be unit length.

inline constexpr real kSH0 = real(0.28209479177387814);
inline constexpr real kSH1 = real(0.4886025119029199);
inline constexpr real kSH2[5] = {real(1.0925484305920792), real(-1.0925484305920792),
                                 real(0.31539156525252005), real(-1.0925484305920792),
                                 real(0.5462742152960396)};
inline constexpr real kSH3[7] = {real(-0.5900435899266435), real(2.890611442640554),
                                 real(-0.4570457994644658), real(0.3731763325901154),
                                 real(-0.4570457994644658), real(1.445305721320277),
                                 real(-0.5900435899266435)};

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

inline void sh_basis(int degree, const Vec3& d, real* out) {
  const real x = d.x, y = d.y, z = d.z;
  out[0] = kSH0;
  if (degree < 1) return;
  out[1] = -kSH1 * y;
  out[2] = kSH1 * z;
  out[3] = -kSH1 * x;
  if (degree < 2) return;
  const real xx = x * x, yy = y * y, zz = z * z;
  out[4] = kSH2[0] * x * y;
  out[5] = kSH2[1] * y * z;
  out[6] = kSH2[2] * (2 * zz - xx - yy);
  out[7] = kSH2[3] * x * z;
  out[8] = kSH2[4] * (xx - yy);
  if (degree < 3) return;
  out[9] = kSH3[0] * y * (3 * xx - yy);
  out[10] = kSH3[1] * x * y * z;
  out[11] = kSH3[2] * y * (4 * zz - xx - yy);
  out[12] = kSH3[3] * z * (2 * zz - 3 * xx - 3 * yy);
  out[13] = kSH3[4] * x * (4 * zz - xx - yy);
  out[14] = kSH3[5] * z * (xx - yy);
  out[15] = kSH3[6] * x * (xx - yy);
}

// d(basis_k)/d(direction) for each of the (degree+1)^2 basis values.
inline void sh_basis_grad(int degree, const Vec3& d, Vec3* out) {
  const real x = d.x, y = d.y, z = d.z;
  out[0] = {0, 0, 0};
  if (degree < 1) return;
  out[1] = {0, -kSH1, 0};
  out[2] = {0, 0, kSH1};
  out[3] = {-kSH1, 0, 0};
  if (degree < 2) return;
  out[4] = {kSH2[0] * y, kSH2[0] * x, 0};
  out[5] = {0, kSH2[1] * z, kSH2[1] * y};
  out[6] = {kSH2[2] * (-2 * x), kSH2[2] * (-2 * y), kSH2[2] * 4 * z};
  out[7] = {kSH2[3] * z, 0, kSH2[3] * x};
  out[8] = {kSH2[4] * 2 * x, kSH2[4] * (-2 * y), 0};
  if (degree < 3) return;
  out[9] = {kSH3[0] * 6 * x * y, kSH3[0] * (3 * x * x - 3 * y * y), 0};
  out[10] = {kSH3[1] * y * z, kSH3[1] * x * z, kSH3[1] * x * y};
  out[11] = {kSH3[2] * (-2 * x * y), kSH3[2] * (4 * z * z - x * x - 3 * y * y), kSH3[2] * 8 * y * z};
  out[12] = {kSH3[3] * (-6 * x * z), kSH3[3] * (-6 * y * z), kSH3[3] * (6 * z * z - 3 * x * x - 3 * y * y)};
  out[13] = {kSH3[4] * (4 * z * z - 3 * x * x - y * y), kSH3[4] * (-2 * x * y), kSH3[4] * 8 * x * z};
  out[14] = {kSH3[5] * 2 * x * z, kSH3[5] * (-2 * y * z), kSH3[5] * (x * x - y * y)};
  out[15] = {kSH3[6] * (3 * x * x - y * y), kSH3[6] * (-2 * x * y), 0};
}

// coeffs laid out [(degree+1)^2][3]. Returns clamp(sum + 0.5, 0, 1) per
// channel (3DGS offset convention).
inline Vec3 eval_sh(int degree, const real* coeffs, const Vec3& d) {
  real basis[16];
  sh_basis(degree, d, basis);
  const int n = sh_coeff_count(degree);
  Vec3 c{0, 0, 0};
  for (int k = 0; k < n; ++k)
    for (int ch = 0; ch < 3; ++ch) c[ch] += coeffs[k * 3 + ch] * basis[k];
  for (int ch = 0; ch < 3; ++ch) c[ch] = clamp(c[ch] + real(0.5), real(0), real(1));
  return c;
}

// Accumulates into grad_coeffs; returns the gradient w.r.t. the (unit)
// direction. Clamped channels pass no gradient.
inline Vec3 eval_sh_backward(int degree, const real* coeffs, const Vec3& d, const Vec3& grad_rgb,
                             real* grad_coeffs) {
  real basis[16];
  Vec3 dbasis[16];
  sh_basis(degree, d, basis);
  sh_basis_grad(degree, d, dbasis);
  const int n = sh_coeff_count(degree);
  real raw[3] = {real(0.5), real(0.5), real(0.5)};
  for (int k = 0; k < n; ++k)
    for (int ch = 0; ch < 3; ++ch) raw[ch] += coeffs[k * 3 + ch] * basis[k];
  Vec3 gdir{0, 0, 0};
  for (int ch = 0; ch < 3; ++ch) {
    if (raw[ch] <= 0 || raw[ch] >= 1) continue;
    const real g = grad_rgb[ch];
    for (int k = 0; k < n; ++k) {
      grad_coeffs[k * 3 + ch] += basis[k] * g;
      gdir += dbasis[k] * (coeffs[k * 3 + ch] * g);
    }
  }
  return gdir;
}

}  // namespace nerfgs
