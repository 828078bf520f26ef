#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/image.hpp"

namespace nerfgs {

// 10 log10(1 / MSE) over all channels; identical images cap at 99 dB.
inline real psnr(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height, Errc::dimension_mismatch, "psnr: image size mismatch");
  real mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Vec3 d = a.pixels[i] - b.pixels[i];
    mse += d.dot(d);
  }
  mse /= real(a.size() * 3);
  if (mse <= 0) return 99;
  real v = 10 * std::log10(1 / mse);
  return v > 99 ? 99 : v;
}

namespace detail {

inline const std::array<real, 11>& ssim_kernel() {
  static const std::array<real, 11> k = [] {
    std::array<real, 11> w{};
    real sum = 0;
    for (int i = 0; i < 11; ++i) {
      real d = real(i - 5);
      w[i] = std::exp(-d * d / (2 * real(1.5) * real(1.5)));
      sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return k;
}

constexpr real kSsimC1 = real(0.01 * 0.01);
constexpr real kSsimC2 = real(0.03 * 0.03);

}  // namespace detail

// Mean local SSIM (11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03) over
// valid window positions, averaged across channels.
inline real ssim(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height, Errc::dimension_mismatch, "ssim: image size mismatch");
  require(a.width >= 11 && a.height >= 11, Errc::dimension_mismatch, "ssim: images must be at least 11x11");
  const auto& k = detail::ssim_kernel();
  const int W = a.width, H = a.height;
  real total = 0;
  std::size_t count = 0;
  for (int ch = 0; ch < 3; ++ch) {
    for (int wy = 0; wy + 11 <= H; ++wy)
      for (int wx = 0; wx + 11 <= W; ++wx) {
        real mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int j = 0; j < 11; ++j)
          for (int i = 0; i < 11; ++i) {
            real w = k[i] * k[j];
            real x = a.at(wx + i, wy + j)[ch];
            real y = b.at(wx + i, wy + j)[ch];
            mx += w * x;
            my += w * y;
            sxx += w * x * x;
            syy += w * y * y;
            sxy += w * x * y;
          }
        real vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
        real num = (2 * mx * my + detail::kSsimC1) * (2 * cov + detail::kSsimC2);
        real den = (mx * mx + my * my + detail::kSsimC1) * (vx + vy + detail::kSsimC2);
        total += num / den;
        ++count;
      }
  }
  return total / real(count);
}

// d(ssim(a,b))/d(a) as an image; pairs with ssim for the SSIM loss term.
inline Image ssim_backward_wrt_a(const Image& a, const Image& b, real grad_out = 1) {
  const auto& k = detail::ssim_kernel();
  const int W = a.width, H = a.height;
  Image grad(W, H);
  const std::size_t count = std::size_t(3) * (W - 10) * (H - 10);
  const real scale = grad_out / real(count);
  for (int ch = 0; ch < 3; ++ch) {
    for (int wy = 0; wy + 11 <= H; ++wy)
      for (int wx = 0; wx + 11 <= W; ++wx) {
        real mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int j = 0; j < 11; ++j)
          for (int i = 0; i < 11; ++i) {
            real w = k[i] * k[j];
            real x = a.at(wx + i, wy + j)[ch];
            real y = b.at(wx + i, wy + j)[ch];
            mx += w * x;
            my += w * y;
            sxx += w * x * x;
            syy += w * y * y;
            sxy += w * x * y;
          }
        real vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
        real A1 = 2 * mx * my + detail::kSsimC1;
        real A2 = 2 * cov + detail::kSsimC2;
        real B1 = mx * mx + my * my + detail::kSsimC1;
        real B2 = vx + vy + detail::kSsimC2;
        real inv = 1 / (B1 * B2);
        // dS/dx_i = w_i [ (dA1 A2 + A1 dA2) - S (dB1 B2 + B1 dB2) ] / (B1 B2)
        // with dA1 = 2 my, dA2 = 2 (y_i - my), dB1 = 2 mx, dB2 = 2 (x_i - mx).
        real S = A1 * A2 * inv;
        for (int j = 0; j < 11; ++j)
          for (int i = 0; i < 11; ++i) {
            real w = k[i] * k[j];
            real x = a.at(wx + i, wy + j)[ch];
            real y = b.at(wx + i, wy + j)[ch];
            real d = (2 * my * A2 + A1 * 2 * (y - my)) - S * (2 * mx * B2 + B1 * 2 * (x - mx));
            grad.at(wx + i, wy + j)[ch] += scale * w * d * inv;
          }
      }
  }
  return grad;
}

}  // namespace nerfgs
