#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "nerfgs/common.hpp"

namespace nerfgs {

struct Vec2 {
  real x = 0, y = 0;
  Vec2() = default;
  Vec2(real x_, real y_) : x(x_), y(y_) {}
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(real s) const { return {x * s, y * s}; }
  real dot(const Vec2& o) const { return x * o.x + y * o.y; }
};

struct Vec3 {
  real x = 0, y = 0, z = 0;
  Vec3() = default;
  Vec3(real x_, real y_, real z_) : x(x_), y(y_), z(z_) {}
  real& operator[](int i) { return (&x)[i]; }
  real operator[](int i) const { return (&x)[i]; }
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(real s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(real s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x; y += o.y; z += o.z;
    return *this;
  }
  real dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  real norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    real n = norm();
    return n > 0 ? *this / n : Vec3{0, 0, 0};
  }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline Vec3 operator*(real s, const Vec3& v) { return v * s; }

struct Vec4 {
  real w = 0, x = 0, y = 0, z = 0;
  real& operator[](int i) { return (&w)[i]; }
  real operator[](int i) const { return (&w)[i]; }
  real norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
};

// Row-major 3x3.
struct Mat3 {
  std::array<real, 9> m{};
  static Mat3 identity() {
    Mat3 r;
    r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return r;
  }
  real& operator()(int r, int c) { return m[r * 3 + c]; }
  real operator()(int r, int c) const { return m[r * 3 + c]; }
  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        real s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
  Vec3 transposed_mul(const Vec3& v) const {
    return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
            m[1] * v.x + m[4] * v.y + m[7] * v.z,
            m[2] * v.x + m[5] * v.y + m[8] * v.z};
  }
};

// Symmetric 2x2 stored as (xx, xy, yy).
struct Sym2 {
  real xx = 0, xy = 0, yy = 0;
  real det() const { return xx * yy - xy * xy; }
};

// Rotation matrix of a unit quaternion (w, x, y, z).
inline Mat3 quat_to_rot(const Vec4& q) {
  real w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 r;
  r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
  return r;
}

struct Aabb {
  Vec3 lo{-1, -1, -1};
  Vec3 hi{1, 1, 1};
  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return (lo + hi) * real(0.5); }
  real diag() const { return extent().norm(); }
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
  Vec3 clamp_point(const Vec3& p) const {
    return {clamp(p.x, lo.x, hi.x), clamp(p.y, lo.y, hi.y), clamp(p.z, lo.z, hi.z)};
  }
  // Entry/exit distances of ray o + t*d against the box; false if it misses.
  bool intersect(const Vec3& o, const Vec3& d, real& t0, real& t1) const {
    t0 = -std::numeric_limits<real>::infinity();
    t1 = std::numeric_limits<real>::infinity();
    for (int a = 0; a < 3; ++a) {
      real dv = d[a];
      if (std::abs(dv) < real(1e-12)) {
        if (o[a] < lo[a] || o[a] > hi[a]) return false;
        continue;
      }
      real ta = (lo[a] - o[a]) / dv;
      real tb = (hi[a] - o[a]) / dv;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    return t0 <= t1;
  }
};

}  // namespace nerfgs
