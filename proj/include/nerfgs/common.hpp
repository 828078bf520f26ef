#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nerfgs {

#ifdef NERFGS_REAL_FLOAT
using real = float;
#else
using real = double;
#endif

inline constexpr bool kDoublePrecision = sizeof(real) == 8;

// All recoverable failures surface as Error with a machine-checkable code.
enum class Errc {
  usage,
  dimension_mismatch,
  non_finite,
  io,
  unknown_scene,
  bad_header,
  truncated_blob,
  version_mismatch,
  stale_records,
  untrained_nerf,
  divergence,
};

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

inline real softplus(real x) {
  // log1p(exp(x)) without overflow for large x
  if (x > real(30)) return x;
  return std::log1p(std::exp(x));
}

inline real softplus_grad(real x) { return real(1) / (real(1) + std::exp(-x)); }

inline real sigmoid(real x) {
  if (x >= 0) {
    real e = std::exp(-x);
    return real(1) / (real(1) + e);
  }
  real e = std::exp(x);
  return e / (real(1) + e);
}

template <class T>
inline T clamp(T v, T lo, T hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

inline real sqr(real x) { return x * x; }

}  // namespace nerfgs
