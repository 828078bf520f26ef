#pragma once

#include <cstdint>

namespace nerfgs {
namespace counters {

// Call counters used to verify that GS-branch inference touches neither the
// hash grid nor the NeRF decoders. Not thread-safe by design: reset + read
// around single-threaded render calls only.

inline std::uint64_t& hash_encode_calls() {
  static std::uint64_t n = 0;
  return n;
}

inline std::uint64_t& nerf_decoder_calls() {
  static std::uint64_t n = 0;
  return n;
}

inline std::uint64_t& gs_decoder_calls() {
  static std::uint64_t n = 0;
  return n;
}

inline void reset_all() {
  hash_encode_calls() = 0;
  nerf_decoder_calls() = 0;
  gs_decoder_calls() = 0;
}

}  // namespace counters
}  // namespace nerfgs
