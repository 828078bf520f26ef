#pragma once

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/model.hpp"
#include "nerfgs/scene.hpp"

namespace nerfgs {

// Checkpoint file: magic, little-endian u64 header length, JSON header,
// then a float32 little-endian blob of all ParamBlocks in header order,
// the per-Gaussian records (p, id, scale offset), and optionally the baked
// attributes for decoder-free GS inference.
inline constexpr char kCheckpointMagic[8] = {'N', 'E', 'R', 'F', 'G', 'S', '0', '\n'};
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void put_f32(std::vector<unsigned char>& out, real v) {
  float f = float(v);
  unsigned char b[4];
  std::memcpy(b, &f, 4);
  out.insert(out.end(), b, b + 4);
}

inline void put_i32(std::vector<unsigned char>& out, std::int32_t v) {
  unsigned char b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

struct BlobReader {
  const unsigned char* p;
  std::size_t remaining;

  real f32() {
    float f;
    std::memcpy(&f, p, 4);
    p += 4;
    remaining -= 4;
    return real(f);
  }
  std::int32_t i32() {
    std::int32_t v;
    std::memcpy(&v, p, 4);
    p += 4;
    remaining -= 4;
    return v;
  }
};

inline nlohmann::json model_spec_to_json(const ModelSpec& s) {
  nlohmann::json j;
  j["grid"] = {{"levels", s.grid.levels},
               {"features_per_level", s.grid.features_per_level},
               {"table_size_log2", s.grid.table_size_log2},
               {"base_resolution", s.grid.base_resolution},
               {"per_level_scale", s.grid.per_level_scale},
               {"bounds_lo", js::vec3(s.grid.bounds.lo)},
               {"bounds_hi", js::vec3(s.grid.bounds.hi)}};
  j["sigma_hidden"] = s.sigma_hidden;
  j["color_hidden"] = s.color_hidden;
  j["gs_hidden"] = s.gs_hidden;
  j["sh_degree"] = s.sh_degree;
  j["background"] = js::vec3(s.background);
  j["feature_share"] = s.feature_share;
  return j;
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  const auto& g = j.at("grid");
  s.grid.levels = g.at("levels").get<int>();
  s.grid.features_per_level = g.at("features_per_level").get<int>();
  s.grid.table_size_log2 = g.at("table_size_log2").get<std::vector<int>>();
  s.grid.base_resolution = g.at("base_resolution").get<int>();
  s.grid.per_level_scale = g.at("per_level_scale").get<real>();
  s.grid.bounds.lo = js::to_vec3(g.at("bounds_lo"));
  s.grid.bounds.hi = js::to_vec3(g.at("bounds_hi"));
  s.sigma_hidden = j.at("sigma_hidden").get<std::vector<int>>();
  s.color_hidden = j.at("color_hidden").get<std::vector<int>>();
  s.gs_hidden = j.at("gs_hidden").get<std::vector<int>>();
  s.sh_degree = j.at("sh_degree").get<int>();
  s.background = js::to_vec3(j.at("background"));
  s.feature_share = j.at("feature_share").get<bool>();
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Model& m, int iteration, std::uint64_t seed,
                            const nlohmann::json& run_config = {}) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["iteration"] = iteration;
  header["seed"] = seed;
  header["model"] = detail::model_spec_to_json(m.spec);
  if (!run_config.is_null()) header["run_config"] = run_config;
  header["blocks"] = nlohmann::json::array();
  std::size_t blob_bytes = 0;
  for (std::size_t b = 0; b < m.registry.count(); ++b) {
    const ParamBlock& blk = m.registry.block(b);
    header["blocks"].push_back({{"name", blk.name}, {"shape", blk.shape}});
    blob_bytes += blk.size() * 4;
  }
  const std::size_t N = m.gaussians.size();
  header["gaussian_count"] = N;
  blob_bytes += N * (3 * 4 + 4 + 4);
  header["has_baked"] = m.has_baked;
  if (m.has_baked) blob_bytes += N * std::size_t(m.gs_head.sh_count() + 1 + 4 + 3) * 4;
  header["blob_bytes"] = blob_bytes;

  std::vector<unsigned char> blob;
  blob.reserve(blob_bytes);
  for (std::size_t b = 0; b < m.registry.count(); ++b)
    for (real v : m.registry.block(b).values) detail::put_f32(blob, v);
  for (std::size_t i = 0; i < N; ++i) {
    detail::put_f32(blob, m.gaussians.positions[i].x);
    detail::put_f32(blob, m.gaussians.positions[i].y);
    detail::put_f32(blob, m.gaussians.positions[i].z);
  }
  for (std::size_t i = 0; i < N; ++i) detail::put_i32(blob, m.gaussians.ids[i]);
  for (std::size_t i = 0; i < N; ++i) detail::put_f32(blob, m.scale_offsets[i]);
  if (m.has_baked) {
    for (std::size_t i = 0; i < N; ++i) {
      const GaussianAttributes& a = m.baked[i];
      for (real v : a.sh) detail::put_f32(blob, v);
      detail::put_f32(blob, a.opacity);
      for (int k = 0; k < 4; ++k) detail::put_f32(blob, a.rot[k]);
      for (int k = 0; k < 3; ++k) detail::put_f32(blob, a.scale[k]);
    }
  }
  require(blob.size() == blob_bytes, Errc::io, "checkpoint blob size bookkeeping error");

  std::string hs = header.dump();
  std::ofstream f(path, std::ios::binary);
  require(bool(f), Errc::io, "cannot open checkpoint for write: " + path);
  f.write(kCheckpointMagic, 8);
  std::uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(hs.data(), std::streamsize(hs.size()));
  f.write(reinterpret_cast<const char*>(blob.data()), std::streamsize(blob.size()));
  require(bool(f), Errc::io, "checkpoint write failed: " + path);
}

struct LoadedCheckpoint {
  Model model;
  int iteration = 0;
  std::uint64_t seed = 0;
  nlohmann::json run_config;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), Errc::io, "cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  require(f.gcount() == 8 && std::memcmp(magic, kCheckpointMagic, 8) == 0, Errc::bad_header,
          "not a checkpoint file: " + path);
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  require(f.gcount() == 8 && hlen > 0 && hlen < (1ull << 30), Errc::bad_header,
          "corrupt checkpoint header length: " + path);
  std::string hs(hlen, '\0');
  f.read(hs.data(), std::streamsize(hlen));
  require(std::uint64_t(f.gcount()) == hlen, Errc::bad_header, "corrupt checkpoint header: " + path);

  nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
  require(!header.is_discarded(), Errc::bad_header, "checkpoint header is not valid JSON: " + path);
  require(header.value("format_version", -1) == kCheckpointVersion, Errc::version_mismatch,
          "checkpoint format version mismatch in " + path);

  LoadedCheckpoint out;
  out.iteration = header.at("iteration").get<int>();
  out.seed = header.at("seed").get<std::uint64_t>();
  if (header.contains("run_config")) out.run_config = header.at("run_config");
  ModelSpec spec = detail::model_spec_from_json(header.at("model"));
  out.model = make_model(spec, out.seed);
  Model& m = out.model;

  const auto& blocks = header.at("blocks");
  require(blocks.size() == m.registry.count(), Errc::bad_header,
          "checkpoint block list does not match the model layout: " + path);
  std::size_t blob_bytes = header.at("blob_bytes").get<std::size_t>();
  const std::size_t N = header.at("gaussian_count").get<std::size_t>();
  const bool has_baked = header.at("has_baked").get<bool>();

  // Size the dynamic per-Gaussian blocks before validating shapes.
  m.gaussians.delta_pos->append_rows(N);
  m.gaussians.delta_fea->append_rows(N);
  m.gaussians.positions.resize(N);
  m.gaussians.ids.resize(N);
  m.scale_offsets.assign(N, 0);

  std::size_t expected = 0;
  for (std::size_t b = 0; b < m.registry.count(); ++b) {
    const auto shape = blocks.at(b).at("shape").get<std::vector<std::size_t>>();
    require(blocks.at(b).at("name").get<std::string>() == m.registry.block(b).name &&
                shape == m.registry.block(b).shape,
            Errc::bad_header, "checkpoint block '" + m.registry.block(b).name + "' shape mismatch: " + path);
    expected += m.registry.block(b).size() * 4;
  }
  expected += N * 12 + N * 4 + N * 4;
  if (has_baked) expected += N * std::size_t(m.gs_head.sh_count() + 1 + 4 + 3) * 4;
  require(expected == blob_bytes, Errc::bad_header,
          "checkpoint header-declared blob size does not match its shapes: " + path);

  std::vector<unsigned char> blob(blob_bytes);
  f.read(reinterpret_cast<char*>(blob.data()), std::streamsize(blob_bytes));
  require(std::size_t(f.gcount()) == blob_bytes, Errc::truncated_blob, "truncated checkpoint blob: " + path);
  f.peek();
  require(f.eof(), Errc::truncated_blob, "checkpoint has trailing bytes: " + path);

  detail::BlobReader r{blob.data(), blob.size()};
  for (std::size_t b = 0; b < m.registry.count(); ++b)
    for (auto& v : m.registry.block(b).values) v = r.f32();
  int max_id = -1;
  for (std::size_t i = 0; i < N; ++i) {
    m.gaussians.positions[i] = {r.f32(), r.f32(), r.f32()};
  }
  for (std::size_t i = 0; i < N; ++i) {
    m.gaussians.ids[i] = r.i32();
    max_id = std::max(max_id, m.gaussians.ids[i]);
  }
  for (std::size_t i = 0; i < N; ++i) m.scale_offsets[i] = r.f32();
  m.gaussians.next_id = max_id + 1;
  m.gaussians.revision++;
  if (has_baked) {
    m.baked.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      GaussianAttributes& a = m.baked[i];
      a.sh.resize(m.gs_head.sh_count());
      for (auto& v : a.sh) v = r.f32();
      a.opacity = r.f32();
      for (int k = 0; k < 4; ++k) a.rot[k] = r.f32();
      for (int k = 0; k < 3; ++k) a.scale[k] = r.f32();
    }
    m.has_baked = true;
  }
  return out;
}

}  // namespace nerfgs
