#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nerfgs/camera.hpp"
#include "nerfgs/common.hpp"
#include "nerfgs/image.hpp"
#include "nerfgs/nerf.hpp"
#include "nerfgs/rng.hpp"
#include "nerfgs/threading.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

// Procedural density + radiance fields with smooth falloff shells; the
// ground-truth oracle both branches are trained against.
struct Primitive {
  enum class Kind { sphere, box };
  Kind kind = Kind::sphere;
  Vec3 center;
  Vec3 size;  // sphere: radius in x; box: half extents
  Vec3 albedo;
  real density = 1;

  real density_at(const Vec3& p) const {
    if (kind == Kind::sphere) {
      const real R = size.x;
      const real w = real(0.05) * R;
      const real r = (p - center).norm();
      if (r >= R) return 0;
      if (r <= R - w) return density;
      return density * real(0.5) * (1 + std::cos(real(M_PI) * (r - (R - w)) / w));
    }
    real din = std::numeric_limits<real>::infinity();
    real minhalf = std::min(size.x, std::min(size.y, size.z));
    for (int a = 0; a < 3; ++a) din = std::min(din, size[a] - std::abs(p[a] - center[a]));
    if (din <= 0) return 0;
    const real w = real(0.05) * minhalf;
    if (din >= w) return density;
    return density * real(0.5) * (1 - std::cos(real(M_PI) * din / w));
  }
};

struct AnalyticScene {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;
  Vec3 background{0, 0, 0};
  Aabb bounds;

  real density_at(const Vec3& p) const {
    real s = 0;
    for (const auto& pr : primitives) s += pr.density_at(p);
    return s;
  }

  // Density-weighted albedo blend.
  Vec3 radiance_at(const Vec3& p) const {
    real s = 0;
    Vec3 c{0, 0, 0};
    for (const auto& pr : primitives) {
      real d = pr.density_at(p);
      s += d;
      c += pr.albedo * d;
    }
    return s > 0 ? c / s : Vec3{0, 0, 0};
  }
};

inline const std::vector<std::string>& known_scene_specs() {
  static const std::vector<std::string> names = {"tri-sphere", "box-room", "sparse-test"};
  return names;
}

inline AnalyticScene generate_scene(const std::string& spec) {
  AnalyticScene s;
  s.name = spec;
  s.bounds = {{-1, -1, -1}, {1, 1, 1}};
  if (spec == "tri-sphere") {
    s.primitives = {
        {Primitive::Kind::sphere, {real(0.52), real(-0.12), real(0.05)}, {real(0.40), 0, 0}, {real(0.85), real(0.25), real(0.20)}, 60},
        {Primitive::Kind::sphere, {real(-0.48), real(-0.18), real(0.28)}, {real(0.36), 0, 0}, {real(0.22), real(0.75), real(0.30)}, 60},
        {Primitive::Kind::sphere, {real(-0.02), real(0.42), real(-0.30)}, {real(0.38), 0, 0}, {real(0.25), real(0.35), real(0.85)}, 60},
    };
  } else if (spec == "box-room") {
    s.primitives = {
        {Primitive::Kind::box, {0, real(-0.75), 0}, {real(0.9), real(0.12), real(0.9)}, {real(0.6), real(0.55), real(0.5)}, 80},
        {Primitive::Kind::box, {real(0.4), real(-0.35), real(-0.4)}, {real(0.25), real(0.28), real(0.25)}, {real(0.8), real(0.65), real(0.2)}, 80},
        {Primitive::Kind::sphere, {real(-0.4), real(-0.28), real(0.3)}, {real(0.33), 0, 0}, {real(0.3), real(0.5), real(0.85)}, 60},
    };
  } else if (spec == "sparse-test") {
    s.primitives = {
        {Primitive::Kind::sphere, {real(0.4), real(0.05), real(0.1)}, {real(0.42), 0, 0}, {real(0.85), real(0.45), real(0.2)}, 60},
        {Primitive::Kind::sphere, {real(-0.45), real(-0.1), real(-0.15)}, {real(0.36), 0, 0}, {real(0.25), real(0.6), real(0.8)}, 60},
        {Primitive::Kind::box, {real(0.0), real(-0.55), real(-0.35)}, {real(0.5), real(0.15), real(0.3)}, {real(0.45), real(0.75), real(0.35)}, 80},
    };
  } else {
    std::string known;
    for (const auto& n : known_scene_specs()) known += (known.empty() ? "" : ", ") + n;
    fail(Errc::unknown_scene, "unknown scene spec '" + spec + "' (known: " + known + ", or a numeric seed)");
  }
  return s;
}

// Random scene from a seed: 2-4 primitives inside the unit box.
inline AnalyticScene generate_scene(std::uint64_t seed) {
  AnalyticScene s;
  s.name = "seed-" + std::to_string(seed);
  s.seed = seed;
  s.bounds = {{-1, -1, -1}, {1, 1, 1}};
  Rng rng = Rng::split(seed, 0xA11C);
  int n = 2 + int(rng.below(3));
  for (int i = 0; i < n; ++i) {
    Primitive p;
    p.kind = rng.uniform() < real(0.7) ? Primitive::Kind::sphere : Primitive::Kind::box;
    p.center = rng.uniform_vec3(real(-0.5), real(0.5));
    if (p.kind == Primitive::Kind::sphere) {
      real r = rng.uniform(real(0.2), real(0.42));
      p.size = {r, 0, 0};
      // keep inside bounds
      for (int a = 0; a < 3; ++a) p.center[a] = clamp(p.center[a], real(-1) + r, real(1) - r);
    } else {
      p.size = rng.uniform_vec3(real(0.15), real(0.35));
      for (int a = 0; a < 3; ++a) p.center[a] = clamp(p.center[a], real(-1) + p.size[a], real(1) - p.size[a]);
    }
    p.albedo = rng.uniform_vec3(real(0.15), real(0.9));
    p.density = rng.uniform(40, 90);
    s.primitives.push_back(p);
  }
  return s;
}

// Ring of cameras looking at the scene center. Heldout views are every 5th
// slot, n_heldout of them, interleaved with the training ring.
struct SceneView {
  Camera cam;
  bool heldout = false;
};

inline std::vector<SceneView> ring_cameras(const AnalyticScene& scene, int n_train, int n_heldout, int width,
                                           int height) {
  const int total = n_train + n_heldout;
  std::vector<SceneView> views(total);
  const Vec3 target = scene.bounds.center();
  const real ring_r = real(2.8);
  std::vector<char> heldout_slot(total, 0);
  for (int k = 0; k < n_heldout; ++k) heldout_slot[std::size_t((2 * k + 1) * total / (2 * n_heldout)) % total] = 1;
  for (int i = 0; i < total; ++i) {
    real ang = real(2) * real(M_PI) * real(i) / real(total);
    // Mild height variation along the ring for vertical parallax.
    Vec3 eye{ring_r * std::cos(ang), real(1.0) + real(0.35) * std::sin(3 * ang), ring_r * std::sin(ang)};
    views[i].cam = look_at_camera(eye, target, {0, 1, 0}, real(0.85), width, height);
    views[i].cam.near = real(0.05);
    views[i].cam.far = real(20);
    views[i].heldout = heldout_slot[i] != 0;
  }
  return views;
}

// Ray for a pixel, clipped to the scene bounds for sampling.
inline bool pixel_ray(const AnalyticScene& scene, const Camera& cam, real px, real py, Ray& out) {
  out.origin = cam.center();
  out.dir = cam.pixel_dir(px, py);
  real t0, t1;
  if (!scene.bounds.intersect(out.origin, out.dir, t0, t1)) return false;
  out.near = std::max(t0, real(1e-3));
  out.far = t1;
  return out.near < out.far;
}

// Dense-quadrature oracle of Eq. 1 against the analytic fields.
inline Image render_reference(const AnalyticScene& scene, const Camera& cam, int samples_per_ray,
                              ThreadPool* pool = nullptr) {
  require(samples_per_ray >= 64, Errc::usage, "render_reference: samples_per_ray must be >= 64");
  Image img(cam.width, cam.height, scene.background);
  auto body = [&](int, std::size_t rbegin, std::size_t rend) {
    std::vector<real> sigmas(samples_per_ray);
    std::vector<Vec3> colors(samples_per_ray);
    std::vector<real> deltas(samples_per_ray);
    NerfOutputs out;
    for (std::size_t y = rbegin; y < rend; ++y)
      for (int x = 0; x < cam.width; ++x) {
        Ray ray;
        if (!pixel_ray(scene, cam, real(x), real(y), ray)) continue;
        const real step = (ray.far - ray.near) / real(samples_per_ray);
        for (int i = 0; i < samples_per_ray; ++i) {
          Vec3 p = ray.origin + ray.dir * (ray.near + step * (real(i) + real(0.5)));
          sigmas[i] = scene.density_at(p);
          colors[i] = scene.radiance_at(p);
          deltas[i] = step;
        }
        render_samples(sigmas.data(), colors.data(), deltas.data(), samples_per_ray, scene.background, out);
        img.at(x, int(y)) = out.color;
      }
  };
  if (pool)
    pool->parallel_for(std::size_t(cam.height), body);
  else
    body(0, 0, std::size_t(cam.height));
  return img;
}

// ---- dataset on disk: images/ + cameras.json + scene.json ----

struct Dataset {
  AnalyticScene scene;
  std::vector<SceneView> views;
  std::vector<Image> images;

  std::vector<int> train_indices() const {
    std::vector<int> v;
    for (int i = 0; i < int(views.size()); ++i)
      if (!views[i].heldout) v.push_back(i);
    return v;
  }
  std::vector<int> heldout_indices() const {
    std::vector<int> v;
    for (int i = 0; i < int(views.size()); ++i)
      if (views[i].heldout) v.push_back(i);
    return v;
  }
};

namespace js {

inline nlohmann::json vec3(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }
inline Vec3 to_vec3(const nlohmann::json& j) { return {j.at(0).get<real>(), j.at(1).get<real>(), j.at(2).get<real>()}; }

inline nlohmann::json camera(const Camera& c) {
  nlohmann::json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["rot"] = c.rot.m;
  j["trans"] = js::vec3(c.trans);
  j["width"] = c.width;
  j["height"] = c.height;
  j["near"] = c.near;
  j["far"] = c.far;
  return j;
}

inline Camera to_camera(const nlohmann::json& j) {
  Camera c;
  c.fx = j.at("fx").get<real>();
  c.fy = j.at("fy").get<real>();
  c.cx = j.at("cx").get<real>();
  c.cy = j.at("cy").get<real>();
  auto rot = j.at("rot");
  for (int i = 0; i < 9; ++i) c.rot.m[i] = rot.at(i).get<real>();
  c.trans = to_vec3(j.at("trans"));
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.near = j.at("near").get<real>();
  c.far = j.at("far").get<real>();
  c.validate();
  return c;
}

}  // namespace js

inline nlohmann::json scene_to_json(const AnalyticScene& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["background"] = js::vec3(s.background);
  j["bounds"] = {{"lo", js::vec3(s.bounds.lo)}, {"hi", js::vec3(s.bounds.hi)}};
  j["primitives"] = nlohmann::json::array();
  for (const auto& p : s.primitives) {
    j["primitives"].push_back({{"kind", p.kind == Primitive::Kind::sphere ? "sphere" : "box"},
                               {"center", js::vec3(p.center)},
                               {"size", js::vec3(p.size)},
                               {"albedo", js::vec3(p.albedo)},
                               {"density", p.density}});
  }
  return j;
}

inline AnalyticScene scene_from_json(const nlohmann::json& j) {
  AnalyticScene s;
  s.name = j.at("name").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.background = js::to_vec3(j.at("background"));
  s.bounds.lo = js::to_vec3(j.at("bounds").at("lo"));
  s.bounds.hi = js::to_vec3(j.at("bounds").at("hi"));
  for (const auto& pj : j.at("primitives")) {
    Primitive p;
    p.kind = pj.at("kind").get<std::string>() == "sphere" ? Primitive::Kind::sphere : Primitive::Kind::box;
    p.center = js::to_vec3(pj.at("center"));
    p.size = js::to_vec3(pj.at("size"));
    p.albedo = js::to_vec3(pj.at("albedo"));
    p.density = pj.at("density").get<real>();
    s.primitives.push_back(p);
  }
  return s;
}

inline void save_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "images", ec);
  require(!ec, Errc::io, "cannot create dataset dir: " + dir);

  nlohmann::json cams = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.views.size(); ++i) {
    nlohmann::json cj = js::camera(ds.views[i].cam);
    cj["heldout"] = ds.views[i].heldout;
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03zu.png", i);
    cj["image"] = std::string("images/") + name;
    cams.push_back(cj);
    write_png((fs::path(dir) / "images" / name).string(), ds.images[i]);
  }
  std::ofstream(fs::path(dir) / "cameras.json") << cams.dump(2) << "\n";
  std::ofstream(fs::path(dir) / "scene.json") << scene_to_json(ds.scene).dump(2) << "\n";
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  std::ifstream sf(fs::path(dir) / "scene.json");
  require(bool(sf), Errc::io, "missing scene.json in " + dir);
  nlohmann::json sj;
  sf >> sj;
  ds.scene = scene_from_json(sj);
  std::ifstream cf(fs::path(dir) / "cameras.json");
  require(bool(cf), Errc::io, "missing cameras.json in " + dir);
  nlohmann::json cams;
  cf >> cams;
  for (const auto& cj : cams) {
    SceneView v;
    v.cam = js::to_camera(cj);
    v.heldout = cj.at("heldout").get<bool>();
    ds.views.push_back(v);
    Image img = read_image((fs::path(dir) / cj.at("image").get<std::string>()).string());
    require(img.width == v.cam.width && img.height == v.cam.height, Errc::io,
            "image size does not match camera in " + dir);
    ds.images.push_back(std::move(img));
  }
  return ds;
}

}  // namespace nerfgs
