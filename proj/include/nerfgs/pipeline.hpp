#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "nerfgs/checkpoint.hpp"
#include "nerfgs/config.hpp"
#include "nerfgs/counters.hpp"
#include "nerfgs/edges.hpp"
#include "nerfgs/init.hpp"
#include "nerfgs/metrics.hpp"
#include "nerfgs/scene.hpp"
#include "nerfgs/trainer.hpp"

namespace nerfgs {

inline int resolve_threads(int cfg_threads) {
  if (cfg_threads > 0) return cfg_threads;
  if (const char* env = std::getenv("NERFGS_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? int(hw) : 1;
}

inline AnalyticScene scene_from_spec(const std::string& spec) {
  if (!spec.empty() && spec.find_first_not_of("0123456789") == std::string::npos)
    return generate_scene(std::uint64_t(std::stoull(spec)));
  return generate_scene(spec);
}

// gen-scene: renders the analytic scene's camera ring with the reference
// ray marcher and writes images + cameras.json + scene.json.
inline Dataset gen_scene_cmd(const RunConfig& cfg, const std::string& out_dir, ThreadPool& pool) {
  Dataset ds;
  ds.scene = scene_from_spec(cfg.scene_spec);
  ds.views = ring_cameras(ds.scene, cfg.train_views, cfg.heldout_views, cfg.width, cfg.height);
  ds.images.reserve(ds.views.size());
  for (const auto& v : ds.views) ds.images.push_back(render_reference(ds.scene, v.cam, cfg.reference_spp, &pool));
  save_dataset(out_dir, ds);
  return ds;
}

struct PretrainOutput {
  Model model;
  TrainResult result;
};

inline PretrainOutput pretrain_cmd(const RunConfig& cfg, const Dataset& ds, const std::string& out_ckpt,
                                   ThreadPool& pool, bool write_metrics = true) {
  PretrainOutput out{make_model(model_spec_from_config(cfg, ds.scene), cfg.seed), {}};
  std::unique_ptr<std::ofstream> jf;
  if (write_metrics && !out_ckpt.empty()) {
    jf = std::make_unique<std::ofstream>(out_ckpt + ".metrics.jsonl");
    require(bool(*jf), Errc::io, "cannot write metrics next to " + out_ckpt);
  }
  TrainSchedule sched = cfg.schedule;
  sched.seed = cfg.seed;
  out.result = pretrain_nerf(out.model, ds, sched, cfg.weights, &pool, jf.get());
  if (!out_ckpt.empty()) save_checkpoint(out_ckpt, out.model, pretrain_iterations(sched, ds), cfg.seed,
                                         run_config_to_json(cfg));
  return out;
}

struct InitOutput {
  std::size_t edge_draws = 0;
  std::size_t random_draws = 0;
  std::size_t dropped = 0;
  std::size_t added = 0;
};

// init-gaussians: edge-weighted ray sampling + median-depth placement.
inline InitOutput init_gaussians_cmd(const RunConfig& cfg, Model& model, const Dataset& ds,
                                     ThreadPool& pool) {
  require(cfg.init_budget.total_points > 0, Errc::usage, "init: budget must be > 0");
  InitOutput out;
  auto train = ds.train_indices();
  std::vector<Camera> cams;
  std::vector<EdgeMask> masks;
  for (int v : train) {
    cams.push_back(ds.views[v].cam);
    if (cfg.ablation.no_edge_init) {
      EdgeMask em;
      em.width = ds.images[v].width;
      em.height = ds.images[v].height;
      em.view_id = v;
      em.mask.assign(ds.images[v].size(), 0);
      masks.push_back(em);  // empty mask: every draw falls back to random
    } else {
      masks.push_back(detect_edges(ds.images[v], cfg.edge_threshold, v));
    }
  }
  InitBudget budget = cfg.init_budget;
  if (cfg.ablation.no_edge_init) budget.edge_ratio = 0;
  Rng rng = Rng::split(cfg.seed, 0xED6E);
  auto draws = sample_init_rays(cams, masks, ds.scene.bounds, budget, rng);
  for (const auto& d : draws) (d.from_edge ? out.edge_draws : out.random_draws)++;

  auto placed = init_gaussians(model.nerf, draws, cfg.schedule.nerf_samples, cfg.init_opacity_floor,
                               cfg.seed, &pool);
  out.dropped = placed.dropped;
  out.added = placed.positions.size();
  for (const Vec3& p : placed.positions) model.append_gaussian(p);
  return out;
}

struct TrainOutput {
  TrainResult result;
  HeldoutEval final_eval;
};

// train-joint: runs the Eq. 13 loop, writes metrics.jsonl, bakes GS
// attributes, and saves the final checkpoint.
inline TrainOutput train_joint_cmd(const RunConfig& cfg, Model& model, const Dataset& ds,
                                   const std::string& out_dir, ThreadPool& pool) {
  namespace fs = std::filesystem;
  std::unique_ptr<std::ofstream> jf;
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    require(!ec, Errc::io, "cannot create output dir: " + out_dir);
    jf = std::make_unique<std::ofstream>(fs::path(out_dir) / "metrics.jsonl");
    require(bool(*jf), Errc::io, "cannot write metrics.jsonl in " + out_dir);
  }
  model.spec.feature_share = !cfg.ablation.no_feature_share;
  TrainSchedule sched = cfg.schedule;
  sched.seed = cfg.seed;
  TrainOutput out;
  out.result = train_joint(model, ds, sched, cfg.weights, cfg.ablation, &pool, jf.get());
  bake_attributes(model, &pool);
  out.final_eval = eval_heldout_gs(model, ds, &pool);
  if (!out_dir.empty())
    save_checkpoint((fs::path(out_dir) / "checkpoint_final.bin").string(), model, sched.joint_iters, cfg.seed,
                    run_config_to_json(cfg));
  return out;
}

enum class RenderBranch { gs, nerf };

// render: GS branch from baked attributes (no hash-grid or decoder calls),
// or the NeRF branch via deterministic midpoint quadrature.
inline Image render_cmd(Model& model, const Camera& cam, RenderBranch branch, int nerf_samples,
                        ThreadPool& pool) {
  if (branch == RenderBranch::gs) {
    require(model.has_baked, Errc::usage, "checkpoint has no baked GS attributes; run train-joint first");
    return render_gs_baked(model, cam, {}, &pool);
  }
  Image img(cam.width, cam.height, model.nerf.background);
  const Aabb& bounds = model.spec.grid.bounds;
  auto body = [&](int, std::size_t rbegin, std::size_t rend) {
    NerfRayWorkspace ws;
    Rng rng(0);  // uniform mode draws nothing
    for (std::size_t y = rbegin; y < rend; ++y)
      for (int x = 0; x < cam.width; ++x) {
        Ray ray;
        ray.origin = cam.center();
        ray.dir = cam.pixel_dir(real(x), real(y));
        real t0, t1;
        if (!bounds.intersect(ray.origin, ray.dir, t0, t1)) continue;
        ray.near = std::max(t0, real(1e-3));
        ray.far = t1;
        if (!(ray.near < ray.far)) continue;
        render_ray_cached(model.nerf, ray, nerf_samples, rng, SampleMode::uniform, ws);
        img.at(x, int(y)) = ws.out.color;
      }
  };
  pool.parallel_for(std::size_t(cam.height), body);
  return img;
}

struct EvalReport {
  std::vector<int> view_indices;
  std::vector<real> psnr_db;
  std::vector<real> ssim_val;
  real mean_psnr = 0;
  real mean_ssim = 0;

  nlohmann::json to_json(const std::string& branch) const {
    nlohmann::json j;
    j["branch"] = branch;
    j["views"] = nlohmann::json::array();
    for (std::size_t i = 0; i < view_indices.size(); ++i)
      j["views"].push_back({{"view", view_indices[i]}, {"psnr", psnr_db[i]}, {"ssim", ssim_val[i]}});
    j["mean_psnr"] = mean_psnr;
    j["mean_ssim"] = mean_ssim;
    return j;
  }
};

// eval: per-view and mean PSNR/SSIM on the heldout split.
inline EvalReport eval_cmd(Model& model, const Dataset& ds, RenderBranch branch, int nerf_samples,
                           ThreadPool& pool, const std::string& render_dir = "") {
  EvalReport rep;
  for (int v : ds.heldout_indices()) {
    Image img = render_cmd(model, ds.views[v].cam, branch, nerf_samples, pool);
    rep.view_indices.push_back(v);
    rep.psnr_db.push_back(psnr(img, ds.images[v]));
    rep.ssim_val.push_back(ssim(img, ds.images[v]));
    if (!render_dir.empty()) {
      char name[48];
      std::snprintf(name, sizeof(name), "render_view_%03d.png", v);
      write_png((std::filesystem::path(render_dir) / name).string(), img);
    }
  }
  require(!rep.psnr_db.empty(), Errc::usage, "eval: dataset has no heldout views");
  for (std::size_t i = 0; i < rep.psnr_db.size(); ++i) {
    rep.mean_psnr += rep.psnr_db[i];
    rep.mean_ssim += rep.ssim_val[i];
  }
  rep.mean_psnr /= real(rep.psnr_db.size());
  rep.mean_ssim /= real(rep.ssim_val.size());
  return rep;
}

// Reconstructs the dataset cameras embedded in a checkpoint's run config
// (render --camera IDX without a dataset directory).
inline std::vector<SceneView> cameras_from_config(const RunConfig& cfg) {
  AnalyticScene scene = scene_from_spec(cfg.scene_spec);
  return ring_cameras(scene, cfg.train_views, cfg.heldout_views, cfg.width, cfg.height);
}

// Uniform random positions inside the bounds: the "random init" baseline
// used when no NeRF branch exists.
inline void init_random_points(Model& model, int budget, const Aabb& bounds, Rng& rng) {
  for (int i = 0; i < budget; ++i)
    model.append_gaussian({rng.uniform(bounds.lo.x, bounds.hi.x), rng.uniform(bounds.lo.y, bounds.hi.y),
                           rng.uniform(bounds.lo.z, bounds.hi.z)});
}

// One full pipeline pass (pretrain -> init -> joint) on an already-generated
// dataset; shared by the ablate command and the acceptance suite.
struct PipelineRunResult {
  real heldout_psnr = 0;
  real heldout_ssim = 0;
  TrainResult joint;
};

inline PipelineRunResult run_pipeline(const RunConfig& cfg, const Dataset& ds, ThreadPool& pool,
                                      const Model* pretrained = nullptr) {
  PipelineRunResult out;
  Model model;
  if (pretrained) {
    model = clone_model(*pretrained, cfg.seed);
    model.spec.feature_share = !cfg.ablation.no_feature_share;
  } else {
    auto pre = pretrain_cmd(cfg, ds, "", pool, false);
    model = std::move(pre.model);
  }
  init_gaussians_cmd(cfg, model, ds, pool);
  auto tr = train_joint_cmd(cfg, model, ds, "", pool);
  out.heldout_psnr = tr.final_eval.psnr_db;
  out.heldout_ssim = tr.final_eval.ssim_val;
  out.joint = std::move(tr.result);
  return out;
}

}  // namespace nerfgs
