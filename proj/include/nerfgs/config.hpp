#pragma once

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/edges.hpp"
#include "nerfgs/losses.hpp"
#include "nerfgs/model.hpp"
#include "nerfgs/scene.hpp"
#include "nerfgs/trainer.hpp"

namespace nerfgs {

// Everything a pipeline run needs; JSON-loadable with unknown keys rejected
// and unspecified keys taking the documented defaults (configs/default.json
// mirrors this struct).
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency

  // scene/dataset generation
  std::string scene_spec = "tri-sphere";
  int train_views = 20;
  int heldout_views = 5;
  int width = 64;
  int height = 64;
  int reference_spp = 1024;

  HashGridConfig grid;  // bounds filled from the scene at model build time
  std::vector<int> sigma_hidden{32};
  std::vector<int> color_hidden{32};
  std::vector<int> gs_hidden{64};
  int sh_degree = 1;

  InitBudget init_budget;
  real edge_threshold = -1;  // <0: 80th percentile per image
  real init_opacity_floor = real(0.1);

  TrainSchedule schedule;
  LossWeights weights;
  AblationFlags ablation;
};

namespace cfgdetail {

inline void expect_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                        const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    require(ok, Errc::usage, "config: unknown key '" + where + it.key() + "'");
  }
}

template <class T>
inline void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace cfgdetail

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["scene"] = {{"spec", c.scene_spec}, {"train_views", c.train_views}, {"heldout_views", c.heldout_views},
                {"width", c.width},     {"height", c.height},           {"spp", c.reference_spp}};
  j["grid"] = {{"levels", c.grid.levels},
               {"features_per_level", c.grid.features_per_level},
               {"table_size_log2", c.grid.table_size_log2},
               {"base_resolution", c.grid.base_resolution},
               {"per_level_scale", c.grid.per_level_scale}};
  j["mlp"] = {{"sigma_hidden", c.sigma_hidden}, {"color_hidden", c.color_hidden}, {"gs_hidden", c.gs_hidden}};
  j["gs"] = {{"sh_degree", c.sh_degree}};
  j["init"] = {{"budget", c.init_budget.total_points},
               {"edge_ratio", c.init_budget.edge_ratio},
               {"edge_threshold", c.edge_threshold},
               {"opacity_floor", c.init_opacity_floor}};
  const TrainSchedule& s = c.schedule;
  j["schedule"] = {{"pretrain_epochs", s.pretrain_epochs},
                   {"nerf_batch_rays", s.nerf_batch_rays},
                   {"nerf_samples", s.nerf_samples},
                   {"joint_iters", s.joint_iters},
                   {"gs_rays_per_iter", s.gs_rays_per_iter},
                   {"densify_interval", s.densify_interval},
                   {"densify_max_new", s.densify_max_new},
                   {"densify_alpha_threshold", s.densify_alpha_threshold},
                   {"prune_interval", s.prune_interval},
                   {"prune_opacity", s.prune_opacity},
                   {"grad_densify_threshold", s.grad_densify_threshold},
                   {"split_scale_fraction", s.split_scale_fraction},
                   {"tau_op", s.tau_op},
                   {"eval_interval", s.eval_interval},
                   {"lr_hash", s.lr_hash},
                   {"lr_mlp", s.lr_mlp},
                   {"lr_delta_pos", s.lr_delta_pos},
                   {"lr_delta_fea", s.lr_delta_fea},
                   {"lr_decay", s.lr_decay}};
  const LossWeights& w = c.weights;
  j["weights"] = {{"en", w.en}, {"ssim", w.ssim}, {"vol", w.vol}, {"nerf", w.nerf},
                  {"rgb", w.rgb}, {"op", w.op},   {"fea", w.fea}, {"pos", w.pos}};
  const AblationFlags& a = c.ablation;
  j["ablation"] = {{"no_feature_share", a.no_feature_share},
                   {"no_residual_feature", a.no_residual_feature},
                   {"no_residual_position", a.no_residual_position},
                   {"no_gs_rays", a.no_gs_rays},
                   {"no_edge_init", a.no_edge_init},
                   {"no_nerf_growth", a.no_nerf_growth},
                   {"no_gradient_growth", a.no_gradient_growth},
                   {"no_joint_rgb", a.no_joint_rgb},
                   {"no_joint_op", a.no_joint_op},
                   {"no_reg_fea", a.no_reg_fea},
                   {"no_reg_pos", a.no_reg_pos},
                   {"no_nerf_loss", a.no_nerf_loss},
                   {"no_vol_loss", a.no_vol_loss}};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using cfgdetail::expect_keys;
  using cfgdetail::get_if;
  RunConfig c;
  expect_keys(j, {"seed", "threads", "scene", "grid", "mlp", "gs", "init", "schedule", "weights", "ablation"},
              "");
  get_if(j, "seed", c.seed);
  get_if(j, "threads", c.threads);
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    expect_keys(s, {"spec", "train_views", "heldout_views", "width", "height", "spp"}, "scene.");
    get_if(s, "spec", c.scene_spec);
    get_if(s, "train_views", c.train_views);
    get_if(s, "heldout_views", c.heldout_views);
    get_if(s, "width", c.width);
    get_if(s, "height", c.height);
    get_if(s, "spp", c.reference_spp);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    expect_keys(g, {"levels", "features_per_level", "table_size_log2", "base_resolution", "per_level_scale"},
                "grid.");
    get_if(g, "levels", c.grid.levels);
    get_if(g, "features_per_level", c.grid.features_per_level);
    if (g.contains("table_size_log2")) {
      // One int applied to every level, or an explicit per-level list.
      if (g.at("table_size_log2").is_array())
        c.grid.table_size_log2 = g.at("table_size_log2").get<std::vector<int>>();
      else
        c.grid.table_size_log2.assign(std::size_t(c.grid.levels), g.at("table_size_log2").get<int>());
    }
    get_if(g, "base_resolution", c.grid.base_resolution);
    get_if(g, "per_level_scale", c.grid.per_level_scale);
  }
  if (int(c.grid.table_size_log2.size()) != c.grid.levels)
    c.grid.table_size_log2.assign(std::size_t(c.grid.levels),
                                  c.grid.table_size_log2.empty() ? 15 : c.grid.table_size_log2[0]);
  if (j.contains("mlp")) {
    const auto& m = j.at("mlp");
    expect_keys(m, {"sigma_hidden", "color_hidden", "gs_hidden"}, "mlp.");
    get_if(m, "sigma_hidden", c.sigma_hidden);
    get_if(m, "color_hidden", c.color_hidden);
    get_if(m, "gs_hidden", c.gs_hidden);
  }
  if (j.contains("gs")) {
    expect_keys(j.at("gs"), {"sh_degree"}, "gs.");
    get_if(j.at("gs"), "sh_degree", c.sh_degree);
    require(c.sh_degree >= 0 && c.sh_degree <= 3, Errc::usage, "config: sh_degree must be in [0,3]");
  }
  if (j.contains("init")) {
    const auto& s = j.at("init");
    expect_keys(s, {"budget", "edge_ratio", "edge_threshold", "opacity_floor"}, "init.");
    get_if(s, "budget", c.init_budget.total_points);
    get_if(s, "edge_ratio", c.init_budget.edge_ratio);
    get_if(s, "edge_threshold", c.edge_threshold);
    get_if(s, "opacity_floor", c.init_opacity_floor);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    expect_keys(s,
                {"pretrain_epochs", "nerf_batch_rays", "nerf_samples", "joint_iters", "gs_rays_per_iter",
                 "densify_interval", "densify_max_new", "densify_alpha_threshold", "prune_interval",
                 "prune_opacity", "grad_densify_threshold", "split_scale_fraction", "tau_op", "eval_interval",
                 "lr_hash", "lr_mlp", "lr_delta_pos", "lr_delta_fea", "lr_decay"},
                "schedule.");
    TrainSchedule& t = c.schedule;
    get_if(s, "pretrain_epochs", t.pretrain_epochs);
    get_if(s, "nerf_batch_rays", t.nerf_batch_rays);
    get_if(s, "nerf_samples", t.nerf_samples);
    get_if(s, "joint_iters", t.joint_iters);
    get_if(s, "gs_rays_per_iter", t.gs_rays_per_iter);
    get_if(s, "densify_interval", t.densify_interval);
    get_if(s, "densify_max_new", t.densify_max_new);
    get_if(s, "densify_alpha_threshold", t.densify_alpha_threshold);
    get_if(s, "prune_interval", t.prune_interval);
    get_if(s, "prune_opacity", t.prune_opacity);
    get_if(s, "grad_densify_threshold", t.grad_densify_threshold);
    get_if(s, "split_scale_fraction", t.split_scale_fraction);
    get_if(s, "tau_op", t.tau_op);
    get_if(s, "eval_interval", t.eval_interval);
    get_if(s, "lr_hash", t.lr_hash);
    get_if(s, "lr_mlp", t.lr_mlp);
    get_if(s, "lr_delta_pos", t.lr_delta_pos);
    get_if(s, "lr_delta_fea", t.lr_delta_fea);
    get_if(s, "lr_decay", t.lr_decay);
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    expect_keys(w, {"en", "ssim", "vol", "nerf", "rgb", "op", "fea", "pos"}, "weights.");
    get_if(w, "en", c.weights.en);
    get_if(w, "ssim", c.weights.ssim);
    get_if(w, "vol", c.weights.vol);
    get_if(w, "nerf", c.weights.nerf);
    get_if(w, "rgb", c.weights.rgb);
    get_if(w, "op", c.weights.op);
    get_if(w, "fea", c.weights.fea);
    get_if(w, "pos", c.weights.pos);
  }
  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    expect_keys(a,
                {"no_feature_share", "no_residual_feature", "no_residual_position", "no_gs_rays",
                 "no_edge_init", "no_nerf_growth", "no_gradient_growth", "no_joint_rgb", "no_joint_op",
                 "no_reg_fea", "no_reg_pos", "no_nerf_loss", "no_vol_loss"},
                "ablation.");
    AblationFlags& f = c.ablation;
    get_if(a, "no_feature_share", f.no_feature_share);
    get_if(a, "no_residual_feature", f.no_residual_feature);
    get_if(a, "no_residual_position", f.no_residual_position);
    get_if(a, "no_gs_rays", f.no_gs_rays);
    get_if(a, "no_edge_init", f.no_edge_init);
    get_if(a, "no_nerf_growth", f.no_nerf_growth);
    get_if(a, "no_gradient_growth", f.no_gradient_growth);
    get_if(a, "no_joint_rgb", f.no_joint_rgb);
    get_if(a, "no_joint_op", f.no_joint_op);
    get_if(a, "no_reg_fea", f.no_reg_fea);
    get_if(a, "no_reg_pos", f.no_reg_pos);
    get_if(a, "no_nerf_loss", f.no_nerf_loss);
    get_if(a, "no_vol_loss", f.no_vol_loss);
  }
  c.weights.validate();
  c.schedule.validate();
  c.init_budget.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  require(bool(f), Errc::io, "cannot open config: " + path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  require(!j.is_discarded(), Errc::usage, "config is not valid JSON: " + path);
  return run_config_from_json(j);
}

// Applies a named ablation flag (CLI --ablate and the ablate matrix).
inline void set_ablation_flag(RunConfig& c, const std::string& name) {
  AblationFlags& f = c.ablation;
  if (name == "no_feature_share") f.no_feature_share = true;
  else if (name == "no_residual_feature") f.no_residual_feature = true;
  else if (name == "no_residual_position") f.no_residual_position = true;
  else if (name == "no_gs_rays") f.no_gs_rays = true;
  else if (name == "no_edge_init") f.no_edge_init = true;
  else if (name == "no_nerf_growth") f.no_nerf_growth = true;
  else if (name == "no_gradient_growth") f.no_gradient_growth = true;
  else if (name == "no_joint_rgb") f.no_joint_rgb = true;
  else if (name == "no_joint_op") f.no_joint_op = true;
  else if (name == "no_reg_fea") f.no_reg_fea = true;
  else if (name == "no_reg_pos") f.no_reg_pos = true;
  else if (name == "no_nerf_loss") f.no_nerf_loss = true;
  else if (name == "no_vol_loss") f.no_vol_loss = true;
  else if (name == "full" || name == "Full") { /* baseline row: nothing disabled */ }
  else fail(Errc::usage, "unknown ablation flag: " + name);
}

inline ModelSpec model_spec_from_config(const RunConfig& c, const AnalyticScene& scene) {
  ModelSpec spec;
  spec.grid = c.grid;
  spec.grid.bounds = scene.bounds;
  spec.sigma_hidden = c.sigma_hidden;
  spec.color_hidden = c.color_hidden;
  spec.gs_hidden = c.gs_hidden;
  spec.sh_degree = c.sh_degree;
  spec.background = scene.background;
  spec.feature_share = !c.ablation.no_feature_share;
  return spec;
}

}  // namespace nerfgs
