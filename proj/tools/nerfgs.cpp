// nerfgs: dual-branch NeRF + Gaussian-splatting trainer on procedural
// analytic scenes. Subcommands wire the full pipeline:
//   gen-scene -> pretrain-nerf -> init-gaussians -> train-joint -> render/eval
// Exit codes: 0 success, 2 usage/input error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "nerfgs/nerfgs.hpp"

namespace fs = std::filesystem;
using namespace nerfgs;

namespace {

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_run_config(path);
}

RunConfig config_for_checkpoint(const LoadedCheckpoint& ck, const std::string& config_path) {
  if (!config_path.empty()) return load_run_config(config_path);
  if (!ck.run_config.is_null()) return run_config_from_json(ck.run_config);
  return RunConfig{};
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::non_finite:
    case Errc::divergence:
      return 3;
    default:
      return 2;
  }
}

struct CommonOpts {
  std::string config_path;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void apply_overrides(RunConfig& cfg, const CommonOpts& c) {
  if (c.threads > 0) cfg.threads = c.threads;
  if (c.seed_set) cfg.seed = c.seed;
}

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config_path, "JSON run config (defaults used when omitted)");
  cmd->add_option("--threads", c.threads, "worker threads (default: NERFGS_THREADS or hardware)");
  cmd->add_option("--seed", c.seed, "override the config seed")->each([&c](const std::string&) {
    c.seed_set = true;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NeRF-assisted neural Gaussian splatting at desk scale"};
  app.require_subcommand(1);

  // ---- gen-scene ----
  auto* gen = app.add_subcommand("gen-scene", "generate an analytic dataset (images + cameras + scene)");
  CommonOpts gen_c;
  std::string gen_spec = "tri-sphere", gen_out;
  int gen_views = -1, gen_spp = -1;
  std::string gen_res;
  add_common(gen, gen_c);
  gen->add_option("--spec", gen_spec, "scene spec name (tri-sphere, box-room, sparse-test) or numeric seed");
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--views", gen_views, "number of training views");
  gen->add_option("--res", gen_res, "image resolution WxH (e.g. 64x64)");
  gen->add_option("--spp", gen_spp, "reference renderer samples per ray");

  // ---- pretrain-nerf ----
  auto* pre = app.add_subcommand("pretrain-nerf", "pretrain the hash-grid NeRF branch");
  CommonOpts pre_c;
  std::string pre_data, pre_out;
  add_common(pre, pre_c);
  pre->add_option("--data", pre_data, "dataset directory")->required();
  pre->add_option("--out", pre_out, "output checkpoint path")->required();

  // ---- init-gaussians ----
  auto* ini = app.add_subcommand("init-gaussians", "edge-based Gaussian initialization from the NeRF branch");
  CommonOpts ini_c;
  std::string ini_ckpt, ini_data, ini_out;
  int ini_budget = -1;
  double ini_ratio = -1;
  bool ini_no_edge = false;
  add_common(ini, ini_c);
  ini->add_option("--ckpt", ini_ckpt, "pretrained NeRF checkpoint")->required();
  ini->add_option("--data", ini_data, "dataset directory")->required();
  ini->add_option("--out", ini_out, "output checkpoint path")->required();
  ini->add_option("--budget", ini_budget, "total points to draw");
  ini->add_option("--edge-ratio", ini_ratio, "edge:random draw ratio (default 0.8)");
  ini->add_flag("--no-edge-init", ini_no_edge, "uniform sampling ablation (w/o edge-based init)");

  // ---- train-joint ----
  auto* tr = app.add_subcommand("train-joint", "joint dual-branch optimization");
  CommonOpts tr_c;
  std::string tr_ckpt, tr_data, tr_out;
  std::vector<std::string> tr_ablate;
  add_common(tr, tr_c);
  tr->add_option("--ckpt", tr_ckpt, "initialized checkpoint")->required();
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "output directory (metrics.jsonl + checkpoint_final.bin)")->required();
  tr->add_option("--ablate", tr_ablate, "ablation flags (e.g. no_gs_rays)");

  // ---- render ----
  auto* ren = app.add_subcommand("render", "render one view from a checkpoint");
  CommonOpts ren_c;
  std::string ren_ckpt, ren_pose, ren_out, ren_branch = "gs";
  int ren_camera = -1;
  add_common(ren, ren_c);
  ren->add_option("--ckpt", ren_ckpt, "checkpoint path")->required();
  ren->add_option("--camera", ren_camera, "camera index into the checkpoint's configured ring");
  ren->add_option("--pose", ren_pose, "JSON camera file (alternative to --camera)");
  ren->add_option("--out", ren_out, "output PNG path")->required();
  ren->add_option("--branch", ren_branch, "gs | nerf")->check(CLI::IsMember({"gs", "nerf"}));

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM report on the heldout split");
  CommonOpts ev_c;
  std::string ev_ckpt, ev_data, ev_out, ev_branch = "gs", ev_renders;
  add_common(ev, ev_c);
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--out", ev_out, "output report.json path")->required();
  ev->add_option("--branch", ev_branch, "gs | nerf")->check(CLI::IsMember({"gs", "nerf"}));
  ev->add_option("--save-renders", ev_renders, "directory to save rendered heldout views");

  // ---- ablate ----
  auto* ab = app.add_subcommand("ablate", "ablation matrix: heldout PSNR per flag x seed");
  CommonOpts ab_c;
  std::string ab_data, ab_out;
  std::vector<std::string> ab_matrix;
  int ab_seeds = 3;
  add_common(ab, ab_c);
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--out", ab_out, "output directory")->required();
  ab->add_option("--matrix", ab_matrix, "ablation flags to run (Full row always included)")->required();
  ab->add_option("--seeds", ab_seeds, "seeds per row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      RunConfig cfg = load_config_or_default(gen_c.config_path);
      apply_overrides(cfg, gen_c);
      cfg.scene_spec = gen_spec;
      if (gen_views > 0) cfg.train_views = gen_views;
      if (gen_spp > 0) cfg.reference_spp = gen_spp;
      if (!gen_res.empty()) {
        auto x = gen_res.find('x');
        require(x != std::string::npos, Errc::usage, "--res must look like 64x64");
        cfg.width = std::stoi(gen_res.substr(0, x));
        cfg.height = std::stoi(gen_res.substr(x + 1));
      }
      ThreadPool pool(resolve_threads(cfg.threads));
      Dataset ds = gen_scene_cmd(cfg, gen_out, pool);
      std::cout << "wrote " << ds.views.size() << " views (" << ds.train_indices().size() << " train, "
                << ds.heldout_indices().size() << " heldout) to " << gen_out << "\n";
    } else if (pre->parsed()) {
      RunConfig cfg = load_config_or_default(pre_c.config_path);
      apply_overrides(cfg, pre_c);
      ThreadPool pool(resolve_threads(cfg.threads));
      Dataset ds = load_dataset(pre_data);
      auto out = pretrain_cmd(cfg, ds, pre_out, pool);
      std::cout << "pretrained " << out.result.log.size() << " iterations; final L_nerf = "
                << (out.result.log.empty() ? 0.0 : double(out.result.log.back().total)) << "\n";
    } else if (ini->parsed()) {
      LoadedCheckpoint ck = load_checkpoint(ini_ckpt);
      RunConfig cfg = config_for_checkpoint(ck, ini_c.config_path);
      apply_overrides(cfg, ini_c);
      if (ini_budget >= 0) cfg.init_budget.total_points = ini_budget;
      if (ini_ratio >= 0) cfg.init_budget.edge_ratio = real(ini_ratio);
      if (ini_no_edge) cfg.ablation.no_edge_init = true;
      ThreadPool pool(resolve_threads(cfg.threads));
      Dataset ds = load_dataset(ini_data);
      auto out = init_gaussians_cmd(cfg, ck.model, ds, pool);
      save_checkpoint(ini_out, ck.model, ck.iteration, cfg.seed, run_config_to_json(cfg));
      std::cout << "drew " << out.edge_draws << " edge + " << out.random_draws << " random rays, placed "
                << out.added << " Gaussians (" << out.dropped << " dropped)\n";
    } else if (tr->parsed()) {
      LoadedCheckpoint ck = load_checkpoint(tr_ckpt);
      RunConfig cfg = config_for_checkpoint(ck, tr_c.config_path);
      apply_overrides(cfg, tr_c);
      for (const auto& flag : tr_ablate) set_ablation_flag(cfg, flag);
      ThreadPool pool(resolve_threads(cfg.threads));
      Dataset ds = load_dataset(tr_data);
      auto out = train_joint_cmd(cfg, ck.model, ds, tr_out, pool);
      std::cout << "joint training done: heldout PSNR " << double(out.final_eval.psnr_db) << " dB, SSIM "
                << double(out.final_eval.ssim_val) << ", " << ck.model.gaussians.size() << " Gaussians\n";
    } else if (ren->parsed()) {
      LoadedCheckpoint ck = load_checkpoint(ren_ckpt);
      RunConfig cfg = config_for_checkpoint(ck, ren_c.config_path);
      apply_overrides(cfg, ren_c);
      ThreadPool pool(resolve_threads(cfg.threads));
      Camera cam;
      if (!ren_pose.empty()) {
        std::ifstream pf(ren_pose);
        require(bool(pf), Errc::io, "cannot open pose file: " + ren_pose);
        nlohmann::json pj;
        pf >> pj;
        cam = js::to_camera(pj);
      } else {
        require(ren_camera >= 0, Errc::usage, "render: need --camera IDX or --pose FILE");
        auto views = cameras_from_config(cfg);
        require(ren_camera < int(views.size()), Errc::usage,
                "camera index out of range (have " + std::to_string(views.size()) + ")");
        cam = views[std::size_t(ren_camera)].cam;
      }
      counters::reset_all();
      RenderBranch branch = ren_branch == "gs" ? RenderBranch::gs : RenderBranch::nerf;
      Image img = render_cmd(ck.model, cam, branch, cfg.schedule.nerf_samples, pool);
      write_image(ren_out, img);
      std::cout << "rendered " << ren_branch << " branch to " << ren_out
                << " (hash_encode=" << counters::hash_encode_calls()
                << " nerf_decoder=" << counters::nerf_decoder_calls()
                << " gs_decoder=" << counters::gs_decoder_calls() << ")\n";
    } else if (ev->parsed()) {
      LoadedCheckpoint ck = load_checkpoint(ev_ckpt);
      RunConfig cfg = config_for_checkpoint(ck, ev_c.config_path);
      apply_overrides(cfg, ev_c);
      ThreadPool pool(resolve_threads(cfg.threads));
      Dataset ds = load_dataset(ev_data);
      if (!ev_renders.empty()) fs::create_directories(ev_renders);
      RenderBranch branch = ev_branch == "gs" ? RenderBranch::gs : RenderBranch::nerf;
      EvalReport rep = eval_cmd(ck.model, ds, branch, cfg.schedule.nerf_samples, pool, ev_renders);
      std::ofstream rf(ev_out);
      require(bool(rf), Errc::io, "cannot write report: " + ev_out);
      rf << rep.to_json(ev_branch).dump(2) << "\n";
      std::cout << "mean heldout PSNR " << double(rep.mean_psnr) << " dB, SSIM " << double(rep.mean_ssim)
                << " (" << rep.psnr_db.size() << " views)\n";
    } else if (ab->parsed()) {
      RunConfig base = load_config_or_default(ab_c.config_path);
      apply_overrides(base, ab_c);
      ThreadPool pool(resolve_threads(base.threads));
      Dataset ds = load_dataset(ab_data);
      fs::create_directories(ab_out);

      std::vector<std::string> rows = {"Full"};
      for (const auto& f : ab_matrix)
        if (f != "Full" && f != "full") rows.push_back(f);

      nlohmann::json report;
      report["rows"] = nlohmann::json::array();
      std::vector<Model> pretrained;
      for (int s = 0; s < ab_seeds; ++s) {
        RunConfig cfg = base;
        cfg.seed = base.seed + std::uint64_t(s);
        pretrained.push_back(std::move(pretrain_cmd(cfg, ds, "", pool, false).model));
      }
      printf("%-24s", "row");
      for (int s = 0; s < ab_seeds; ++s) printf("  seed%-2d ", s);
      printf("  mean\n");
      for (const auto& row : rows) {
        nlohmann::json jrow;
        jrow["flag"] = row;
        jrow["psnr"] = nlohmann::json::array();
        real mean = 0;
        printf("%-24s", row.c_str());
        for (int s = 0; s < ab_seeds; ++s) {
          RunConfig cfg = base;
          cfg.seed = base.seed + std::uint64_t(s);
          set_ablation_flag(cfg, row);
          auto res = run_pipeline(cfg, ds, pool, &pretrained[std::size_t(s)]);
          jrow["psnr"].push_back(res.heldout_psnr);
          mean += res.heldout_psnr;
          printf("  %6.2f ", double(res.heldout_psnr));
          fflush(stdout);
        }
        mean /= real(ab_seeds);
        jrow["mean_psnr"] = mean;
        printf("  %6.2f\n", double(mean));
        report["rows"].push_back(jrow);
      }
      std::ofstream rf(fs::path(ab_out) / "ablate_report.json");
      rf << report.dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
