#pragma once

#include <ostream>
#include <vector>

#include "nerfgs/adam.hpp"
#include "nerfgs/common.hpp"
#include "nerfgs/densify.hpp"
#include "nerfgs/gs_rays.hpp"
#include "nerfgs/losses.hpp"
#include "nerfgs/metrics.hpp"
#include "nerfgs/model.hpp"
#include "nerfgs/nerf.hpp"
#include "nerfgs/scene.hpp"
#include "nerfgs/threading.hpp"

namespace nerfgs {

struct TrainSchedule {
  int pretrain_epochs = 10;
  int nerf_batch_rays = 1024;
  int nerf_samples = 64;
  int joint_iters = 2000;
  int gs_rays_per_iter = 256;
  int densify_interval = 100;
  int densify_max_new = 200;
  real densify_alpha_threshold = real(0.6);
  int prune_interval = 300;
  real prune_opacity = real(0.005);
  real grad_densify_threshold = real(0.12);   // mean |d loss / d mean2d|, pixels
  real split_scale_fraction = real(0.01);     // of scene extent, 3DGS percent_dense
  real tau_op = real(0.5);
  int eval_interval = 250;
  std::uint64_t seed = 1;

  real lr_hash = real(1e-2);
  real lr_mlp = real(1e-3);
  real lr_delta_pos = real(1.6e-4);  // scaled by scene extent
  real lr_delta_fea = real(2.5e-3);
  real lr_decay = real(0.1);  // total decay factor across a run

  void validate() const {
    require(densify_interval >= 1 && prune_interval >= 1, Errc::usage, "schedule: intervals must be >= 1");
    require(prune_opacity > 0 && prune_opacity < 1, Errc::usage, "schedule: prune opacity must be in (0,1)");
    require(nerf_samples >= 1 && nerf_batch_rays >= 1, Errc::usage, "schedule: sampling counts must be >= 1");
    require(joint_iters >= 0 && pretrain_epochs >= 0, Errc::usage, "schedule: iteration counts must be >= 0");
    require(tau_op >= 0 && tau_op <= 1, Errc::usage, "schedule: tau_op must be in [0,1]");
  }
};

// One switch per removable paper component (Table 3 / Table 8 rows).
struct AblationFlags {
  bool no_feature_share = false;
  bool no_residual_feature = false;
  bool no_residual_position = false;
  bool no_gs_rays = false;
  bool no_edge_init = false;
  bool no_nerf_growth = false;
  bool no_gradient_growth = false;
  bool no_joint_rgb = false;
  bool no_joint_op = false;
  bool no_reg_fea = false;
  bool no_reg_pos = false;
  bool no_nerf_loss = false;
  bool no_vol_loss = false;
};

struct DensifyEvent {
  int iter = 0;
  real r_min = 0;
  int nerf_added = 0;
  int cloned = 0;
  int split = 0;
  int pruned = 0;
  std::vector<Vec3> nerf_positions;
  std::vector<real> nerf_alphas;
};

struct TrainResult {
  std::vector<LossReport> log;
  std::vector<DensifyEvent> events;
  std::size_t empty_gs_ray_events = 0;
};

namespace detail {

inline Rng stream_rng(std::uint64_t seed, std::uint64_t flavor, std::uint64_t iter, std::uint64_t idx = 0) {
  return Rng::split(seed, (iter << 4) | flavor, idx);
}

inline void log_report(std::vector<LossReport>& log, std::ostream* jsonl, const LossReport& r) {
  log.push_back(r);
  if (jsonl) *jsonl << r.to_json().dump() << "\n" << std::flush;
}

}  // namespace detail

inline int pretrain_iterations(const TrainSchedule& sched, const Dataset& ds) {
  std::size_t px = 0;
  for (int v : ds.train_indices())
    px += std::size_t(ds.views[v].cam.width) * std::size_t(ds.views[v].cam.height);
  std::size_t per_epoch = (px + sched.nerf_batch_rays - 1) / sched.nerf_batch_rays;
  return int(per_epoch * std::size_t(sched.pretrain_epochs));
}

// Minimizes L_nerf (L1 RGB + weighted ray entropy) over random ray batches.
inline TrainResult pretrain_nerf(Model& m, const Dataset& ds, const TrainSchedule& sched,
                                 const LossWeights& weights, ThreadPool* pool, std::ostream* jsonl = nullptr) {
  sched.validate();
  weights.validate();
  TrainResult result;
  const auto train = ds.train_indices();
  require(!train.empty(), Errc::usage, "pretrain: dataset has no training views");
  const int iters = pretrain_iterations(sched, ds);
  const int K = sched.nerf_batch_rays;
  const int workers = pool ? pool->workers() : 1;
  GradBuffers bufs(m.registry, workers);

  struct Draw {
    int view, px, py;
    Ray ray;
    bool valid;
  };
  std::vector<Draw> draws(K);
  std::vector<real> term_rgb(K), term_en(K);
  std::vector<NerfRayWorkspace> ws_pool(workers);
  std::vector<std::vector<real>> ent_grads(workers);

  for (int iter = 0; iter < iters; ++iter) {
    Rng pick = detail::stream_rng(sched.seed, 1, std::uint64_t(iter));
    for (int j = 0; j < K; ++j) {
      Draw& d = draws[j];
      d.view = train[pick.below(train.size())];
      const Camera& cam = ds.views[d.view].cam;
      d.px = int(pick.below(std::uint64_t(cam.width)));
      d.py = int(pick.below(std::uint64_t(cam.height)));
      d.valid = pixel_ray(ds.scene, cam, real(d.px), real(d.py), d.ray);
    }
    const real lr_scale = std::pow(sched.lr_decay, real(iter) / real(std::max(1, iters)));

    auto body = [&](int w, std::size_t begin, std::size_t end) {
      NerfRayWorkspace& ws = ws_pool[w];
      NerfGradSinks sinks;
      sinks.sigma_w = bufs.at(w, std::size_t(m.sigma_w_id)).data();
      sinks.color_w = bufs.at(w, std::size_t(m.color_w_id)).data();
      sinks.tables.resize(m.table_ids.size());
      for (std::size_t l = 0; l < m.table_ids.size(); ++l)
        sinks.tables[l] = bufs.at(w, std::size_t(m.table_ids[l])).data();
      auto& egrad = ent_grads[w];

      for (std::size_t j = begin; j < end; ++j) {
        term_rgb[j] = 0;
        term_en[j] = 0;
        if (!draws[j].valid) continue;
        Rng ray_rng = detail::stream_rng(sched.seed, 2, std::uint64_t(iter), j);
        render_ray_cached(m.nerf, draws[j].ray, sched.nerf_samples, ray_rng, SampleMode::stratified, ws);
        const Vec3 gt = ds.images[draws[j].view].at(draws[j].px, draws[j].py);
        Vec3 diff = ws.out.color - gt;
        Vec3 grad_c{0, 0, 0};
        for (int c = 0; c < 3; ++c) {
          term_rgb[j] += std::abs(diff[c]) / real(3 * K);
          grad_c[c] = (diff[c] > 0 ? 1 : (diff[c] < 0 ? -1 : 0)) / real(3 * K);
        }
        real H = ray_entropy(ws.out.alphas);
        term_en[j] = H / real(K);
        ray_entropy_backward(ws.out.alphas, weights.en / real(K), egrad);
        nerf_ray_backward(m.nerf, ws, grad_c, &egrad, sinks);
      }
    };
    if (pool)
      pool->parallel_for(std::size_t(K), body);
    else
      body(0, 0, std::size_t(K));
    bufs.merge_and_reset();

    LossReport rep;
    rep.iter = iter;
    for (int j = 0; j < K; ++j) {
      rep.nerf_rgb += term_rgb[j];
      rep.nerf_en += term_en[j];
    }
    rep.total = rep.nerf_rgb + weights.en * rep.nerf_en;
    if (!std::isfinite(rep.total))
      fail(Errc::divergence, "pretrain_nerf: non-finite loss at iteration " + std::to_string(iter));

    AdamConfig hash_cfg{sched.lr_hash * lr_scale};
    AdamConfig mlp_cfg{sched.lr_mlp * lr_scale};
    for (int id : m.table_ids) adam_step(m.registry.block(std::size_t(id)), hash_cfg);
    adam_step(*m.nerf.sigma_weights, mlp_cfg);
    adam_step(*m.nerf.color_weights, mlp_cfg);
    // Blocks not touched by this stage keep zero grads; clear them anyway so
    // stale accumulation can never leak across stages.
    m.gs_weights->zero_grads();

    detail::log_report(result.log, jsonl, rep);
  }
  return result;
}

struct HeldoutEval {
  real psnr_db = 0;
  real ssim_val = 0;
};

inline HeldoutEval eval_heldout_gs(Model& m, const Dataset& ds, ThreadPool* pool) {
  HeldoutEval ev;
  auto held = ds.heldout_indices();
  if (held.empty()) return ev;
  GsForward fwd;
  for (int v : held) {
    Image img = gs_render(m, ds.views[v].cam, fwd, {}, pool);
    ev.psnr_db += psnr(img, ds.images[v]);
    ev.ssim_val += ssim(img, ds.images[v]);
  }
  ev.psnr_db /= real(held.size());
  ev.ssim_val /= real(held.size());
  return ev;
}

// The joint optimization loop of Eq. 13: per iteration render the GS branch,
// select GS-Rays, render the NeRF branch along them, assemble the six-term
// loss, backpropagate through both branches into the shared tables, and run
// the densify/prune schedule.
inline TrainResult train_joint(Model& m, const Dataset& ds, const TrainSchedule& sched,
                               const LossWeights& weights_in, const AblationFlags& flags, ThreadPool* pool,
                               std::ostream* jsonl = nullptr) {
  sched.validate();
  weights_in.validate();
  LossWeights w = weights_in;  // effective weights: ablations zero terms
  if (flags.no_joint_rgb) w.rgb = 0;
  if (flags.no_joint_op) w.op = 0;
  if (flags.no_reg_fea) w.fea = 0;
  if (flags.no_reg_pos) w.pos = 0;
  if (flags.no_nerf_loss) w.nerf = 0;
  if (flags.no_vol_loss) w.vol = 0;

  TrainResult result;
  const auto train = ds.train_indices();
  require(!train.empty(), Errc::usage, "train_joint: dataset has no training views");
  const int workers = pool ? pool->workers() : 1;
  GradBuffers bufs(m.registry, workers);
  const real extent = m.spec.grid.bounds.diag();

  GsForward fwd;
  GsForward eval_fwd;
  GaussExtraGrads extra;
  GradDensifyState dstate;
  dstate.reset(m.gaussians.size());
  std::vector<SplatGrad> sgrads;

  const int K = sched.gs_rays_per_iter;
  std::vector<GsRay> rays;
  std::vector<real> t_nrgb(K), t_en(K), t_jrgb(K), t_jop(K);
  std::vector<Vec3> img_grads(K);
  std::vector<real> op_grads(K);
  std::vector<char> ray_valid(K);
  std::vector<NerfRayWorkspace> ws_pool(workers);
  std::vector<std::vector<real>> alpha_grads(workers);
  struct Cand {
    Vec3 pos;
    real alpha;
  };
  std::vector<std::vector<Cand>> cand_pool(workers);

  const bool nerf_side = w.nerf > 0 || w.rgb > 0 || w.op > 0 || !flags.no_nerf_growth;

  for (int iter = 0; iter < sched.joint_iters; ++iter) {
    Rng iter_rng = detail::stream_rng(sched.seed, 3, std::uint64_t(iter));
    const int view = train[iter_rng.below(train.size())];
    const Camera& cam = ds.views[view].cam;
    const Image& gt = ds.images[view];
    const bool densify_now =
        (iter + 1) % sched.densify_interval == 0 && (!flags.no_nerf_growth || !flags.no_gradient_growth);
    const bool collect_candidates = (iter + 1) % sched.densify_interval == 0 && !flags.no_nerf_growth;

    gs_render(m, cam, fwd, {}, pool);

    LossReport rep;
    rep.iter = iter;

    Image grad_image(cam.width, cam.height);
    rep.gs_rgb = image_l1(fwd.image, gt, &grad_image, 1);
    rep.gs_ssim = ssim_loss(fwd.image, gt, &grad_image, w.ssim);

    extra.resize(m.gaussians.size());
    // Volume regularizer over all Gaussians (Scaffold-GS proxy).
    for (std::size_t i = 0; i < m.gaussians.size(); ++i) {
      const Vec3& s = fwd.ctxs[i].attrs.scale;
      rep.gs_vol += s.x * s.y * s.z;
      if (w.vol > 0) extra.scale[i] += Vec3{s.y * s.z, s.x * s.z, s.x * s.y} * w.vol;
    }

    // GS-Rays and the NeRF side.
    int k_used = 0;
    if (K > 0 && nerf_side) {
      Rng ray_pick = detail::stream_rng(sched.seed, 4, std::uint64_t(iter));
      if (flags.no_gs_rays)
        rays = select_random_rays(cam, m.spec.grid.bounds, K, ray_pick);
      else
        rays = select_gs_rays(m, fwd.ctxs, cam, m.spec.grid.bounds, K, sched.tau_op, ray_pick,
                              &result.empty_gs_ray_events);
      k_used = int(rays.size());
    }
    if (k_used > 0) {
      const real invK = real(1) / real(k_used);
      const bool backprop_nerf = w.nerf > 0 || w.rgb > 0 || w.op > 0;
      auto body = [&](int wk, std::size_t begin, std::size_t end) {
        NerfRayWorkspace& ws = ws_pool[wk];
        NerfGradSinks sinks;
        if (backprop_nerf) {
          sinks.sigma_w = bufs.at(wk, std::size_t(m.sigma_w_id)).data();
          sinks.color_w = bufs.at(wk, std::size_t(m.color_w_id)).data();
          sinks.tables.resize(m.table_ids.size());
          for (std::size_t l = 0; l < m.table_ids.size(); ++l)
            sinks.tables[l] = bufs.at(wk, std::size_t(m.table_ids[l])).data();
        }
        auto& agrad = alpha_grads[wk];
        for (std::size_t j = begin; j < end; ++j) {
          t_nrgb[j] = t_en[j] = t_jrgb[j] = t_jop[j] = 0;
          img_grads[j] = {0, 0, 0};
          op_grads[j] = 0;
          ray_valid[j] = 0;
          const GsRay& gr = rays[j];
          if (!(gr.ray.near < gr.ray.far)) continue;
          ray_valid[j] = 1;
          Rng ray_rng = detail::stream_rng(sched.seed, 5, std::uint64_t(iter), j);
          render_ray_cached(m.nerf, gr.ray, sched.nerf_samples, ray_rng, SampleMode::stratified, ws);

          const Vec3 gt_pix = gt.at(gr.px, gr.py);
          const Vec3 gs_pix = fwd.image.at(gr.px, gr.py);
          Vec3 grad_c{0, 0, 0};
          for (int c = 0; c < 3; ++c) {
            real dn = ws.out.color[c] - gt_pix[c];
            t_nrgb[j] += std::abs(dn) * invK / 3;
            real sn = dn > 0 ? 1 : (dn < 0 ? -1 : 0);
            grad_c[c] += w.nerf * sn * invK / 3;
            real dj = ws.out.color[c] - gs_pix[c];
            t_jrgb[j] += std::abs(dj) * invK / 3;
            real sj = dj > 0 ? 1 : (dj < 0 ? -1 : 0);
            grad_c[c] += w.rgb * sj * invK / 3;
            img_grads[j][c] = -w.rgb * sj * invK / 3;  // GS side of the joint term
          }
          real H = ray_entropy(ws.out.alphas);
          t_en[j] = H * invK;
          ray_entropy_backward(ws.out.alphas, w.nerf * w.en * invK, agrad);

          if (gr.gauss_index >= 0) {
            // Opacity alignment at the sample nearest the source Gaussian.
            int nearest = 0;
            real best = std::numeric_limits<real>::infinity();
            for (std::size_t s = 0; s < ws.out.ts.size(); ++s) {
              real d = std::abs(ws.out.ts[s] - gr.source_t);
              if (d < best) {
                best = d;
                nearest = int(s);
              }
            }
            real a_g = fwd.ctxs[gr.gauss_index].attrs.opacity;
            real a_n = ws.out.alphas[nearest];
            real d = a_g - a_n;
            t_jop[j] = std::abs(d) * invK;
            real sg = d > 0 ? 1 : (d < 0 ? -1 : 0);
            op_grads[j] = w.op * sg * invK;
            agrad[nearest] += -w.op * sg * invK;
          }
          if (collect_candidates) {
            auto& cands = cand_pool[wk];
            for (std::size_t s = 0; s < ws.out.alphas.size(); ++s)
              if (ws.out.alphas[s] >= sched.densify_alpha_threshold)
                cands.push_back({ws.samples.xs[s], ws.out.alphas[s]});
          }
          if (backprop_nerf) nerf_ray_backward(m.nerf, ws, grad_c, &agrad, sinks);
        }
      };
      if (pool)
        pool->parallel_for(std::size_t(k_used), body);
      else
        body(0, 0, std::size_t(k_used));

      for (int j = 0; j < k_used; ++j) {
        if (!ray_valid[j]) continue;
        rep.nerf_rgb += t_nrgb[j];
        rep.nerf_en += t_en[j];
        rep.joint_rgb += t_jrgb[j];
        rep.joint_op += t_jop[j];
        grad_image.at(rays[j].px, rays[j].py) += img_grads[j];
        if (rays[j].gauss_index >= 0) extra.opacity[rays[j].gauss_index] += op_grads[j];
      }
    }

    // Residual regularizers (frozen residuals also skip their gradient).
    rep.reg_fea = residual_l2(*m.gaussians.delta_fea, w.fea, !flags.no_residual_feature);
    rep.reg_pos = residual_l2(*m.gaussians.delta_pos, w.pos, !flags.no_residual_position);

    gs_render_backward(m, fwd, grad_image, &extra, bufs, pool, &sgrads);
    dstate.accumulate(fwd, sgrads);
    bufs.merge_and_reset();

    rep.total = rep.weighted_total(w);
    rep.gaussian_count = m.gaussians.size();
    if (!std::isfinite(rep.total))
      fail(Errc::divergence, "train_joint: non-finite loss at iteration " + std::to_string(iter));

    const real lr_scale = std::pow(sched.lr_decay, real(iter) / real(std::max(1, sched.joint_iters)));
    AdamConfig hash_cfg{sched.lr_hash * lr_scale};
    AdamConfig mlp_cfg{sched.lr_mlp * lr_scale};
    AdamConfig dpos_cfg{sched.lr_delta_pos * extent * lr_scale};
    AdamConfig dfea_cfg{sched.lr_delta_fea * lr_scale};
    for (int id : m.table_ids) adam_step(m.registry.block(std::size_t(id)), hash_cfg);
    adam_step(*m.nerf.sigma_weights, mlp_cfg);
    adam_step(*m.nerf.color_weights, mlp_cfg);
    adam_step(*m.gs_weights, mlp_cfg);
    if (flags.no_residual_position)
      m.gaussians.delta_pos->zero_grads();
    else
      adam_step(*m.gaussians.delta_pos, dpos_cfg);
    if (flags.no_residual_feature)
      m.gaussians.delta_fea->zero_grads();
    else
      adam_step(*m.gaussians.delta_fea, dfea_cfg);

    // Structural maintenance: prune, then gradient growth, then NeRF growth.
    bool structural = false;
    const bool prune_now = (iter + 1) % sched.prune_interval == 0;
    DensifyEvent ev;
    ev.iter = iter;
    if (prune_now) {
      auto keepm = prune_mask(fwd.ctxs, sched.prune_opacity);
      std::size_t kept = 0;
      for (char c : keepm) kept += c != 0;
      if (kept < keepm.size()) {
        ev.pruned = int(keepm.size() - kept);
        m.keep_gaussians(keepm);
        // Filter the decode contexts and densify statistics alongside.
        std::size_t out = 0;
        for (std::size_t i = 0; i < keepm.size(); ++i) {
          if (!keepm[i]) continue;
          if (out != i) {
            fwd.ctxs[out] = std::move(fwd.ctxs[i]);
            dstate.grad2d_sum[out] = dstate.grad2d_sum[i];
            dstate.seen[out] = dstate.seen[i];
          }
          ++out;
        }
        fwd.ctxs.resize(out);
        dstate.grad2d_sum.resize(out);
        dstate.seen.resize(out);
        structural = true;
      }
    }
    if (densify_now) {
      if (!flags.no_gradient_growth) {
        Rng split_rng = detail::stream_rng(sched.seed, 6, std::uint64_t(iter));
        auto gres = gradient_densify(m, fwd.ctxs, dstate, sched.grad_densify_threshold,
                                     sched.split_scale_fraction * extent, split_rng);
        ev.cloned = gres.cloned;
        ev.split = gres.split;
        structural = structural || gres.cloned > 0 || gres.split > 0;
      }
      if (!flags.no_nerf_growth) {
        std::vector<GrowthCandidate> cands;
        for (int wk = 0; wk < workers; ++wk) {
          for (const auto& c : cand_pool[wk]) cands.push_back({c.pos, c.alpha});
          cand_pool[wk].clear();
        }
        if (!cands.empty() && m.gaussians.size() >= 2) {
          ev.r_min = 2 * mean_nn_distance(m.gaussians.positions, pool);
          if (ev.r_min > 0) {
            auto added = densify_from_nerf(cands, m.gaussians.positions, sched.densify_max_new,
                                           sched.densify_alpha_threshold, ev.r_min);
            for (int idx : added) {
              m.append_gaussian(cands[idx].pos);
              ev.nerf_positions.push_back(cands[idx].pos);
              ev.nerf_alphas.push_back(cands[idx].alpha_nerf);
            }
            ev.nerf_added = int(added.size());
            structural = structural || !added.empty();
          }
        }
      }
    }
    if (structural) dstate.reset(m.gaussians.size());
    if (densify_now || prune_now) result.events.push_back(std::move(ev));

    if ((iter + 1) % sched.eval_interval == 0 || iter + 1 == sched.joint_iters) {
      rep.heldout_psnr = eval_heldout_gs(m, ds, pool).psnr_db;
    }
    detail::log_report(result.log, jsonl, rep);
  }
  return result;
}

}  // namespace nerfgs
