#include <gtest/gtest.h>

#ifdef NERFGS_HAVE_EIGEN
#include <Eigen/Dense>
#endif

#include "oracles.hpp"

using namespace nerfgs;

namespace {

Vec4 random_unit_quat(Rng& rng) {
  Vec4 q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  real n = q.norm();
  for (int i = 0; i < 4; ++i) q[i] /= n;
  return q;
}

}  // namespace

TEST(Covariance, IdentityQuatUnitScale) {
  Vec4 q{1, 0, 0, 0};
  Mat3 s = covariance(q, {1, 1, 1});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(double(s(i, j)), i == j ? 1.0 : 0.0, 1e-14);
}

TEST(Covariance, AxisAlignedScaling) {
  Vec4 q{1, 0, 0, 0};
  Mat3 s = covariance(q, {2, 1, 1});
  EXPECT_NEAR(double(s(0, 0)), 4.0, 1e-14);
  EXPECT_NEAR(double(s(1, 1)), 1.0, 1e-14);
  EXPECT_NEAR(double(s(2, 2)), 1.0, 1e-14);
}

#ifdef NERFGS_HAVE_EIGEN
TEST(Covariance, EigenvaluesAreSquaredScales) {
  // Criterion: over 1e3 random (r, s), eig(Sigma) == {s^2} as a multiset.
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    Vec4 q = random_unit_quat(rng);
    Vec3 s{rng.uniform(real(0.2), 2), rng.uniform(real(0.2), 2), rng.uniform(real(0.2), 2)};
    Mat3 sigma = covariance(q, s);
    // symmetry
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(double(sigma(i, j)), double(sigma(j, i)), 1e-12);
    Eigen::Matrix3d M;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) M(i, j) = double(sigma(i, j));
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M);
    std::vector<double> eig{es.eigenvalues()[0], es.eigenvalues()[1], es.eigenvalues()[2]};
    std::vector<double> expect{double(s.x * s.x), double(s.y * s.y), double(s.z * s.z)};
    std::sort(eig.begin(), eig.end());
    std::sort(expect.begin(), expect.end());
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(eig[i], expect[i], 1e-10);
  }
}
#endif

TEST(Covariance, PositiveDefiniteForPositiveScales) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Vec4 q = random_unit_quat(rng);
    Vec3 s{rng.uniform(real(0.01), 3), rng.uniform(real(0.01), 3), rng.uniform(real(0.01), 3)};
    Mat3 sigma = covariance(q, s);
    Vec3 v = rng.unit_vec3();
    EXPECT_GT(double(v.dot(sigma * v)), 0.0);
  }
}

TEST(Covariance, BackwardMatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Vec4 q = random_unit_quat(rng);
    Vec3 s{rng.uniform(real(0.3), 2), rng.uniform(real(0.3), 2), rng.uniform(real(0.3), 2)};
    Mat3 probe;
    for (auto& v : probe.m) v = rng.uniform(-1, 1);
    // symmetrize the probe so grad_sigma meets the contract
    Mat3 sym;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) sym(i, j) = (probe(i, j) + probe(j, i)) / 2;

    // d <sym, Sigma(normalize(qraw), exp(sraw))> / d(qraw, sraw) via FD.
    DifferentiableScalar f;
    f.value = [&](const std::vector<real>& x) {
      Vec4 qr{x[0], x[1], x[2], x[3]};
      real n = qr.norm();
      for (int i = 0; i < 4; ++i) qr[i] /= n;
      Vec3 sc{std::exp(x[4]), std::exp(x[5]), std::exp(x[6])};
      Mat3 sigma = covariance(qr, sc);
      real acc = 0;
      for (int i = 0; i < 9; ++i) acc += sym.m[i] * sigma.m[i];
      return acc;
    };
    f.gradient = [&](const std::vector<real>& x) {
      Vec4 qr{x[0], x[1], x[2], x[3]};
      real n = qr.norm();
      Vec4 qu = qr;
      for (int i = 0; i < 4; ++i) qu[i] /= n;
      Vec3 sc{std::exp(x[4]), std::exp(x[5]), std::exp(x[6])};
      Vec4 gq{};
      Vec3 gs{};
      covariance_backward(qu, sc, sym, gq, gs);
      // chain through normalize and exp
      real qdot = qu.w * gq.w + qu.x * gq.x + qu.y * gq.y + qu.z * gq.z;
      std::vector<real> g(7);
      for (int i = 0; i < 4; ++i) g[i] = (gq[i] - qu[i] * qdot) / n;
      for (int i = 0; i < 3; ++i) g[4 + i] = gs[i] * sc[i];
      return g;
    };
    std::vector<real> x = {q.w * 2, q.x * 2, q.y * 2, q.z * 2, std::log(s.x), std::log(s.y), std::log(s.z)};
    EXPECT_LT(double(finite_diff_check(f, x, real(1e-5))), 1e-6) << "trial " << trial;
  }
}

TEST(EvalSh, ZeroCoeffsGiveMidGray) {
  std::vector<real> coeffs(4 * 3, 0);
  Vec3 c = eval_sh(1, coeffs.data(), Vec3{0, 0, 1});
  EXPECT_DOUBLE_EQ(double(c.x), 0.5);
  EXPECT_DOUBLE_EQ(double(c.y), 0.5);
  EXPECT_DOUBLE_EQ(double(c.z), 0.5);
}

TEST(EvalSh, DegreeZeroIsViewIndependent) {
  std::vector<real> coeffs = {real(0.3), real(-0.2), real(0.1)};
  Rng rng(4);
  Vec3 base = eval_sh(0, coeffs.data(), rng.unit_vec3());
  for (int i = 0; i < 20; ++i) {
    Vec3 c = eval_sh(0, coeffs.data(), rng.unit_vec3());
    EXPECT_EQ(c.x, base.x);
    EXPECT_EQ(c.y, base.y);
    EXPECT_EQ(c.z, base.z);
  }
}

TEST(EvalSh, Degree1AntisymmetricInZ) {
  // Only the z-aligned band-1 coefficient set: c(d) - c(-d) flips with d_z.
  std::vector<real> coeffs(4 * 3, 0);
  coeffs[2 * 3 + 0] = real(0.2);  // Y_10 ~ z on the red channel
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    Vec3 d = rng.unit_vec3();
    Vec3 cp = eval_sh(1, coeffs.data(), d);
    Vec3 cm = eval_sh(1, coeffs.data(), d * real(-1));
    real asym = (cp.x - real(0.5)) + (cm.x - real(0.5));
    EXPECT_NEAR(double(asym), 0.0, 1e-12);
    EXPECT_NEAR(double(cp.x - cm.x), 2 * 0.2 * double(kSH1) * double(d.z), 1e-12);
  }
}

TEST(EvalSh, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const int deg = int(rng.below(4));
    const int nc = sh_coeff_count(deg) * 3;
    std::vector<real> coeffs(nc);
    for (auto& v : coeffs) v = rng.uniform(real(-0.15), real(0.15));
    Vec3 probe = rng.uniform_vec3(-1, 1);
    // inputs: coeffs then a raw (unnormalized) direction
    DifferentiableScalar f;
    f.value = [&](const std::vector<real>& x) {
      Vec3 d{x[nc], x[nc + 1], x[nc + 2]};
      Vec3 c = eval_sh(deg, x.data(), d.normalized());
      return probe.dot(c);
    };
    f.gradient = [&](const std::vector<real>& x) {
      Vec3 draw{x[nc], x[nc + 1], x[nc + 2]};
      real n = draw.norm();
      Vec3 d = draw / n;
      std::vector<real> g(x.size(), 0);
      Vec3 gdir = eval_sh_backward(deg, x.data(), d, probe, g.data());
      Vec3 graw = (gdir - d * d.dot(gdir)) / n;
      g[nc] = graw.x;
      g[nc + 1] = graw.y;
      g[nc + 2] = graw.z;
      return g;
    };
    std::vector<real> x = coeffs;
    Vec3 draw = rng.unit_vec3() * rng.uniform(real(0.8), real(1.2));
    x.push_back(draw.x);
    x.push_back(draw.y);
    x.push_back(draw.z);
    EXPECT_LT(double(finite_diff_check(f, x, real(1e-5))), 1e-6) << "trial " << trial;
  }
}

TEST(Decode, ZeroResidualsReduceToSharedInputs) {
  auto m = oracle::tiny_model(7);
  Rng rng(8);
  oracle::randomize_params(m, rng);
  Vec3 p{0.2, 0.1, -0.3};
  auto f = encode(m.nerf.grid, m.spec.grid, p);
  std::vector<real> zeros(f.size(), 0);
  auto a = decode_attributes(m.gs_spec, m.gs_head, *m.gs_weights, p, {0, 0, 0}, f.data(), zeros.data(),
                             m.scale_max);
  auto b = decode_attributes(m.gs_spec, m.gs_head, *m.gs_weights, p, {0, 0, 0}, f.data(), zeros.data(),
                             m.scale_max);
  EXPECT_EQ(a.opacity, b.opacity);  // deterministic
  // Perturbing delta_f changes the attributes (sensitivity > 0).
  std::vector<real> df(f.size(), 0);
  df[0] = real(0.25);
  auto c = decode_attributes(m.gs_spec, m.gs_head, *m.gs_weights, p, {0, 0, 0}, f.data(), df.data(),
                             m.scale_max);
  EXPECT_NE(a.opacity, c.opacity);
}

TEST(Decode, ZeroWeightsActivationValues) {
  auto m = oracle::tiny_model(9);
  for (auto& v : m.gs_weights->values) v = 0;
  std::vector<real> f(m.feature_dim(), 0);
  auto a = decode_attributes(m.gs_spec, m.gs_head, *m.gs_weights, {0, 0, 0}, {0, 0, 0}, f.data(), f.data(),
                             m.scale_max);
  EXPECT_NEAR(double(a.opacity), 0.5, 1e-12);          // sigmoid(0)
  EXPECT_DOUBLE_EQ(double(a.rot.w), 1.0);              // zero quaternion guarded to identity
  EXPECT_DOUBLE_EQ(double(a.rot.x), 0.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(double(a.scale[i]), 1.0, 1e-12);  // exp(0)
  for (real v : a.sh) EXPECT_EQ(v, 0);
}

TEST(Project, OnAxisLandsAtPrincipalPoint) {
  Camera cam = oracle::test_camera(16, 16);
  GaussianAttributes attrs;
  attrs.sh.assign(4 * 3, 0);
  attrs.opacity = real(0.7);
  attrs.rot = {1, 0, 0, 0};
  attrs.scale = {0.05, 0.05, 0.05};
  Splat2D s;
  ASSERT_TRUE(project_gaussian({0, 0, 0}, attrs, 1, cam, s));
  EXPECT_NEAR(double(s.mean2d.x), double(cam.cx), 1e-9);
  EXPECT_NEAR(double(s.mean2d.y), double(cam.cy), 1e-9);
  EXPECT_NEAR(double(s.depth), 3.0, 1e-12);
  EXPECT_EQ(double(s.opacity), 0.7);
}

TEST(Project, BehindCameraIsCulled) {
  Camera cam = oracle::test_camera();
  GaussianAttributes attrs;
  attrs.sh.assign(12, 0);
  attrs.opacity = 1;
  attrs.rot = {1, 0, 0, 0};
  attrs.scale = {0.1, 0.1, 0.1};
  Splat2D s;
  EXPECT_FALSE(project_gaussian({0, 0, -10}, attrs, 1, cam, s));
}

TEST(Project, CovarianceMatchesMonteCarloProjection) {
  // cov2d (minus dilation) vs the sample covariance of 1e6 projected draws
  // from N(p, Sigma), at small extent/depth ratio.
  Rng rng(10);
  for (int trial = 0; trial < 3; ++trial) {
    Camera cam = oracle::test_camera(64, 64);
    Vec3 p{rng.uniform(real(-0.3), real(0.3)), rng.uniform(real(-0.3), real(0.3)),
           rng.uniform(real(-0.2), real(0.2))};
    GaussianAttributes attrs;
    attrs.sh.assign(12, 0);
    attrs.opacity = 1;
    attrs.rot = random_unit_quat(rng);
    attrs.scale = {rng.uniform(real(0.01), real(0.03)), rng.uniform(real(0.01), real(0.03)),
                   rng.uniform(real(0.01), real(0.03))};
    Splat2D s;
    ASSERT_TRUE(project_gaussian(p, attrs, 1, cam, s));
    Mat3 R = quat_to_rot(attrs.rot);

    const int N = 1000000;
    double mx = 0, my = 0, sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < N; ++i) {
      Vec3 z{rng.normal(), rng.normal(), rng.normal()};
      Vec3 x = p + R * Vec3{z.x * attrs.scale.x, z.y * attrs.scale.y, z.z * attrs.scale.z};
      Vec2 pix;
      real depth;
      ASSERT_TRUE(cam.project(x, pix, depth));
      mx += pix.x;
      my += pix.y;
      sxx += double(pix.x) * double(pix.x);
      sxy += double(pix.x) * double(pix.y);
      syy += double(pix.y) * double(pix.y);
    }
    mx /= N;
    my /= N;
    double cxx = sxx / N - mx * mx, cxy = sxy / N - mx * my, cyy = syy / N - my * my;
    double exx = double(s.cov2d.xx) - 0.3, exy = double(s.cov2d.xy), eyy = double(s.cov2d.yy) - 0.3;
    double fro = std::sqrt(exx * exx + 2 * exy * exy + eyy * eyy);
    double diff = std::sqrt((cxx - exx) * (cxx - exx) + 2 * (cxy - exy) * (cxy - exy) +
                            (cyy - eyy) * (cyy - eyy));
    EXPECT_LT(diff / fro, 0.05) << "trial " << trial;
  }
}

TEST(Project, BackwardMatchesFiniteDifferences) {
  // Probe gradients through (mean2d, cov2d, color) w.r.t. p_eff and the
  // attribute inputs, on in-frustum fixtures away from the fov clamp.
  Rng rng(11);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Camera cam = oracle::test_camera(32, 32);
    Vec3 p{rng.uniform(real(-0.4), real(0.4)), rng.uniform(real(-0.4), real(0.4)),
           rng.uniform(real(-0.3), real(0.3))};
    Vec4 q = random_unit_quat(rng);
    Vec3 logs{rng.uniform(real(-3), real(-1.5)), rng.uniform(real(-3), real(-1.5)),
              rng.uniform(real(-3), real(-1.5))};
    std::vector<real> coeffs(12);
    for (auto& v : coeffs) v = rng.uniform(real(-0.1), real(0.1));
    Vec2 pm{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Sym2 pc{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Vec3 pcol = rng.uniform_vec3(-1, 1);

    auto build = [&](const std::vector<real>& x, GaussianAttributes& attrs, Vec3& pe) {
      pe = {x[0], x[1], x[2]};
      Vec4 qr{x[3], x[4], x[5], x[6]};
      real n = qr.norm();
      for (int i = 0; i < 4; ++i) qr[i] /= n;
      attrs.rot = qr;
      attrs.scale = {std::exp(x[7]), std::exp(x[8]), std::exp(x[9])};
      attrs.sh.assign(x.begin() + 10, x.begin() + 22);
      attrs.opacity = real(0.5);
    };
    DifferentiableScalar f;
    f.value = [&](const std::vector<real>& x) {
      GaussianAttributes attrs;
      Vec3 pe;
      build(x, attrs, pe);
      Splat2D s;
      if (!project_gaussian(pe, attrs, 1, cam, s)) return real(0);
      return pm.x * s.mean2d.x + pm.y * s.mean2d.y + pc.xx * s.cov2d.xx + pc.xy * s.cov2d.xy +
             pc.yy * s.cov2d.yy + pcol.dot(s.color);
    };
    f.gradient = [&](const std::vector<real>& x) {
      GaussianAttributes attrs;
      Vec3 pe;
      build(x, attrs, pe);
      Splat2D s;
      ProjectCtx ctx;
      std::vector<real> g(x.size(), 0);
      if (!project_gaussian(pe, attrs, 1, cam, s, &ctx)) return g;
      Vec3 gp{0, 0, 0};
      Vec4 gq_unit{};
      Vec3 gs_act{};
      std::vector<real> gsh(12, 0);
      project_backward(pe, attrs, 1, cam, ctx, pm, pc, pcol, gp, gq_unit, gs_act, gsh.data());
      g[0] = gp.x;
      g[1] = gp.y;
      g[2] = gp.z;
      Vec4 qr{x[3], x[4], x[5], x[6]};
      real n = qr.norm();
      real qdot = attrs.rot.w * gq_unit.w + attrs.rot.x * gq_unit.x + attrs.rot.y * gq_unit.y +
                  attrs.rot.z * gq_unit.z;
      for (int i = 0; i < 4; ++i) g[3 + i] = (gq_unit[i] - attrs.rot[i] * qdot) / n;
      for (int i = 0; i < 3; ++i) g[7 + i] = gs_act[i] * attrs.scale[i];
      for (int i = 0; i < 12; ++i) g[10 + i] = gsh[i];
      return g;
    };
    std::vector<real> x = {p.x, p.y, p.z, q.w, q.x, q.y, q.z, logs.x, logs.y, logs.z};
    x.insert(x.end(), coeffs.begin(), coeffs.end());
    if (finite_diff_check(f, x, real(1e-5)) >= real(1e-5)) failures++;
  }
  EXPECT_EQ(failures, 0);
}

TEST(VisibleHighOpacity, MatchesBruteForce) {
  auto m = oracle::tiny_model(12);
  Rng rng(13);
  oracle::randomize_params(m, rng);
  for (int i = 0; i < 200; ++i) m.append_gaussian(rng.uniform_vec3(real(-1.5), real(1.5)));
  Camera cam = oracle::test_camera(24, 24);
  GsForward fwd;
  gs_decode_all(m, fwd);
  std::vector<GaussianAttributes> attrs;
  for (auto& c : fwd.ctxs) attrs.push_back(c.attrs);

  for (real tau : {real(0), real(0.3), real(0.5), real(1.01)}) {
    auto ids = visible_high_opacity(m.gaussians, attrs, cam, tau);
    // brute force oracle
    std::vector<int> expect;
    for (std::size_t i = 0; i < m.gaussians.size(); ++i) {
      Vec3 pe = m.gaussians.effective_position(i);
      Vec2 pix;
      real depth;
      if (!cam.project(pe, pix, depth)) continue;
      if (depth <= cam.near || depth >= cam.far) continue;
      if (pix.x < 0 || pix.x >= 24 || pix.y < 0 || pix.y >= 24) continue;
      if (attrs[i].opacity < tau) continue;
      expect.push_back(m.gaussians.ids[i]);
    }
    EXPECT_EQ(ids, expect);
    if (tau > 1) EXPECT_TRUE(ids.empty());
  }
}
