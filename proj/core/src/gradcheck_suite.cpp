#include "warpgeo/gradcheck_suite.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "warpgeo/camera.hpp"
#include "warpgeo/consistency.hpp"
#include "warpgeo/losses.hpp"
#include "warpgeo/sampling.hpp"

namespace warpgeo {
namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-4;
// The stacked objective runs at a smaller step: it keeps the windows around
// bilinear cell crossings and L1 kinks (which move with the warp) narrow,
// and the looser tolerance absorbs the extra roundoff.
constexpr double kStepE2E = 1e-6;
constexpr double kTolE2E = 1e-3;

uint64_t case_seed(uint64_t seed, uint64_t idx) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (idx + 1));
}

ScalarField random_scalar(int w, int h, double lo, double hi,
                          std::mt19937_64& rng) {
  ScalarField f(w, h);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (size_t i = 0; i < f.size(); ++i) f.data()[i] = dist(rng);
  return f;
}

Image random_image(int w, int h, int c, double lo, double hi,
                   std::mt19937_64& rng) {
  Image img(w, h, c);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = dist(rng);
  return img;
}

// Smooth positive depth (plane plus low-frequency ripple) so normals are
// well conditioned at every pixel.
ScalarField ripple_depth(int w, int h, double base, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ph(0.0, 6.28);
  double p1 = ph(rng), p2 = ph(rng), p3 = ph(rng);
  ScalarField d(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      d.at(u, v) = base + 0.25 * std::sin(0.6 * u + p1) +
                   0.2 * std::cos(0.5 * v + p2) +
                   0.05 * std::sin(0.3 * (u + v) + p3);
  return d;
}

ScalarField smooth_gray(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ph(0.0, 6.28);
  double p1 = ph(rng), p2 = ph(rng);
  ScalarField g(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      g.at(u, v) = 0.5 + 0.3 * std::sin(0.7 * u + p1) * std::cos(0.4 * v + p2);
  return g;
}

// Smallest |forward difference| (order 1) or |central second difference|
// (order 2) over both axes and all channels. L1 losses kink where a stencil
// vanishes, so fixtures are redrawn until every stencil clears the step.
double min_stencil_gap(const VectorField& F, int order) {
  double gap = 1e300;
  for (int v = 0; v < F.height(); ++v)
    for (int u = 0; u < F.width(); ++u)
      for (int c = 0; c < F.channels(); ++c) {
        if (order == 1) {
          if (u + 1 < F.width())
            gap = std::min(gap, std::abs(F.at(u + 1, v, c) - F.at(u, v, c)));
          if (v + 1 < F.height())
            gap = std::min(gap, std::abs(F.at(u, v + 1, c) - F.at(u, v, c)));
        } else {
          if (u > 0 && u + 1 < F.width())
            gap = std::min(gap, std::abs(F.at(u + 1, v, c) + F.at(u - 1, v, c) -
                                         2.0 * F.at(u, v, c)));
          if (v > 0 && v + 1 < F.height())
            gap = std::min(gap, std::abs(F.at(u, v + 1, c) + F.at(u, v - 1, c) -
                                         2.0 * F.at(u, v, c)));
        }
      }
  return gap;
}

double min_stencil_gap(const ScalarField& F, int order) {
  VectorField wrap(F.width(), F.height(), 1);
  for (int v = 0; v < F.height(); ++v)
    for (int u = 0; u < F.width(); ++u) wrap.at(u, v, 0) = F.at(u, v);
  return min_stencil_gap(wrap, order);
}

SuiteEntry check_bilinear(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int W = 8, H = 7, OW = 6, OH = 5;
  Image src = random_image(W, H, 2, 0.0, 1.0, rng);
  src.set_valid(3, 2, false);  // exercises corner masking
  VectorField coords(OW, OH, 2);
  std::uniform_int_distribution<int> ui(0, W - 2), vi(0, H - 2);
  // Fractional parts stay clear of the lattice so +-step never crosses a
  // cell boundary (where the bilinear derivative jumps).
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  for (int v = 0; v < OH; ++v)
    for (int u = 0; u < OW; ++u) {
      coords.at(u, v, 0) = ui(rng) + frac(rng);
      coords.at(u, v, 1) = vi(rng) + frac(rng);
    }
  Image wgt = random_image(OW, OH, 2, -1.0, 1.0, rng);

  auto f = [&]() {
    SampledImage s = bilinear_sample(src, coords);
    double acc = 0.0;
    for (int v = 0; v < OH; ++v)
      for (int u = 0; u < OW; ++u) {
        if (!s.valid_at(u, v)) continue;
        for (int c = 0; c < 2; ++c) acc += wgt.at(u, v, c) * s.at(u, v, c);
      }
    return acc;
  };

  SampleVjp vjp = bilinear_sample_vjp(src, coords, wgt, /*want_grad_src=*/true);
  std::vector<DiffVariable> vars{
      {"coords", coords.data(), vjp.grad_coords.data(), coords.size()},
      {"src", src.data(), vjp.grad_src.data(), src.size()},
  };
  return {"bilinear_sample", finite_diff_check(f, vars, kStep, kTol, seed)};
}

SuiteEntry check_warp(uint64_t seed) {
  std::mt19937_64 rng(seed);
  CameraIntrinsics K{40.0, 45.0, 5.5, 3.5, 12, 8};
  ScalarField depth = random_scalar(12, 8, 1.5, 4.0, rng);
  depth.set_valid(7, 2, false);
  std::uniform_real_distribution<double> om(-0.08, 0.08), tr(-0.15, 0.15);
  Twist xi;
  for (int i = 0; i < 3; ++i) xi[i] = om(rng);
  for (int i = 3; i < 6; ++i) xi[i] = tr(rng);
  VectorField wgt = random_image(12, 8, 2, -1.0, 1.0, rng);

  auto f = [&]() {
    WarpField wf = warp_coords(depth, se3_exp(xi), K);
    double acc = 0.0;
    for (int v = 0; v < 8; ++v)
      for (int u = 0; u < 12; ++u) {
        if (!wf.coords.valid_at(u, v)) continue;
        acc += wgt.at(u, v, 0) * wf.coords.at(u, v, 0) +
               wgt.at(u, v, 1) * wf.coords.at(u, v, 1);
      }
    return acc;
  };

  WarpVjp vjp = warp_coords_vjp(depth, xi, K, wgt);
  std::vector<DiffVariable> vars{
      {"depth", depth.data(), vjp.grad_depth.data(), depth.size()},
      {"twist", xi.data(), vjp.grad_twist.data(), 6},
  };
  return {"warp_coords", finite_diff_check(f, vars, kStep, kTol, seed)};
}

SuiteEntry check_depth_to_normal(uint64_t seed) {
  std::mt19937_64 rng(seed);
  CameraIntrinsics K{35.0, 32.0, 4.5, 3.0, 10, 7};
  ScalarField depth = ripple_depth(10, 7, 2.2, rng);
  EdgeWeights W = edge_weights(smooth_gray(10, 7, rng), 0.15);
  VectorField wgt = random_image(10, 7, 3, -1.0, 1.0, rng);

  auto f = [&]() {
    NormalMap N = depth_to_normal(depth, K, W);
    double acc = 0.0;
    for (int v = 0; v < 7; ++v)
      for (int u = 0; u < 10; ++u) {
        if (!N.n.valid_at(u, v)) continue;
        for (int c = 0; c < 3; ++c) acc += wgt.at(u, v, c) * N.n.at(u, v, c);
      }
    return acc;
  };

  ScalarField gd = depth_to_normal_vjp(depth, K, W, wgt);
  std::vector<DiffVariable> vars{
      {"depth", depth.data(), gd.data(), depth.size()},
  };
  return {"depth_to_normal", finite_diff_check(f, vars, kStep, kTol, seed)};
}

// Normals pointing roughly down the optical axis: every plane-intersection
// vote has |N . ray| ~ 1, far from the grazing cutoff, so the voter set is
// stable under the probe step.
NormalMap frontish_normals(int w, int h, std::mt19937_64& rng) {
  NormalMap N;
  N.n = VectorField(w, h, 3);
  N.degenerate.assign(size_t(w) * h, 0);
  std::uniform_real_distribution<double> tilt(-0.25, 0.25);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      Vec3 n(tilt(rng), tilt(rng), -1.0);
      n.normalize();
      for (int c = 0; c < 3; ++c) N.n.at(u, v, c) = n[c];
    }
  return N;
}

SuiteEntry check_normal_to_depth(uint64_t seed) {
  std::mt19937_64 rng(seed);
  CameraIntrinsics K{35.0, 32.0, 4.5, 3.0, 10, 7};
  ScalarField depth = ripple_depth(10, 7, 2.0, rng);
  NormalMap N = frontish_normals(10, 7, rng);
  EdgeWeights W = edge_weights(smooth_gray(10, 7, rng), 0.2);
  ScalarField wgt = random_scalar(10, 7, -1.0, 1.0, rng);

  auto f = [&]() {
    ScalarField dn = normal_to_depth(depth, N, K, W);
    double acc = 0.0;
    for (int v = 0; v < 7; ++v)
      for (int u = 0; u < 10; ++u)
        if (dn.valid_at(u, v)) acc += wgt.at(u, v) * dn.at(u, v);
    return acc;
  };

  NormalToDepthVjp vjp = normal_to_depth_vjp(depth, N, K, W, wgt);
  std::vector<DiffVariable> vars{
      {"depth", depth.data(), vjp.grad_depth.data(), depth.size()},
      {"normals", N.n.data(), vjp.grad_normals.data(), N.n.size()},
  };
  return {"normal_to_depth", finite_diff_check(f, vars, kStep, kTol, seed)};
}

SuiteEntry check_consistency_chain(uint64_t seed) {
  std::mt19937_64 rng(seed);
  CameraIntrinsics K{35.0, 32.0, 4.5, 3.0, 10, 7};
  ScalarField depth = ripple_depth(10, 7, 2.4, rng);
  EdgeWeights Wdn = edge_weights(smooth_gray(10, 7, rng), 0.1);
  ScalarField wgt = random_scalar(10, 7, -1.0, 1.0, rng);

  auto f = [&]() {
    NormalMap N = depth_to_normal(depth, K, Wdn);
    ScalarField dn = normal_to_depth(depth, N, K, Wdn);
    double acc = 0.0;
    for (int v = 0; v < 7; ++v)
      for (int u = 0; u < 10; ++u)
        if (dn.valid_at(u, v)) acc += wgt.at(u, v) * dn.at(u, v);
    return acc;
  };

  NormalMap N = depth_to_normal(depth, K, Wdn);
  NormalToDepthVjp v2 = normal_to_depth_vjp(depth, N, K, Wdn, wgt);
  ScalarField via_normals = depth_to_normal_vjp(depth, K, Wdn, v2.grad_normals);
  ScalarField total = v2.grad_depth;
  for (size_t i = 0; i < total.size(); ++i)
    total.data()[i] += via_normals.data()[i];

  std::vector<DiffVariable> vars{
      {"depth", depth.data(), total.data(), depth.size()},
  };
  return {"consistency_chain", finite_diff_check(f, vars, kStep, kTol, seed)};
}

// synth = target +- uniform(0.05, 0.4): residuals keep a fixed sign under
// the probe step, away from the |.| kink.
Image offset_image(const Image& target, std::mt19937_64& rng) {
  Image synth = target;
  std::uniform_real_distribution<double> mag(0.05, 0.4);
  std::bernoulli_distribution flip(0.5);
  for (size_t i = 0; i < synth.size(); ++i)
    synth.data()[i] += flip(rng) ? mag(rng) : -mag(rng);
  return synth;
}

SuiteEntry check_photometric(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int W = 9, H = 6;
  Image target = random_image(W, H, 2, 0.0, 1.0, rng);
  std::vector<Image> synth{offset_image(target, rng), offset_image(target, rng)};
  synth[0].set_valid(2, 1, false);
  synth[1].set_valid(6, 4, false);
  std::vector<ScalarField> masks{random_scalar(W, H, 0.15, 0.85, rng),
                                 random_scalar(W, H, 0.15, 0.85, rng)};

  auto f = [&]() { return photometric_loss(target, synth, masks).term.value(); };

  PhotometricResult res = photometric_loss(target, synth, masks);
  std::vector<DiffVariable> vars{
      {"synth0", synth[0].data(), res.grad_synth[0].data(), synth[0].size()},
      {"synth1", synth[1].data(), res.grad_synth[1].data(), synth[1].size()},
      {"mask0", masks[0].data(), res.grad_mask[0].data(), masks[0].size()},
      {"mask1", masks[1].data(), res.grad_mask[1].data(), masks[1].size()},
  };
  return {"photometric_loss", finite_diff_check(f, vars, kStep, kTol, seed)};
}

SuiteEntry check_smoothness_scalar(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int W = 9, H = 7;
  ScalarField F(1, 1);
  do {
    F = random_scalar(W, H, 0.0, 1.0, rng);
  } while (min_stencil_gap(F, 2) < 1e-3);
  ScalarField gray = smooth_gray(W, H, rng);

  auto f = [&]() { return smoothness_loss(F, 2, gray, 0.2).term.value(); };

  SmoothnessResult res = smoothness_loss(F, 2, gray, 0.2);
  std::vector<DiffVariable> vars{
      {"field", F.data(), res.grad_scalar.data(), F.size()},
  };
  return {"smoothness_order2", finite_diff_check(f, vars, kStep, kTol, seed)};
}

SuiteEntry check_smoothness_vector(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int W = 8, H = 6;
  VectorField F(1, 1, 1);
  do {
    F = random_image(W, H, 3, -1.0, 1.0, rng);
  } while (min_stencil_gap(F, 1) < 1e-3);
  ScalarField gray = smooth_gray(W, H, rng);

  auto f = [&]() { return smoothness_loss(F, 1, gray, 0.3).term.value(); };

  SmoothnessResult res = smoothness_loss(F, 1, gray, 0.3);
  std::vector<DiffVariable> vars{
      {"field", F.data(), res.grad_vector.data(), F.size()},
  };
  return {"smoothness_order1", finite_diff_check(f, vars, kStep, kTol, seed)};
}

SuiteEntry check_mask_loss(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int W = 7, H = 5;
  std::vector<ScalarField> logits{random_scalar(W, H, -2.0, 2.0, rng),
                                  random_scalar(W, H, -2.0, 2.0, rng)};

  auto f = [&]() {
    std::vector<ExplainabilityMask> ms{make_mask(logits[0]),
                                       make_mask(logits[1])};
    return mask_loss(ms).term.value();
  };

  std::vector<ExplainabilityMask> ms{make_mask(logits[0]), make_mask(logits[1])};
  MaskLossResult res = mask_loss(ms);
  std::vector<DiffVariable> vars{
      {"logits0", logits[0].data(), res.grad_logits[0].data(), logits[0].size()},
      {"logits1", logits[1].data(), res.grad_logits[1].data(), logits[1].size()},
  };
  return {"mask_loss", finite_diff_check(f, vars, kStep, kTol, seed)};
}

SuiteEntry check_gradient_matching(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int W = 9, H = 6;
  Image target = random_image(W, H, 2, 0.0, 1.0, rng);
  // synth = target + p with the first differences of p bounded away from
  // zero, since the loss kinks where the gradient residual vanishes.
  std::vector<Image> synth;
  for (int s = 0; s < 2; ++s) {
    Image p(1, 1, 1);
    do {
      p = random_image(W, H, 2, -0.3, 0.3, rng);
    } while (min_stencil_gap(p, 1) < 1e-3);
    Image sy = target;
    for (size_t i = 0; i < sy.size(); ++i) sy.data()[i] += p.data()[i];
    synth.push_back(sy);
  }
  synth[0].set_valid(4, 2, false);
  std::vector<ScalarField> masks{random_scalar(W, H, 0.15, 0.85, rng),
                                 random_scalar(W, H, 0.15, 0.85, rng)};

  auto f = [&]() {
    return gradient_matching_loss(target, synth, masks).term.value();
  };

  GradientMatchResult res = gradient_matching_loss(target, synth, masks);
  std::vector<DiffVariable> vars{
      {"synth0", synth[0].data(), res.grad_synth[0].data(), synth[0].size()},
      {"synth1", synth[1].data(), res.grad_synth[1].data(), synth[1].size()},
      {"mask0", masks[0].data(), res.grad_mask[0].data(), masks[0].size()},
      {"mask1", masks[1].data(), res.grad_mask[1].data(), masks[1].size()},
  };
  return {"gradient_matching", finite_diff_check(f, vars, kStep, kTol, seed)};
}

Image sinusoid_texture(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ph(0.0, 6.28);
  double p1 = ph(rng), p2 = ph(rng), p3 = ph(rng);
  Image img(w, h, 1);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      img.at(u, v, 0) = 0.5 + 0.25 * std::sin(0.9 * u + p1) +
                        0.15 * std::cos(0.7 * v + p2) +
                        0.08 * std::sin(0.5 * (u - v) + p3);
  return img;
}

SuiteEntry check_total_objective(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int W = 12, H = 8;
  SequenceData seq;
  seq.K = CameraIntrinsics{15.0, 14.0, (W - 1) / 2.0, (H - 1) / 2.0, W, H};
  seq.target = sinusoid_texture(W, H, rng);
  seq.sources = {sinusoid_texture(W, H, rng), sinusoid_texture(W, H, rng)};

  SceneVariables vars;
  vars.depth = ripple_depth(W, H, 2.0, rng);
  vars.mask_logits = {random_scalar(W, H, -1.5, 1.5, rng),
                      random_scalar(W, H, -1.5, 1.5, rng)};
  std::uniform_real_distribution<double> om(-0.03, 0.03), tr(-0.04, 0.04);
  vars.twists.resize(2);
  for (auto& xi : vars.twists) {
    for (int i = 0; i < 3; ++i) xi[i] = om(rng);
    for (int i = 3; i < 6; ++i) xi[i] = tr(rng);
  }

  ObjectiveOptions opt;
  opt.scales = 3;
  SequencePyramid pyr = build_pyramid(seq, opt);

  auto f = [&]() { return total_objective(pyr, vars, opt).total; };

  LossReport rep = total_objective(pyr, vars, opt);
  std::vector<DiffVariable> dv{
      {"depth", vars.depth.data(), rep.grad_depth.data(), vars.depth.size()},
      {"logits0", vars.mask_logits[0].data(), rep.grad_logits[0].data(),
       vars.mask_logits[0].size()},
      {"logits1", vars.mask_logits[1].data(), rep.grad_logits[1].data(),
       vars.mask_logits[1].size()},
      {"twist0", vars.twists[0].data(), rep.grad_twists[0].data(), 6},
      {"twist1", vars.twists[1].data(), rep.grad_twists[1].data(), 6},
  };
  return {"total_objective", finite_diff_check(f, dv, kStepE2E, kTolE2E, seed)};
}

}  // namespace

std::string SuiteResult::table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-30s %12s %12s %12s %7s %6s\n", "check",
                "max_rel_err", "analytic", "numeric", "coords", "status");
  out += line;
  for (const SuiteEntry& e : entries)
    for (const VarCheck& vc : e.report.vars) {
      std::string name = e.name + "/" + vc.name;
      std::snprintf(line, sizeof line, "%-30s %12.3e %12.4e %12.4e %7zu %6s\n",
                    name.c_str(), vc.max_rel_err, vc.analytic, vc.numeric,
                    vc.checked, vc.pass ? "ok" : "FAIL");
      out += line;
    }
  std::snprintf(line, sizeof line, "suite: %s (%.2fs)\n",
                pass ? "PASS" : "FAIL", seconds);
  out += line;
  return out;
}

SuiteResult run_gradcheck_suite(uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  SuiteResult res;
  uint64_t i = 0;
  res.entries.push_back(check_bilinear(case_seed(seed, i++)));
  res.entries.push_back(check_warp(case_seed(seed, i++)));
  res.entries.push_back(check_depth_to_normal(case_seed(seed, i++)));
  res.entries.push_back(check_normal_to_depth(case_seed(seed, i++)));
  res.entries.push_back(check_consistency_chain(case_seed(seed, i++)));
  res.entries.push_back(check_photometric(case_seed(seed, i++)));
  res.entries.push_back(check_smoothness_scalar(case_seed(seed, i++)));
  res.entries.push_back(check_smoothness_vector(case_seed(seed, i++)));
  res.entries.push_back(check_mask_loss(case_seed(seed, i++)));
  res.entries.push_back(check_gradient_matching(case_seed(seed, i++)));
  res.entries.push_back(check_total_objective(case_seed(seed, i++)));
  res.pass = true;
  for (const SuiteEntry& e : res.entries) res.pass = res.pass && e.report.pass;
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

}  // namespace warpgeo
