#include "warpgeo/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "warpgeo/sampling.hpp"
#include "warpgeo/threading.hpp"

namespace warpgeo {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -log(sigmoid(l)) = softplus(-l), stable for any logit.
double nll_of_logit(double l) {
  return std::max(-l, 0.0) + std::log1p(std::exp(-std::abs(l)));
}

// Tile-ordered reduction of per-tile partial LossTerms.
struct TermAccum {
  std::vector<double> sum;
  std::vector<long long> count;
  explicit TermAccum(int tiles) : sum(size_t(tiles), 0.0), count(size_t(tiles), 0) {}
  void fold(LossTerm& t) const {
    for (size_t i = 0; i < sum.size(); ++i) {
      t.sum += sum[i];
      t.count += count[i];
    }
  }
};

}  // namespace

ExplainabilityMask make_mask(const ScalarField& logits) {
  ExplainabilityMask m{logits, ScalarField(logits.width(), logits.height())};
  for (size_t i = 0; i < logits.size(); ++i)
    m.mask.data()[i] = sigmoid(logits.data()[i]);
  return m;
}

PhotometricResult photometric_loss(const Image& target,
                                   const std::vector<Image>& synth,
                                   const std::vector<ScalarField>& masks) {
  if (synth.size() != masks.size())
    throw std::invalid_argument("photometric_loss: source count mismatch");
  const int W = target.width(), H = target.height(), C = target.channels();
  PhotometricResult out;
  for (size_t s = 0; s < synth.size(); ++s) {
    if (!synth[s].same_shape(target) || masks[s].width() != W ||
        masks[s].height() != H)
      throw std::invalid_argument("photometric_loss: shape mismatch");
    TermAccum acc(num_row_tiles(H));
    parallel_tiles(H, [&](int tile, int r0, int r1) {
      double sum = 0.0;
      long long cnt = 0;
      for (int v = r0; v < r1; ++v)
        for (int u = 0; u < W; ++u) {
          if (!synth[s].valid_at(u, v) || !target.valid_at(u, v)) continue;
          double a = 0.0;
          for (int c = 0; c < C; ++c)
            a += std::abs(target.at(u, v, c) - synth[s].at(u, v, c));
          sum += masks[s].at(u, v) * a;
          ++cnt;
        }
      acc.sum[size_t(tile)] = sum;
      acc.count[size_t(tile)] = cnt;
    });
    acc.fold(out.term);
  }
  out.zero_valid = out.term.count == 0;

  const double inv = out.term.count > 0 ? 1.0 / double(out.term.count) : 0.0;
  for (size_t s = 0; s < synth.size(); ++s) {
    Image gs(W, H, C, 0.0, false);
    ScalarField gmsk(W, H, 0.0);
    parallel_rows(H, [&](int r0, int r1) {
      for (int v = r0; v < r1; ++v)
        for (int u = 0; u < W; ++u) {
          if (!synth[s].valid_at(u, v) || !target.valid_at(u, v)) continue;
          gs.set_valid(u, v, true);
          double a = 0.0;
          const double m = masks[s].at(u, v);
          for (int c = 0; c < C; ++c) {
            const double d = target.at(u, v, c) - synth[s].at(u, v, c);
            a += std::abs(d);
            gs.at(u, v, c) = -m * sign(d) * inv;
          }
          gmsk.at(u, v) = a * inv;
        }
    });
    out.grad_synth.push_back(std::move(gs));
    out.grad_mask.push_back(std::move(gmsk));
  }
  return out;
}

namespace {

// Shared smoothness kernel over an interleaved field. The |grad^order|
// stencil and the edge weight are both anchored at the base pixel; gradient
// accumulation is gather-form (each output pixel revisits the stencils it
// participates in), which keeps parallel execution deterministic.
struct SmoothKernel {
  const double* F;
  const uint8_t* Fvalid;
  int W, H, C;
  const ScalarField& gray;
  double alpha;
  int order;  // stencil coefficients: order 1 {-1,+1}, order 2 {+1,-2,+1}

  double coef(int i) const {
    if (order == 1) return i == 0 ? -1.0 : 1.0;
    return i == 1 ? -2.0 : 1.0;
  }

  bool ok(int u, int v, int dx, int dy) const {
    const int n = order;  // furthest offset
    if (u + n * dx >= W || v + n * dy >= H) return false;
    for (int i = 0; i <= n; ++i)
      if (!Fvalid[size_t(v + i * dy) * W + (u + i * dx)]) return false;
    return gray.valid_at(u, v) && gray.valid_at(u + dx, v + dy);
  }

  double weight(int u, int v, int dx, int dy) const {
    if (alpha == 0.0) return 1.0;
    return std::exp(-alpha *
                    std::abs(gray.at(u + dx, v + dy) - gray.at(u, v)));
  }

  double stencil(int u, int v, int dx, int dy, int c) const {
    double s = 0.0;
    for (int i = 0; i <= order; ++i)
      s += coef(i) * F[(size_t(v + i * dy) * W + (u + i * dx)) * C + c];
    return s;
  }
};

SmoothnessResult smoothness_impl(const double* F, const uint8_t* Fvalid, int W,
                                 int H, int C, int order,
                                 const ScalarField& gray, double alpha) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("smoothness_loss: order must be 1 or 2");
  if (gray.width() != W || gray.height() != H)
    throw std::invalid_argument("smoothness_loss: image shape mismatch");
  SmoothKernel k{F, Fvalid, W, H, C, gray, alpha, order};

  SmoothnessResult out;
  TermAccum acc(num_row_tiles(H));
  parallel_tiles(H, [&](int tile, int r0, int r1) {
    double sum = 0.0;
    long long cnt = 0;
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < W; ++u)
        for (int d = 0; d < 2; ++d) {
          const int dx = d == 0 ? 1 : 0, dy = 1 - dx;
          if (!k.ok(u, v, dx, dy)) continue;
          double a = 0.0;
          for (int c = 0; c < C; ++c) a += std::abs(k.stencil(u, v, dx, dy, c));
          sum += k.weight(u, v, dx, dy) * a;
          ++cnt;
        }
    acc.sum[size_t(tile)] = sum;
    acc.count[size_t(tile)] = cnt;
  });
  acc.fold(out.term);

  const double inv = out.term.count > 0 ? 1.0 / double(out.term.count) : 0.0;
  std::vector<double> grad(size_t(W) * H * C, 0.0);
  parallel_rows(H, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < W; ++u)
        for (int d = 0; d < 2; ++d) {
          const int dx = d == 0 ? 1 : 0, dy = 1 - dx;
          for (int i = 0; i <= order; ++i) {  // stencils containing (u, v)
            const int bu = u - i * dx, bv = v - i * dy;
            if (bu < 0 || bv < 0) continue;
            if (!k.ok(bu, bv, dx, dy)) continue;
            const double w = k.weight(bu, bv, dx, dy) * k.coef(i) * inv;
            for (int c = 0; c < C; ++c)
              grad[(size_t(v) * W + u) * C + c] +=
                  w * sign(k.stencil(bu, bv, dx, dy, c));
          }
        }
  });
  if (C == 1) {
    out.grad_scalar = ScalarField(W, H);
    std::copy(grad.begin(), grad.end(), out.grad_scalar.data());
  } else {
    out.grad_vector = VectorField(W, H, C);
    std::copy(grad.begin(), grad.end(), out.grad_vector.data());
  }
  return out;
}

}  // namespace

SmoothnessResult smoothness_loss(const ScalarField& F, int order,
                                 const ScalarField& gray, double alpha) {
  return smoothness_impl(F.data(), F.valid(), F.width(), F.height(), 1, order,
                         gray, alpha);
}

SmoothnessResult smoothness_loss(const VectorField& F, int order,
                                 const ScalarField& gray, double alpha) {
  return smoothness_impl(F.data(), F.valid(), F.width(), F.height(),
                         F.channels(), order, gray, alpha);
}

MaskLossResult mask_loss(const std::vector<ExplainabilityMask>& masks) {
  MaskLossResult out;
  for (const auto& m : masks) {
    const int W = m.logits.width(), H = m.logits.height();
    TermAccum acc(num_row_tiles(H));
    parallel_tiles(H, [&](int tile, int r0, int r1) {
      double sum = 0.0;
      long long cnt = 0;
      for (int v = r0; v < r1; ++v)
        for (int u = 0; u < W; ++u) {
          sum += nll_of_logit(m.logits.at(u, v));
          ++cnt;
        }
      acc.sum[size_t(tile)] = sum;
      acc.count[size_t(tile)] = cnt;
    });
    acc.fold(out.term);
  }
  const double inv = out.term.count > 0 ? 1.0 / double(out.term.count) : 0.0;
  for (const auto& m : masks) {
    const int W = m.logits.width(), H = m.logits.height();
    ScalarField g(W, H);
    parallel_rows(H, [&](int r0, int r1) {
      for (int v = r0; v < r1; ++v)
        for (int u = 0; u < W; ++u)
          g.at(u, v) = (m.mask.at(u, v) - 1.0) * inv;  // d softplus(-l)/dl
    });
    out.grad_logits.push_back(std::move(g));
  }
  return out;
}

GradientMatchResult gradient_matching_loss(
    const Image& target, const std::vector<Image>& synth,
    const std::vector<ScalarField>& masks) {
  if (synth.size() != masks.size())
    throw std::invalid_argument("gradient_matching_loss: source count mismatch");
  const int W = target.width(), H = target.height(), C = target.channels();
  GradientMatchResult out;

  auto ok = [&](const Image& syn, int u, int v, int dx, int dy) {
    if (u + dx >= W || v + dy >= H) return false;
    return syn.valid_at(u, v) && syn.valid_at(u + dx, v + dy) &&
           target.valid_at(u, v) && target.valid_at(u + dx, v + dy);
  };
  auto diff = [&](const Image& syn, int u, int v, int dx, int dy, int c) {
    const double dt =
        target.at(u + dx, v + dy, c) - target.at(u, v, c);
    const double ds = syn.at(u + dx, v + dy, c) - syn.at(u, v, c);
    return dt - ds;
  };

  for (size_t s = 0; s < synth.size(); ++s) {
    if (!synth[s].same_shape(target))
      throw std::invalid_argument("gradient_matching_loss: shape mismatch");
    TermAccum acc(num_row_tiles(H));
    parallel_tiles(H, [&](int tile, int r0, int r1) {
      double sum = 0.0;
      long long cnt = 0;
      for (int v = r0; v < r1; ++v)
        for (int u = 0; u < W; ++u)
          for (int d = 0; d < 2; ++d) {
            const int dx = d == 0 ? 1 : 0, dy = 1 - dx;
            if (!ok(synth[s], u, v, dx, dy)) continue;
            double a = 0.0;
            for (int c = 0; c < C; ++c)
              a += std::abs(diff(synth[s], u, v, dx, dy, c));
            sum += masks[s].at(u, v) * a;
            ++cnt;
          }
      acc.sum[size_t(tile)] = sum;
      acc.count[size_t(tile)] = cnt;
    });
    acc.fold(out.term);
  }

  const double inv = out.term.count > 0 ? 1.0 / double(out.term.count) : 0.0;
  for (size_t s = 0; s < synth.size(); ++s) {
    Image gs(W, H, C, 0.0, false);
    ScalarField gmsk(W, H, 0.0);
    parallel_rows(H, [&](int r0, int r1) {
      for (int v = r0; v < r1; ++v)
        for (int u = 0; u < W; ++u) {
          bool any = false;
          double msum = 0.0;
          for (int d = 0; d < 2; ++d) {
            const int dx = d == 0 ? 1 : 0, dy = 1 - dx;
            // (u, v) as the base pixel of the difference...
            if (ok(synth[s], u, v, dx, dy)) {
              any = true;
              const double m = masks[s].at(u, v);
              for (int c = 0; c < C; ++c) {
                const double sg = sign(diff(synth[s], u, v, dx, dy, c));
                gs.at(u, v, c) += m * sg * inv;
                msum += std::abs(diff(synth[s], u, v, dx, dy, c)) * inv;
              }
            }
            // ...and as the far pixel of the difference based at (u,v)-d.
            const int bu = u - dx, bv = v - dy;
            if (bu >= 0 && bv >= 0 && ok(synth[s], bu, bv, dx, dy)) {
              any = true;
              const double m = masks[s].at(bu, bv);
              for (int c = 0; c < C; ++c)
                gs.at(u, v, c) -=
                    m * sign(diff(synth[s], bu, bv, dx, dy, c)) * inv;
            }
          }
          if (any) gs.set_valid(u, v, true);
          gmsk.at(u, v) = msum;
        }
    });
    out.grad_synth.push_back(std::move(gs));
    out.grad_mask.push_back(std::move(gmsk));
  }
  return out;
}

// ---------------------------------------------------------------------------

SequencePyramid build_pyramid(const SequenceData& seq,
                              const ObjectiveOptions& opt) {
  if (opt.scales < 1) throw std::invalid_argument("pyramid: scales < 1");
  seq.K.validate();
  if (seq.target.width() != seq.K.width ||
      seq.target.height() != seq.K.height)
    throw std::invalid_argument("pyramid: target size != intrinsics size");
  SequencePyramid p;
  for (int l = 0; l < opt.scales; ++l) {
    const int f = 1 << l;
    p.target.push_back(downsample(seq.target, f));
    std::vector<Image> srcs;
    for (const Image& s : seq.sources) srcs.push_back(downsample(s, f));
    p.sources.push_back(std::move(srcs));
    p.gray.push_back(grayscale(p.target.back()));
    p.K.push_back(seq.K.pyramid_level(f));
    if (p.K.back().width < 1 || p.K.back().height < 1)
      throw std::invalid_argument("pyramid: too many scales for image size");
    p.edges_dn.push_back(edge_weights(p.gray.back(), opt.alpha_dn));
    p.edges_uniform.push_back(
        EdgeWeights::uniform(p.K.back().width, p.K.back().height));
  }
  return p;
}

namespace {

// VJP of box-mean downsampling: every fine pixel inherits its coarse cell's
// gradient divided by the (possibly ragged) box population.
void accumulate_upsample(ScalarField& fine, const ScalarField& coarse,
                         int factor) {
  const int W = fine.width(), H = fine.height();
  parallel_rows(H, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v) {
      const int ov = v / factor;
      const int ny = std::min((ov + 1) * factor, H) - ov * factor;
      for (int u = 0; u < W; ++u) {
        const int ou = u / factor;
        const int nx = std::min((ou + 1) * factor, W) - ou * factor;
        fine.at(u, v) += coarse.at(ou, ov) / double(nx * ny);
      }
    }
  });
}

ScalarField combine(const ScalarField& a, double lam, const ScalarField& b) {
  ScalarField out = a;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] += lam * b.data()[i];
  return out;
}

Image combine_img(const Image& a, double lam, const Image& b) {
  Image out = a;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] += lam * b.data()[i];
  return out;
}

}  // namespace

LossReport total_objective(const SequencePyramid& pyr,
                           const SceneVariables& vars,
                           const ObjectiveOptions& opt) {
  const size_t S = pyr.sources.empty() ? 0 : pyr.sources[0].size();
  if (vars.mask_logits.size() != S || vars.twists.size() != S)
    throw std::invalid_argument("total_objective: per-source variable count");
  const int W0 = vars.depth.width(), H0 = vars.depth.height();
  if (W0 != pyr.K[0].width || H0 != pyr.K[0].height)
    throw std::invalid_argument("total_objective: depth size != intrinsics");
  const LossWeights& lw = opt.weights;

  LossReport rep;
  rep.grad_depth = ScalarField(W0, H0, 0.0);
  rep.grad_logits.assign(S, ScalarField(W0, H0, 0.0));
  rep.grad_twists.assign(S, Twist::Zero());

  for (int l = 0; l < opt.scales; ++l) {
    const int f = 1 << l;
    const CameraIntrinsics& K = pyr.K[size_t(l)];
    const ScalarField D_l = downsample(vars.depth, f);

    std::vector<ExplainabilityMask> masks;
    std::vector<ScalarField> mask_fields;
    for (size_t s = 0; s < S; ++s) {
      masks.push_back(make_mask(downsample(vars.mask_logits[s], f)));
      mask_fields.push_back(masks.back().mask);
    }

    const EdgeWeights& Wdn =
        opt.no_edge_dn ? pyr.edges_uniform[size_t(l)] : pyr.edges_dn[size_t(l)];
    NormalMap N;
    ScalarField D_warp;
    if (!opt.no_dn) {
      N = depth_to_normal(D_l, K, Wdn);
      D_warp = normal_to_depth(D_l, N, K, Wdn);
    } else {
      D_warp = D_l;
    }

    std::vector<VectorField> coords;
    std::vector<Image> synths;
    for (size_t s = 0; s < S; ++s) {
      WarpField wf = warp_coords(D_warp, se3_exp(vars.twists[s]), K);
      synths.push_back(bilinear_sample(pyr.sources[size_t(l)][s], wf.coords));
      coords.push_back(std::move(wf.coords));
    }

    const PhotometricResult vs =
        photometric_loss(pyr.target[size_t(l)], synths, mask_fields);
    const double alpha_s = opt.no_edge_smooth ? 0.0 : lw.alpha_smooth;
    const SmoothnessResult sd =
        smoothness_loss(D_l, 2, pyr.gray[size_t(l)], alpha_s);
    const bool have_sn = !opt.no_dn && !opt.no_normal_smooth;
    SmoothnessResult sn;
    if (have_sn) sn = smoothness_loss(N.n, 1, pyr.gray[size_t(l)], alpha_s);
    const MaskLossResult mk = mask_loss(masks);
    const GradientMatchResult gm =
        gradient_matching_loss(pyr.target[size_t(l)], synths, mask_fields);

    rep.vs += vs.term.value();
    rep.smooth_depth += sd.term.value();
    if (have_sn) rep.smooth_normal += sn.term.value();
    rep.mask += mk.term.value();
    rep.grad += gm.term.value();
    rep.zero_valid = rep.zero_valid || vs.zero_valid;

    // Backward. Synthesized-view cotangents gather vs + lambda_g * gm, then
    // flow through sampling -> warp -> (consistency layers) -> depth.
    ScalarField g_Dwarp(K.width, K.height, 0.0);
    for (size_t s = 0; s < S; ++s) {
      const Image g_synth =
          combine_img(vs.grad_synth[s], lw.lambda_g, gm.grad_synth[s]);
      const SampleVjp svjp =
          bilinear_sample_vjp(pyr.sources[size_t(l)][s], coords[s], g_synth);
      const WarpVjp wvjp =
          warp_coords_vjp(D_warp, vars.twists[s], K, svjp.grad_coords);
      for (size_t i = 0; i < g_Dwarp.size(); ++i)
        g_Dwarp.data()[i] += wvjp.grad_depth.data()[i];
      rep.grad_twists[s] += wvjp.grad_twist;

      const ScalarField g_mask =
          combine(vs.grad_mask[s], lw.lambda_g, gm.grad_mask[s]);
      ScalarField g_logit(K.width, K.height);
      for (int v = 0; v < K.height; ++v)
        for (int u = 0; u < K.width; ++u) {
          const double m = masks[s].mask.at(u, v);
          g_logit.at(u, v) = g_mask.at(u, v) * m * (1.0 - m) +
                             lw.lambda_m * mk.grad_logits[s].at(u, v);
        }
      accumulate_upsample(rep.grad_logits[s], g_logit, f);
    }

    ScalarField g_Dl(K.width, K.height, 0.0);
    if (!opt.no_dn) {
      const NormalToDepthVjp nvjp =
          normal_to_depth_vjp(D_l, N, K, Wdn, g_Dwarp);
      VectorField g_N = nvjp.grad_normals;
      if (have_sn)
        for (size_t i = 0; i < g_N.size(); ++i)
          g_N.data()[i] += lw.lambda_n * sn.grad_vector.data()[i];
      g_Dl = nvjp.grad_depth;
      const ScalarField g_from_n = depth_to_normal_vjp(D_l, K, Wdn, g_N);
      for (size_t i = 0; i < g_Dl.size(); ++i)
        g_Dl.data()[i] += g_from_n.data()[i];
    } else {
      g_Dl = g_Dwarp;
    }
    for (size_t i = 0; i < g_Dl.size(); ++i)
      g_Dl.data()[i] += lw.lambda_s * sd.grad_scalar.data()[i];
    accumulate_upsample(rep.grad_depth, g_Dl, f);
  }

  rep.total = rep.vs + lw.lambda_s * rep.smooth_depth +
              lw.lambda_m * rep.mask + lw.lambda_g * rep.grad +
              lw.lambda_n * rep.smooth_normal;
  return rep;
}

LossReport total_objective(const SequenceData& seq, const SceneVariables& vars,
                           const ObjectiveOptions& opt) {
  return total_objective(build_pyramid(seq, opt), vars, opt);
}

}  // namespace warpgeo
