#include "warpgeo/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace warpgeo {
namespace {

// Saturated start for the ground-truth strategy: sigmoid(40) is 1 within
// 4e-18, so the mask term exerts no meaningful pull at a fixed point.
constexpr double kSaturatedLogit = 40.0;

bool finite_array(const double* p, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

std::string find_non_finite(const LossReport& r) {
  if (!std::isfinite(r.total)) return "total";
  if (!finite_array(r.grad_depth.data(), r.grad_depth.size()))
    return "grad_depth";
  for (size_t s = 0; s < r.grad_logits.size(); ++s)
    if (!finite_array(r.grad_logits[s].data(), r.grad_logits[s].size()))
      return "grad_logits[" + std::to_string(s) + "]";
  for (size_t s = 0; s < r.grad_twists.size(); ++s)
    if (!finite_array(r.grad_twists[s].data(), 6))
      return "grad_twists[" + std::to_string(s) + "]";
  return {};
}

ObjectiveOptions stage1_options(const ObjectiveOptions& full) {
  ObjectiveOptions o = full;
  o.no_dn = true;
  o.weights.lambda_g = 0.0;
  o.no_normal_smooth = true;
  return o;
}

}  // namespace

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("optim: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("optim: betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("optim: eps must be positive");
  if (max_steps < 1) throw std::invalid_argument("optim: max_steps < 1");
  if (stage_split < 0.0 || stage_split > 1.0)
    throw std::invalid_argument("optim: stage_split outside [0, 1]");
  if (!(init_depth > 0.0) || !(init_scale > 0.0))
    throw std::invalid_argument("optim: init depth/scale must be positive");
  if (objective.scales < 1) throw std::invalid_argument("optim: scales < 1");
}

ScalarField OptimState::depth() const {
  ScalarField d = log_depth;
  for (size_t i = 0; i < d.size(); ++i) d.data()[i] = std::exp(d.data()[i]);
  return d;
}

OptimState init_state(const RenderedSequence& seq, InitStrategy strategy,
                      const OptimConfig& cfg) {
  const int W = seq.depth_gt.width(), H = seq.depth_gt.height();
  const size_t S = seq.data.sources.size();

  OptimState st;
  st.log_depth = ScalarField(W, H);
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      double d = cfg.init_depth;
      if (strategy == InitStrategy::kGroundTruth) d = seq.depth_gt.at(u, v);
      if (strategy == InitStrategy::kPerturbed)
        d = cfg.init_scale * seq.depth_gt.at(u, v);
      st.log_depth.at(u, v) = std::log(d);
    }

  const double logit0 =
      strategy == InitStrategy::kGroundTruth ? kSaturatedLogit : 0.0;
  st.mask_logits.assign(S, ScalarField(W, H, logit0));
  st.twists.assign(S, Twist::Zero());
  if (strategy == InitStrategy::kGroundTruth || cfg.freeze_poses)
    for (size_t s = 0; s < S; ++s) st.twists[s] = se3_log(seq.poses_gt[s]);

  st.slot_depth = AdamSlot(st.log_depth.size());
  st.slot_logits.assign(S, AdamSlot(size_t(W) * H));
  st.slot_twists.assign(S, AdamSlot(6));
  return st;
}

OptimResult optimize(const RenderedSequence& seq, const OptimConfig& cfg) {
  cfg.validate();
  const size_t S = seq.data.sources.size();
  OptimState st = init_state(seq, cfg.init, cfg);
  const SequencePyramid pyr = build_pyramid(seq.data, cfg.objective);
  const ObjectiveOptions stage1 = stage1_options(cfg.objective);
  const long long stage1_steps =
      llround(cfg.stage_split * double(cfg.max_steps));

  OptimResult out;
  auto adam = [&cfg](double* x, const double* g, AdamSlot& slot, size_t n,
                     long long t) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (size_t i = 0; i < n; ++i) {
      slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g[i];
      slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      x[i] -=
          cfg.lr * (slot.m[i] / bc1) / (std::sqrt(slot.v[i] / bc2) + cfg.eps);
    }
  };

  std::vector<double> g_logdepth(st.log_depth.size());
  for (long long t = 0; t < cfg.max_steps; ++t) {
    const bool stage2 = t >= stage1_steps;
    SceneVariables vars{st.depth(), st.mask_logits, st.twists};
    const LossReport r =
        total_objective(pyr, vars, stage2 ? cfg.objective : stage1);

    const std::string bad = find_non_finite(r);
    if (!bad.empty()) {
      out.aborted = true;
      out.abort_reason =
          "non-finite " + bad + " at step " + std::to_string(t);
      break;
    }
    out.trace.push_back({t, stage2 ? 2 : 1, r.total, r.vs, r.smooth_depth,
                         r.smooth_normal, r.mask, r.grad});

    const long long tn = ++st.step;
    // d total / d log_depth = grad_depth * depth
    for (size_t i = 0; i < g_logdepth.size(); ++i)
      g_logdepth[i] = r.grad_depth.data()[i] * vars.depth.data()[i];
    adam(st.log_depth.data(), g_logdepth.data(), st.slot_depth,
         g_logdepth.size(), tn);
    for (size_t s = 0; s < S; ++s)
      adam(st.mask_logits[s].data(), r.grad_logits[s].data(),
           st.slot_logits[s], st.mask_logits[s].size(), tn);
    if (!cfg.freeze_poses)
      for (size_t s = 0; s < S; ++s)
        adam(st.twists[s].data(), r.grad_twists[s].data(), st.slot_twists[s],
             6, tn);
  }

  if (!out.aborted) {
    // Final full-objective value after the last update.
    SceneVariables vars{st.depth(), st.mask_logits, st.twists};
    const LossReport r = total_objective(pyr, vars, cfg.objective);
    if (find_non_finite(r).empty())
      out.trace.push_back({cfg.max_steps, 2, r.total, r.vs, r.smooth_depth,
                           r.smooth_normal, r.mask, r.grad});
  }

  out.depth = st.depth();
  const EdgeWeights& e0 =
      cfg.objective.no_edge_dn ? pyr.edges_uniform[0] : pyr.edges_dn[0];
  out.normals = depth_to_normal(out.depth, seq.data.K, e0);
  out.depth_refined =
      cfg.objective.no_dn
          ? out.depth
          : normal_to_depth(out.depth, out.normals, seq.data.K, e0);
  for (size_t s = 0; s < S; ++s) {
    out.poses.push_back(se3_exp(st.twists[s]));
    out.masks.push_back(make_mask(st.mask_logits[s]).mask);
  }
  out.state = std::move(st);
  return out;
}

}  // namespace warpgeo
