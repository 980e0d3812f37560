#include "warpgeo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace warpgeo {
namespace {

constexpr double kDepthFloor = 1e-3;

double midpoint_median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

DepthMetrics depth_metrics(const ScalarField& pred, const ScalarField& gt,
                           double cap, bool scale_correct) {
  if (!pred.same_shape(gt))
    throw std::invalid_argument("depth_metrics: shape mismatch");
  if (cap <= kDepthFloor) throw std::invalid_argument("depth_metrics: cap");

  std::vector<double> ps, gs;
  for (int v = 0; v < pred.height(); ++v)
    for (int u = 0; u < pred.width(); ++u) {
      if (!pred.valid_at(u, v) || !gt.valid_at(u, v)) continue;
      if (gt.at(u, v) <= 0.0)
        throw std::invalid_argument("depth_metrics: non-positive ground truth");
      ps.push_back(pred.at(u, v));
      gs.push_back(gt.at(u, v));
    }
  if (ps.empty()) throw std::invalid_argument("depth_metrics: no valid pixels");

  if (scale_correct) {
    const double mp = midpoint_median(ps);
    if (mp <= 0.0)
      throw std::invalid_argument("depth_metrics: non-positive median");
    const double s = midpoint_median(gs) / mp;
    for (double& p : ps) p *= s;
  }

  DepthMetrics m;
  const double n = double(ps.size());
  for (size_t i = 0; i < ps.size(); ++i) {
    const double p = std::clamp(ps[i], kDepthFloor, cap);
    const double g = std::clamp(gs[i], kDepthFloor, cap);
    const double d = p - g;
    m.abs_rel += std::abs(d) / g;
    m.sq_rel += d * d / g;
    m.rmse += d * d;
    const double dl = std::log(p) - std::log(g);
    m.rmse_log += dl * dl;
    const double r = std::max(p / g, g / p);
    if (r < 1.25) m.delta_1 += 1.0;
    if (r < 1.25 * 1.25) m.delta_2 += 1.0;
    if (r < 1.25 * 1.25 * 1.25) m.delta_3 += 1.0;
  }
  m.abs_rel /= n;
  m.sq_rel /= n;
  m.rmse = std::sqrt(m.rmse / n);
  m.rmse_log = std::sqrt(m.rmse_log / n);
  m.delta_1 /= n;
  m.delta_2 /= n;
  m.delta_3 /= n;
  return m;
}

NormalMetrics normal_metrics(const NormalMap& pred, const NormalMap& gt) {
  if (!pred.n.same_shape(gt.n))
    throw std::invalid_argument("normal_metrics: shape mismatch");

  std::vector<double> angles;
  for (int v = 0; v < pred.n.height(); ++v)
    for (int u = 0; u < pred.n.width(); ++u) {
      if (!pred.n.valid_at(u, v) || !gt.n.valid_at(u, v)) continue;
      const Vec3 p = pred.at(u, v), g = gt.at(u, v);
      if (std::abs(p.norm() - 1.0) > 1e-3 || std::abs(g.norm() - 1.0) > 1e-3)
        throw std::invalid_argument("normal_metrics: non-unit normal");
      const double c = std::clamp(p.dot(g), -1.0, 1.0);
      angles.push_back(std::acos(c) * 180.0 / M_PI);
    }
  if (angles.empty())
    throw std::invalid_argument("normal_metrics: no valid pixels");

  NormalMetrics m;
  for (double a : angles) {
    m.mean_deg += a;
    if (a < 11.25) m.pct_11_25 += 1.0;
    if (a < 22.5) m.pct_22_5 += 1.0;
    if (a < 30.0) m.pct_30 += 1.0;
  }
  const double n = double(angles.size());
  m.mean_deg /= n;
  m.median_deg = midpoint_median(angles);
  m.pct_11_25 /= n;
  m.pct_22_5 /= n;
  m.pct_30 /= n;
  return m;
}

NormalMap gt_normals_from_depth(const ScalarField& gt_depth,
                                const CameraIntrinsics& K) {
  return depth_to_normal(gt_depth, K,
                         EdgeWeights::uniform(gt_depth.width(),
                                              gt_depth.height()));
}

NormalMap baseline_normals(BaselineKind kind, const NormalMap& gt, int width,
                           int height) {
  NormalMap out;
  out.n = VectorField(width, height, 3);
  out.degenerate.assign(size_t(width) * height, 0);

  if (kind == BaselineKind::kGtMean) {
    Vec3 mean = Vec3::Zero();
    for (int v = 0; v < gt.n.height(); ++v)
      for (int u = 0; u < gt.n.width(); ++u)
        if (gt.n.valid_at(u, v)) mean += gt.at(u, v);
    bool degenerate = mean.norm() < 1e-12;
    const Vec3 n = degenerate ? Vec3(0, 0, -1) : Vec3(mean.normalized());
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u) {
        for (int c = 0; c < 3; ++c) out.n.at(u, v, c) = n[c];
        if (degenerate) out.degenerate[out.n.pix(u, v)] = 1;
      }
    return out;
  }

  // Triangles cut by the two corner-to-corner diagonals, classified in the
  // unit square with ties going to the bottom/top wedges.
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      const double x = (u + 0.5) / width, y = (v + 0.5) / height;
      Vec3 n;
      if (y >= x && y >= 1.0 - x) n = Vec3(0, -1, 0);       // bottom: up
      else if (y <= x && y <= 1.0 - x) n = Vec3(0, 0, -1);  // top: facing
      else if (x < 0.5) n = Vec3(1, 0, 0);                  // left: right
      else n = Vec3(-1, 0, 0);                              // right: left
      for (int c = 0; c < 3; ++c) out.n.at(u, v, c) = n[c];
    }
  return out;
}

}  // namespace warpgeo
