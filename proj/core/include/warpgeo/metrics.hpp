#pragma once

#include "warpgeo/camera.hpp"
#include "warpgeo/consistency.hpp"
#include "warpgeo/field.hpp"

namespace warpgeo {

struct DepthMetrics {
  double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0;
  double delta_1 = 0, delta_2 = 0, delta_3 = 0;
};

struct NormalMetrics {
  double mean_deg = 0, median_deg = 0;
  double pct_11_25 = 0, pct_22_5 = 0, pct_30 = 0;
};

// Standard seven-number depth protocol over pixels valid in both maps.
// With scale_correct the prediction is first rescaled by
// median(gt)/median(pred) (ratio of medians, midpoint convention for even
// counts); both maps are then clamped to [1e-3, cap] — the lower clamp keeps
// the log metric finite. delta_k = fraction with max(p/g, g/p) < 1.25^k
// (strict). Requires gt > 0 on valid pixels and a non-empty valid set.
DepthMetrics depth_metrics(const ScalarField& pred, const ScalarField& gt,
                           double cap, bool scale_correct);

// Per-pixel angle arccos(clamp(p . g, -1, 1)) in degrees over pixels valid
// in both maps; mean, midpoint median, and strict threshold fractions.
// Inputs must be unit within 1e-3 on valid pixels. Symmetric in (pred, gt).
NormalMetrics normal_metrics(const NormalMap& pred, const NormalMap& gt);

// Reference normals for evaluation: the depth-to-normal stencil with
// uniform weights on ground-truth depth.
NormalMap gt_normals_from_depth(const ScalarField& gt_depth,
                                const CameraIntrinsics& K);

// Naive baselines. kGtMean broadcasts the renormalized mean ground-truth
// normal (degenerate-flagged fallback (0,0,-1) when the mean vanishes);
// kPredefinedScene splits the image into 4 triangles along the corner
// diagonals: bottom up-directed (0,-1,0), left right-directed (1,0,0),
// right left-directed (-1,0,0), top camera-facing (0,0,-1).
enum class BaselineKind { kGtMean, kPredefinedScene };
NormalMap baseline_normals(BaselineKind kind, const NormalMap& gt, int width,
                           int height);

}  // namespace warpgeo
