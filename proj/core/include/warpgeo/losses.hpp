#pragma once

#include <vector>

#include "warpgeo/camera.hpp"
#include "warpgeo/consistency.hpp"
#include "warpgeo/field.hpp"

namespace warpgeo {

// Raw sum plus the number of contributing positions. Optimization and
// reports use value() = sum / count so loss weights transfer across
// resolutions; the raw sum is kept so callers can recombine terms exactly.
struct LossTerm {
  double sum = 0.0;
  long long count = 0;
  double value() const { return count > 0 ? sum / double(count) : 0.0; }
};

// Logit-parametrized mask in (0,1); optimizing the logits enforces the
// box constraint without projection.
struct ExplainabilityMask {
  ScalarField logits;
  ScalarField mask;  // sigmoid(logits)
};
ExplainabilityMask make_mask(const ScalarField& logits);

struct LossWeights {
  double lambda_s = 0.5;
  double lambda_m = 0.2;
  double lambda_g = 0.5;  // follows lambda_s by default
  double lambda_n = 1.0;
  double alpha_smooth = 0.1;
};

// Masked photometric error: sum_s sum_x M_s(x) |I_t(x) - synth_s(x)|,
// channels summed per pixel, restricted to valid synthesized pixels.
// count = number of valid (source, pixel) pairs. Gradients are of value().
struct PhotometricResult {
  LossTerm term;
  std::vector<Image> grad_synth;       // per source, w.r.t. synthesized values
  std::vector<ScalarField> grad_mask;  // per source, w.r.t. mask values
  bool zero_valid = false;             // diagnostic: nothing contributed
};
PhotometricResult photometric_loss(const Image& target,
                                   const std::vector<Image>& synth,
                                   const std::vector<ScalarField>& masks);

// Edge-weighted smoothness: sum over forward stencils (boundary dropped) of
// |grad^order F| * exp(-alpha |grad I|), both the stencil and the image
// difference anchored at the base pixel; channels of vector fields share the
// position. alpha = 0 disables the edge weighting.
struct SmoothnessResult {
  LossTerm term;
  ScalarField grad_scalar;  // filled by the scalar overload
  VectorField grad_vector;  // filled by the vector overload
};
SmoothnessResult smoothness_loss(const ScalarField& F, int order,
                                 const ScalarField& gray, double alpha);
SmoothnessResult smoothness_loss(const VectorField& F, int order,
                                 const ScalarField& gray, double alpha);

// Cross-entropy against all-ones maps: -sum_s sum_x log M_s(x), evaluated in
// logit space (softplus(-logit)) so extreme logits stay finite. Gradients
// are w.r.t. the logits.
struct MaskLossResult {
  LossTerm term;
  std::vector<ScalarField> grad_logits;
};
MaskLossResult mask_loss(const std::vector<ExplainabilityMask>& masks);

// Masked L1 difference of forward-difference gradient maps; a position
// counts only when both pixels of the difference are valid in the
// synthesized view. The mask multiplies at the base pixel.
struct GradientMatchResult {
  LossTerm term;
  std::vector<Image> grad_synth;
  std::vector<ScalarField> grad_mask;
};
GradientMatchResult gradient_matching_loss(const Image& target,
                                           const std::vector<Image>& synth,
                                           const std::vector<ScalarField>& masks);

// ---------------------------------------------------------------------------
// Full multi-scale objective.

// Observed data (constant during optimization).
struct SequenceData {
  Image target;
  std::vector<Image> sources;
  CameraIntrinsics K;
};

// Optimized quantities. twists[s] parametrizes T_{target->source_s}.
struct SceneVariables {
  ScalarField depth;                      // full resolution, positive
  std::vector<ScalarField> mask_logits;   // per source, full resolution
  std::vector<Twist> twists;              // per source
};

struct ObjectiveOptions {
  LossWeights weights;
  int scales = 4;          // pyramid levels, factor 2 each
  double alpha_dn = 0.1;   // edge weight alpha of the consistency layers
  bool no_dn = false;           // bypass both consistency layers
  bool no_edge_smooth = false;  // uniform smoothness weights
  bool no_edge_dn = false;      // uniform consistency weights
  bool no_normal_smooth = false;
};

// Per-level constants, built once per sequence so the optimization loop does
// not re-downsample images every step.
struct SequencePyramid {
  std::vector<Image> target;
  std::vector<std::vector<Image>> sources;  // [level][source]
  std::vector<ScalarField> gray;            // grayscale target per level
  std::vector<CameraIntrinsics> K;
  std::vector<EdgeWeights> edges_dn;       // alpha_dn weights per level
  std::vector<EdgeWeights> edges_uniform;  // alpha = 0 per level
};
SequencePyramid build_pyramid(const SequenceData& seq,
                              const ObjectiveOptions& opt);

// Per-term values are the across-scale sums of normalized terms; total is
// their weighted sum (within 1e-12 by construction, asserted in tests).
struct LossReport {
  double vs = 0.0, smooth_depth = 0.0, smooth_normal = 0.0, mask = 0.0,
         grad = 0.0;
  double total = 0.0;
  ScalarField grad_depth;                  // w.r.t. full-res depth values
  std::vector<ScalarField> grad_logits;    // per source, full resolution
  std::vector<Twist> grad_twists;          // per source
  bool zero_valid = false;
};

// Composition per level l: the synthesized views are warped
// with the consistency-refined depth D_n (or D_l itself under no_dn), the
// depth smoothness runs on D_l, and the normal smoothness on N_l:
//   vs(D_n,l) + lambda_s Ls(D_l,2) + lambda_m Lm + lambda_g Lg(D_n,l)
//   + lambda_n Ls(N_l,1)
LossReport total_objective(const SequencePyramid& pyr,
                           const SceneVariables& vars,
                           const ObjectiveOptions& opt);
LossReport total_objective(const SequenceData& seq, const SceneVariables& vars,
                           const ObjectiveOptions& opt);

}  // namespace warpgeo
