#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "warpgeo/losses.hpp"
#include "warpgeo/scene.hpp"

namespace warpgeo {

// Depth initialization. kConstant starts at init_depth everywhere;
// kGroundTruth starts every optimized quantity at its true value (fixed-point
// tests), including poses and saturated mask logits; kPerturbed scales the
// true depth by init_scale with zero twists and logits.
enum class InitStrategy { kConstant, kGroundTruth, kPerturbed };

struct OptimConfig {
  double lr = 2e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int max_steps = 2000;
  // Fraction of steps spent in stage 1 (objective without the consistency
  // layers, gradient matching, or normal smoothness) before the full
  // objective switches on.
  double stage_split = 0.8;
  ObjectiveOptions objective;  // stage-2 options
  // Pin twists to the sequence's ground-truth poses and skip their updates.
  bool freeze_poses = false;
  InitStrategy init = InitStrategy::kConstant;
  double init_depth = 1.0;  // kConstant
  double init_scale = 2.0;  // kPerturbed: D = scale * D_gt
  uint64_t seed = 1;        // recorded for replay; the loop itself is exact

  void validate() const;
};

struct AdamSlot {
  std::vector<double> m, v;
  explicit AdamSlot(size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Depth is optimized as log_depth, so D = exp(log_depth) stays positive
// without projection.
struct OptimState {
  ScalarField log_depth;
  std::vector<ScalarField> mask_logits;
  std::vector<Twist> twists;
  long long step = 0;
  AdamSlot slot_depth;
  std::vector<AdamSlot> slot_logits;
  std::vector<AdamSlot> slot_twists;

  ScalarField depth() const;  // exp(log_depth)
};

struct TraceRow {
  long long step = 0;
  int stage = 1;
  double total = 0, vs = 0, smooth_depth = 0, smooth_normal = 0, mask = 0,
         grad = 0;
};

struct OptimResult {
  OptimState state;            // last finite state
  ScalarField depth;           // exp(log_depth)
  ScalarField depth_refined;   // after the consistency round trip
  NormalMap normals;
  std::vector<PoseSE3> poses;  // target -> source
  std::vector<ScalarField> masks;
  std::vector<TraceRow> trace;
  bool aborted = false;
  std::string abort_reason;
};

OptimState init_state(const RenderedSequence& seq, InitStrategy strategy,
                      const OptimConfig& cfg);

// First-order optimization of depth, mask logits, and poses on the
// multi-scale objective. Rows are recorded before each update (the final
// row, step == max_steps, evaluates the stage-2 objective once more after
// the last update). A non-finite loss or gradient aborts before the update
// that would have consumed it, so the returned state is finite.
OptimResult optimize(const RenderedSequence& seq, const OptimConfig& cfg);

}  // namespace warpgeo
