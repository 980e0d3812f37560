#pragma once

#include <cstdint>
#include <vector>

#include "warpgeo/camera.hpp"
#include "warpgeo/field.hpp"

namespace warpgeo {

// The 8-neighborhood as (du, dv) pixel offsets. Consecutive entries form the
// 4 perpendicular pairs used by depth_to_normal; the pair order is chosen so
// every cross product points toward the camera (negative z) on a
// fronto-parallel plane, and each neighbor appears in exactly one pair.
inline constexpr int kNeighborOffsets[8][2] = {
    {-1, 0}, {0, 1},    // pair 0
    {-1, 1}, {1, 1},    // pair 1
    {1, 0},  {0, -1},   // pair 2
    {1, -1}, {-1, -1},  // pair 3
};

// Per-pixel, per-neighbor intensity affinity w = exp(-alpha |I_j - I_i|),
// stored in kNeighborOffsets order; out-of-bounds neighbors carry weight 0.
// The same |dI| serves both directions, so w(i->j) == w(j->i).
struct EdgeWeights {
  int width = 0, height = 0;
  double alpha = 0.0;
  std::vector<double> w;  // 8 per pixel

  double at(int u, int v, int k) const {
    return w[(size_t(v) * width + u) * 8 + size_t(k)];
  }
  static EdgeWeights uniform(int width, int height);
};

EdgeWeights edge_weights(const ScalarField& gray, double alpha);

// Unit normal map with the camera-facing convention n_z < 0. A pixel whose
// cross-product sum vanished (or that could not be computed at all) holds
// the fallback (0, 0, -1) and is flagged degenerate; degenerate pixels
// propagate zero gradient.
struct NormalMap {
  VectorField n;  // 3 channels
  std::vector<uint8_t> degenerate;

  Vec3 at(int u, int v) const {
    return {n.at(u, v, 0), n.at(u, v, 1), n.at(u, v, 2)};
  }
};

// Normals as the normalized weighted mean of cross products over the 4
// perpendicular neighbor pairs: n_i = sum_pairs (w0 dphi0) x (w1 dphi1) with
// dphi_k = phi(p_k) - phi(x_i). Border pixels (and pixels whose 3x3 stencil
// touches invalid depth) replicate the nearest computed interior normal.
NormalMap depth_to_normal(const ScalarField& depth, const CameraIntrinsics& K,
                          const EdgeWeights& W);

// Depth re-estimated from neighbors' tangent planes: each in-bounds neighbor
// i of pixel j votes D_e(j|i) = (N_i . phi(x_i)) / (N_i . ray(x_j)), the
// intersection of j's ray with i's local plane; votes fuse with weights
// normalized over the surviving voters. Votes with |N_i . ray(x_j)| <
// eps_ray (grazing planes) are dropped; if every vote drops, D_n(j) = D_o(j).
ScalarField normal_to_depth(const ScalarField& depth_o, const NormalMap& N,
                            const CameraIntrinsics& K, const EdgeWeights& W,
                            double eps_ray = 1e-6);

// Reverse-mode derivative of depth_to_normal w.r.t. the depth map. upstream
// has 3 channels aligned with the normal map (border pixels' upstream flows
// to the interior pixel they replicate).
ScalarField depth_to_normal_vjp(const ScalarField& depth,
                                const CameraIntrinsics& K,
                                const EdgeWeights& W,
                                const VectorField& upstream);

// Reverse-mode derivative of normal_to_depth w.r.t. the input depth and the
// normals. upstream is scalar-aligned with the output depth map.
struct NormalToDepthVjp {
  ScalarField grad_depth;
  VectorField grad_normals;  // 3 channels
};
NormalToDepthVjp normal_to_depth_vjp(const ScalarField& depth_o,
                                     const NormalMap& N,
                                     const CameraIntrinsics& K,
                                     const EdgeWeights& W,
                                     const ScalarField& upstream,
                                     double eps_ray = 1e-6);

}  // namespace warpgeo
