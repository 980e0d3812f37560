#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "warpgeo/camera.hpp"
#include "warpgeo/consistency.hpp"
#include "warpgeo/losses.hpp"

namespace warpgeo {

// Analytic plane textures. kSine is bandlimited well below the bilinear
// Nyquist so warped views interpolate to < 1e-3 mean error; kLowTex is
// near-constant (the ambiguity the smoothness terms exist for); kStep has a
// steep but continuous intensity front in world x.
enum class TextureId { kSine, kLowTex, kStep };

// Plane n . X = offset in world coordinates, textured analytically. An
// optional world-axis slab restricts where the plane exists, letting two
// planes meet at a depth edge; slabs should overlap or abut so no ray
// escapes (nearest hit wins where they overlap).
struct PlaneSpec {
  Vec3 normal{0.0, 0.0, 1.0};  // unit
  double offset = 5.0;
  TextureId texture = TextureId::kSine;
  double tex_freq = 1.0;
  double tex_bias = 0.0;  // intensity shift, makes texture edges at seams
  int slab_axis = -1;     // -1: unbounded
  double slab_lo = 0.0, slab_hi = 0.0;
};

// Fully specified synthetic scene. Poses are camera-to-world; the render
// validates that every pixel of every view hits a plane at depth in
// (0.1, 80] scene units.
struct SceneSpec {
  std::string name = "custom";
  std::vector<PlaneSpec> planes;
  CameraIntrinsics camera;
  PoseSE3 cam_to_world_target;
  std::vector<PoseSE3> cam_to_world_sources;
  double noise_sigma = 0.0;  // additive Gaussian, applied after rendering
  uint64_t seed = 1;

  void validate() const;
};

struct RenderedView {
  Image image;        // 3 channels in [0,1]
  ScalarField depth;  // exact ray-plane depth
  NormalMap normals;  // camera frame, oriented n_z < 0
};

// Exact per-pixel ray-plane intersection; the texture is evaluated at the
// 3D hit point, so there is no rasterization aliasing. noise_stream
// decorrelates the per-view noise under one scene seed.
RenderedView render_view(const SceneSpec& spec, const PoseSE3& cam_to_world,
                         uint64_t noise_stream);

// Frame triplet (or S+1 frames) with ground truth for the target view.
// poses_gt[s] maps target-camera points into source s's camera.
struct RenderedSequence {
  SequenceData data;
  ScalarField depth_gt;
  NormalMap normal_gt;
  std::vector<PoseSE3> poses_gt;
};
RenderedSequence make_sequence(const SceneSpec& spec);

// Named presets used across tests and the CLI: "fronto" (plane z = 5),
// "slanted" (30 degree tilt), "two_plane_edge" (depth edge at world x = 0
// with a coinciding texture edge), "lowtex". Sources sit at world
// x = -+0.25 with identity rotation.
SceneSpec scene_preset(const std::string& name, int width = 416,
                       int height = 128);

}  // namespace warpgeo
