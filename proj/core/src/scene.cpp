#include "warpgeo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "warpgeo/threading.hpp"

namespace warpgeo {
namespace {

constexpr double kDepthMin = 0.1;
constexpr double kDepthMax = 80.0;

double tex_value(const PlaneSpec& p, const Vec3& X, int c) {
  const double f = p.tex_freq;
  const double ph = 0.7 * c;  // decorrelates channels
  double v = 0.5;
  switch (p.texture) {
    case TextureId::kSine:
      v += 0.15 * std::sin(f * (1.3 * X.x() + 0.9 * X.y()) + ph) +
           0.10 * std::cos(f * (0.8 * X.y() - 0.6 * X.z()) + 1.7 + ph) +
           0.06 * std::sin(f * (0.5 * X.x() - 0.7 * X.z()) + 0.4);
      break;
    case TextureId::kLowTex:
      v += 0.02 * std::sin(f * (0.3 * X.x() + 0.2 * X.y()) + ph);
      break;
    case TextureId::kStep:
      v += 0.12 * std::tanh(8.0 * f * X.x()) +
           0.08 * std::sin(f * (0.9 * X.y() + 0.6 * X.z()) + ph);
      break;
  }
  return std::clamp(v + p.tex_bias, 0.0, 1.0);
}

bool in_slab(const PlaneSpec& p, const Vec3& X) {
  if (p.slab_axis < 0) return true;
  double c = X[p.slab_axis];
  return c >= p.slab_lo && c <= p.slab_hi;
}

}  // namespace

void SceneSpec::validate() const {
  camera.validate();
  if (planes.empty()) throw std::invalid_argument("scene: no planes");
  for (const PlaneSpec& p : planes) {
    if (std::abs(p.normal.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("scene: plane normal must be unit");
    if (p.slab_axis > 2)
      throw std::invalid_argument("scene: slab axis out of range");
  }
  if (cam_to_world_sources.empty())
    throw std::invalid_argument("scene: at least one source view");
}

RenderedView render_view(const SceneSpec& spec, const PoseSE3& cam_to_world,
                         uint64_t noise_stream) {
  const CameraIntrinsics& K = spec.camera;
  RenderedView out;
  out.image = Image(K.width, K.height, 3);
  out.depth = ScalarField(K.width, K.height);
  out.normals.n = VectorField(K.width, K.height, 3);
  out.normals.degenerate.assign(size_t(K.width) * K.height, 0);

  const Vec3 origin = cam_to_world.t;
  std::vector<uint8_t> missed(num_row_tiles(K.height), 0);

  parallel_tiles(K.height, [&](size_t tile, int v0, int v1) {
    for (int v = v0; v < v1; ++v)
      for (int u = 0; u < K.width; ++u) {
        const Vec3 dir = cam_to_world.R * K.ray(u, v);
        // Nearest admissible hit; depth equals the ray parameter because
        // the camera ray has unit z in the camera frame.
        double best = kDepthMax + 1.0;
        const PlaneSpec* hit = nullptr;
        Vec3 hit_point = Vec3::Zero();
        for (const PlaneSpec& p : spec.planes) {
          const double denom = p.normal.dot(dir);
          if (std::abs(denom) < 1e-12) continue;
          const double s = (p.offset - p.normal.dot(origin)) / denom;
          if (s <= kDepthMin || s > kDepthMax || s >= best) continue;
          const Vec3 X = origin + s * dir;
          if (!in_slab(p, X)) continue;
          best = s;
          hit = &p;
          hit_point = X;
        }
        if (!hit) {
          missed[tile] = 1;
          continue;
        }
        out.depth.at(u, v) = best;
        Vec3 n_cam = cam_to_world.R.transpose() * hit->normal;
        if (n_cam.z() > 0) n_cam = -n_cam;
        for (int c = 0; c < 3; ++c) {
          out.normals.n.at(u, v, c) = n_cam[c];
          out.image.at(u, v, c) = tex_value(*hit, hit_point, c);
        }
      }
  });

  for (uint8_t m : missed)
    if (m)
      throw std::invalid_argument(
          "scene: a ray misses every plane (invalid SceneSpec)");

  if (spec.noise_sigma > 0.0) {
    // Serial, single-stream noise so outputs do not depend on threading.
    std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + noise_stream);
    std::normal_distribution<double> gauss(0.0, spec.noise_sigma);
    for (size_t i = 0; i < out.image.size(); ++i)
      out.image.data()[i] =
          std::clamp(out.image.data()[i] + gauss(rng), 0.0, 1.0);
  }
  return out;
}

RenderedSequence make_sequence(const SceneSpec& spec) {
  spec.validate();
  RenderedSequence seq;
  seq.data.K = spec.camera;

  RenderedView target = render_view(spec, spec.cam_to_world_target, 0);
  seq.data.target = std::move(target.image);
  seq.depth_gt = std::move(target.depth);
  seq.normal_gt = std::move(target.normals);

  for (size_t s = 0; s < spec.cam_to_world_sources.size(); ++s) {
    RenderedView view =
        render_view(spec, spec.cam_to_world_sources[s], uint64_t(s) + 1);
    seq.data.sources.push_back(std::move(view.image));
    seq.poses_gt.push_back(spec.cam_to_world_sources[s].inverse() *
                           spec.cam_to_world_target);
  }
  return seq;
}

SceneSpec scene_preset(const std::string& name, int width, int height) {
  SceneSpec spec;
  spec.name = name;
  spec.camera = CameraIntrinsics{double(width), double(width),
                                 (width - 1) / 2.0, (height - 1) / 2.0, width,
                                 height};
  spec.cam_to_world_target = PoseSE3::identity();
  PoseSE3 left, right;
  left.t = Vec3(-0.25, 0.0, 0.0);
  right.t = Vec3(0.25, 0.0, 0.0);
  spec.cam_to_world_sources = {left, right};

  if (name == "fronto") {
    spec.planes = {PlaneSpec{}};  // z = 5, sine texture
  } else if (name == "slanted") {
    const double th = 30.0 * M_PI / 180.0;
    PlaneSpec p;
    p.normal = Vec3(0.0, std::sin(th), -std::cos(th));
    p.offset = p.normal.dot(Vec3(0.0, 0.0, 5.0));  // depth 5 at the centre
    spec.planes = {p};
  } else if (name == "two_plane_edge") {
    PlaneSpec near, far;
    near.offset = 4.0;
    near.tex_bias = -0.12;
    near.slab_axis = 0;
    near.slab_lo = -1e9;
    near.slab_hi = 0.0;
    far.offset = 6.0;
    far.tex_bias = 0.12;
    far.slab_axis = 0;
    far.slab_lo = -1.0;  // overlaps the near slab; nearest hit wins there
    far.slab_hi = 1e9;
    spec.planes = {near, far};
  } else if (name == "lowtex") {
    PlaneSpec p;
    p.texture = TextureId::kLowTex;
    spec.planes = {p};
  } else {
    throw std::invalid_argument("scene: unknown preset '" + name + "'");
  }
  return spec;
}

}  // namespace warpgeo
