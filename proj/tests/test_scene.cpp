#include <doctest.h>

#include <cmath>
#include <set>

#include "test_support.hpp"
#include "warpgeo/metrics.hpp"
#include "warpgeo/sampling.hpp"
#include "warpgeo/scene.hpp"

using namespace warpgeo;

TEST_CASE("fronto preset renders exact constant depth and normals") {
  SceneSpec spec = scene_preset("fronto", 26, 14);
  RenderedSequence seq = make_sequence(spec);
  REQUIRE(seq.data.sources.size() == 2);  // triplet: target + 2 sources
  CHECK(seq.depth_gt.width() == 26);
  for (int v = 0; v < 14; ++v)
    for (int u = 0; u < 26; ++u) {
      CHECK(seq.depth_gt.at(u, v) == doctest::Approx(5.0).epsilon(1e-12));
      CHECK(seq.normal_gt.at(u, v).x() == 0.0);
      CHECK(seq.normal_gt.at(u, v).y() == 0.0);
      CHECK(seq.normal_gt.at(u, v).z() == -1.0);
    }
  for (size_t i = 0; i < seq.data.target.size(); ++i) {
    CHECK(seq.data.target.data()[i] >= 0.0);
    CHECK(seq.data.target.data()[i] <= 1.0);
  }
}

TEST_CASE("identity source pose reproduces the target image") {
  SceneSpec spec = scene_preset("fronto", 20, 10);
  spec.cam_to_world_sources = {PoseSE3::identity()};
  RenderedSequence seq = make_sequence(spec);
  REQUIRE(seq.data.sources.size() == 1);
  for (size_t i = 0; i < seq.data.target.size(); ++i)
    CHECK(seq.data.sources[0].data()[i] == seq.data.target.data()[i]);
  CHECK(seq.poses_gt[0].is_identity_bits());
}

TEST_CASE("default sequence resolution is 128x416") {
  SceneSpec spec = scene_preset("fronto");
  CHECK(spec.camera.width == 416);
  CHECK(spec.camera.height == 128);
  spec.camera.validate();
}

TEST_CASE("x-translated source shifts correspondences by fx*t/d") {
  SceneSpec spec = scene_preset("fronto", 104, 32);
  RenderedSequence seq = make_sequence(spec);
  // Sources sit at world x = -+0.25 looking at the z=5 plane.
  const double fx = seq.data.K.fx;
  WarpField wf = warp_coords(seq.depth_gt, seq.poses_gt[0], seq.data.K);
  const double want_shift = fx * seq.poses_gt[0].t.x() / 5.0;
  CHECK(std::abs(want_shift) == doctest::Approx(fx * 0.25 / 5.0));
  for (int v = 0; v < 32; v += 7)
    for (int u = 0; u < 104; u += 11) {
      REQUIRE(wf.coords.valid_at(u, v));
      CHECK(wf.coords.at(u, v, 0) ==
            doctest::Approx(u + want_shift).epsilon(1e-12));
      CHECK(wf.coords.at(u, v, 1) == doctest::Approx(double(v)).epsilon(1e-12));
    }
}

TEST_CASE("warping sources with ground truth reproduces the target closely") {
  // Single-plane scenes only: the two-plane preset has a thin occlusion
  // sliver at the depth edge where photometric consistency cannot hold.
  for (const char* name : {"fronto", "slanted", "lowtex"}) {
    SceneSpec spec = scene_preset(name, 104, 32);
    RenderedSequence seq = make_sequence(spec);
    for (size_t s = 0; s < seq.data.sources.size(); ++s) {
      WarpField wf = warp_coords(seq.depth_gt, seq.poses_gt[s], seq.data.K);
      SampledImage synth = bilinear_sample(seq.data.sources[s], wf.coords);
      double err = 0.0;
      long long n = 0;
      for (int v = 0; v < 32; ++v)
        for (int u = 0; u < 104; ++u) {
          if (!synth.valid_at(u, v)) continue;
          for (int c = 0; c < 3; ++c)
            err += std::abs(synth.at(u, v, c) - seq.data.target.at(u, v, c));
          n += 3;
        }
      REQUIRE(n > 104 * 32 * 2);  // most pixels stay in frame
      INFO(name, " source ", s);
      CHECK(err / double(n) < 1e-3);
    }
  }
}

TEST_CASE("slanted preset normals match the rendered depth") {
  SceneSpec spec = scene_preset("slanted", 40, 24);
  RenderedSequence seq = make_sequence(spec);
  const double theta = 30.0 * M_PI / 180.0;
  const Vec3 n_true{0.0, std::sin(theta), -std::cos(theta)};
  NormalMap from_depth =
      gt_normals_from_depth(seq.depth_gt, seq.data.K);
  for (int v = 1; v < 23; ++v)
    for (int u = 1; u < 39; ++u) {
      CHECK(testsup::angle_deg(seq.normal_gt.at(u, v), n_true) < 1e-6);
      CHECK(testsup::angle_deg(from_depth.at(u, v), n_true) < 0.1);
    }
}

TEST_CASE("rendered depth and normals satisfy plane orthogonality") {
  // N(x) . (phi(neighbor) - phi(x)) = 0 for neighbors on the same plane.
  for (const char* name : {"fronto", "slanted"}) {
    SceneSpec spec = scene_preset(name, 30, 20);
    RenderedSequence seq = make_sequence(spec);
    for (int v = 1; v < 19; ++v)
      for (int u = 1; u < 29; ++u) {
        Vec3 phi = backproject({double(u), double(v)}, seq.depth_gt.at(u, v),
                               seq.data.K);
        Vec3 n = seq.normal_gt.at(u, v);
        for (int k = 0; k < 8; ++k) {
          int uu = u + kNeighborOffsets[k][0];
          int vv = v + kNeighborOffsets[k][1];
          Vec3 phi_n = backproject({double(uu), double(vv)},
                                   seq.depth_gt.at(uu, vv), seq.data.K);
          INFO(name);
          CHECK(std::abs(n.dot(phi_n - phi)) < 1e-9);
        }
      }
  }
}

TEST_CASE("two-plane preset puts the depth edge at world x = 0") {
  SceneSpec spec = scene_preset("two_plane_edge", 64, 16);
  RenderedSequence seq = make_sequence(spec);
  std::set<int> depths;
  for (int v = 0; v < 16; ++v)
    for (int u = 0; u < 64; ++u) {
      double d = seq.depth_gt.at(u, v);
      CHECK((std::abs(d - 4.0) < 1e-12 || std::abs(d - 6.0) < 1e-12));
      depths.insert(int(std::lround(d)));
      // Near plane exactly where the hit point has x <= 0.
      double x_world = (u - seq.data.K.cx) / seq.data.K.fx * d;
      if (x_world <= 0)
        CHECK(d == doctest::Approx(4.0));
      else
        CHECK(d == doctest::Approx(6.0));
    }
  CHECK(depths == std::set<int>{4, 6});

  // The intensity edge coincides: the columns straddling cx differ by the
  // 0.24 bias gap on average (per-row sine textures can partially cancel).
  ScalarField gray = grayscale(seq.data.target);
  int ue = int(std::floor(seq.data.K.cx));
  double mean_jump = 0.0;
  for (int v = 0; v < 16; ++v)
    mean_jump += (gray.at(ue + 1, v) - gray.at(ue, v)) / 16.0;
  CHECK(mean_jump > 0.1);
}

TEST_CASE("lowtex preset has little texture contrast") {
  SceneSpec spec = scene_preset("lowtex", 40, 16);
  RenderedSequence seq = make_sequence(spec);
  ScalarField gray = grayscale(seq.data.target);
  double lo = 1e9, hi = -1e9;
  for (size_t i = 0; i < gray.size(); ++i) {
    lo = std::min(lo, gray.data()[i]);
    hi = std::max(hi, gray.data()[i]);
  }
  CHECK(hi - lo < 0.05);
}

TEST_CASE("noise is seeded, reproducible, and clamped") {
  SceneSpec spec = scene_preset("fronto", 24, 12);
  spec.noise_sigma = 0.05;
  spec.seed = 77;
  RenderedSequence a = make_sequence(spec);
  RenderedSequence b = make_sequence(spec);
  for (size_t i = 0; i < a.data.target.size(); ++i)
    CHECK(a.data.target.data()[i] == b.data.target.data()[i]);
  for (size_t i = 0; i < a.data.sources[0].size(); ++i)
    CHECK(a.data.sources[0].data()[i] == b.data.sources[0].data()[i]);

  spec.seed = 78;
  RenderedSequence c = make_sequence(spec);
  int differing = 0;
  for (size_t i = 0; i < a.data.target.size(); ++i) {
    if (a.data.target.data()[i] != c.data.target.data()[i]) ++differing;
    CHECK(a.data.target.data()[i] >= 0.0);
    CHECK(a.data.target.data()[i] <= 1.0);
  }
  CHECK(differing > 100);

  // Target and source noise streams are decorrelated.
  int same = 0;
  for (size_t i = 0; i < a.data.target.size(); ++i)
    if (a.data.target.data()[i] == a.data.sources[0].data()[i]) ++same;
  CHECK(same < int(a.data.target.size() / 2));
}

TEST_CASE("a scene whose rays can miss is rejected") {
  SceneSpec spec = scene_preset("fronto", 16, 8);
  spec.planes[0].slab_axis = 0;  // restrict the plane to x in [0, 0.1]
  spec.planes[0].slab_lo = 0.0;
  spec.planes[0].slab_hi = 0.1;
  CHECK_THROWS_AS(make_sequence(spec), std::invalid_argument);
}

TEST_CASE("depth outside (0.1, 80] is rejected") {
  SceneSpec spec = scene_preset("fronto", 16, 8);
  spec.planes[0].offset = 100.0;  // plane z = 100: beyond the far cap
  CHECK_THROWS_AS(make_sequence(spec), std::invalid_argument);
}

TEST_CASE("poses_gt maps target-camera points into each source camera") {
  SceneSpec spec = scene_preset("slanted", 30, 12);
  RenderedSequence seq = make_sequence(spec);
  for (size_t s = 0; s < seq.poses_gt.size(); ++s) {
    PoseSE3 want = spec.cam_to_world_sources[s].inverse() *
                   spec.cam_to_world_target;
    CHECK((seq.poses_gt[s].R - want.R).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((seq.poses_gt[s].t - want.t).cwiseAbs().maxCoeff() < 1e-12);
  }
}
