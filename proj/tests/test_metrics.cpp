#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "warpgeo/metrics.hpp"
#include "warpgeo/scene.hpp"

using namespace warpgeo;

namespace {

ScalarField row_depth(std::initializer_list<double> vals) {
  ScalarField f(int(vals.size()), 1);
  int u = 0;
  for (double v : vals) f.at(u++, 0) = v;
  return f;
}

NormalMap tilted_normals(int w, int h, double angle_deg) {
  NormalMap N;
  N.n = VectorField(w, h, 3);
  N.degenerate.assign(size_t(w) * h, 0);
  const double a = angle_deg * M_PI / 180.0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      N.n.at(u, v, 0) = std::sin(a);
      N.n.at(u, v, 2) = -std::cos(a);
    }
  return N;
}

}  // namespace

TEST_CASE("perfect depth prediction scores zero error and full deltas") {
  ScalarField gt = row_depth({1, 2, 3, 4});
  DepthMetrics m = depth_metrics(gt, gt, 80.0, false);
  CHECK(m.abs_rel == 0.0);
  CHECK(m.sq_rel == 0.0);
  CHECK(m.rmse == 0.0);
  CHECK(m.rmse_log == 0.0);
  CHECK(m.delta_1 == 1.0);
  CHECK(m.delta_2 == 1.0);
  CHECK(m.delta_3 == 1.0);
}

TEST_CASE("median scaling cancels a global factor exactly") {
  ScalarField gt = row_depth({1, 2, 3, 4, 7});
  ScalarField pred = row_depth({2, 4, 6, 8, 14});
  DepthMetrics m = depth_metrics(pred, gt, 80.0, true);
  CHECK(m.abs_rel == 0.0);
  CHECK(m.rmse == 0.0);
  CHECK(m.delta_1 == 1.0);
  // Without scaling the same prediction is badly off.
  DepthMetrics raw = depth_metrics(pred, gt, 80.0, false);
  CHECK(raw.abs_rel == 1.0);  // |2g - g| / g
  CHECK(raw.delta_1 == 0.0);  // ratio 2 >= 1.25
}

TEST_CASE("two-pixel hand fixture") {
  ScalarField pred = row_depth({1, 2});
  ScalarField gt = row_depth({2, 2});
  DepthMetrics m = depth_metrics(pred, gt, 80.0, false);
  CHECK(m.abs_rel == 0.25);               // (1/2 + 0) / 2
  CHECK(m.sq_rel == 0.25);                // (1/2 + 0) / 2
  CHECK(m.rmse == std::sqrt(0.5));        // sqrt((1 + 0)/2)
  CHECK(m.rmse_log ==
        doctest::Approx(std::log(2.0) / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(m.delta_1 == 0.5);  // ratios 2 and 1
  CHECK(m.delta_2 == 0.5);
  CHECK(m.delta_3 == 0.5);
}

TEST_CASE("four-pixel hand fixture") {
  ScalarField pred = row_depth({1, 2, 3, 4});
  ScalarField gt = row_depth({2, 2, 3, 4});
  DepthMetrics m = depth_metrics(pred, gt, 80.0, false);
  CHECK(m.abs_rel == 0.125);  // (0.5 + 0 + 0 + 0)/4
  CHECK(m.sq_rel == 0.125);   // (0.5 + 0 + 0 + 0)/4
  CHECK(m.rmse == 0.5);       // sqrt(1/4)
  CHECK(m.rmse_log == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-15));
  CHECK(m.delta_1 == 0.75);
}

TEST_CASE("joint rescaling leaves relative metrics invariant") {
  ScalarField pred = row_depth({1.1, 2.4, 2.9, 4.6, 5.0, 6.3});
  ScalarField gt = row_depth({1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  DepthMetrics base = depth_metrics(pred, gt, 1e6, false);
  for (double s : {0.5, 2.0, 10.0}) {
    ScalarField ps(6, 1), gs(6, 1);
    for (int u = 0; u < 6; ++u) {
      ps.at(u, 0) = s * pred.at(u, 0);
      gs.at(u, 0) = s * gt.at(u, 0);
    }
    DepthMetrics m = depth_metrics(ps, gs, 1e6, false);
    CHECK(std::abs(m.abs_rel - base.abs_rel) < 1e-12);
    CHECK(std::abs(m.rmse_log - base.rmse_log) < 1e-12);
    CHECK(m.delta_1 == base.delta_1);
    CHECK(m.delta_2 == base.delta_2);
    CHECK(m.delta_3 == base.delta_3);
    // The dimensional metrics scale along: rmse by s, sq_rel by s.
    CHECK(m.rmse == doctest::Approx(s * base.rmse).epsilon(1e-12));
    CHECK(m.sq_rel == doctest::Approx(s * base.sq_rel).epsilon(1e-12));
  }
}

TEST_CASE("depth clamping applies the cap and the floor") {
  ScalarField pred = row_depth({100.0, 4.0});
  ScalarField gt = row_depth({90.0, 4.0});
  DepthMetrics m = depth_metrics(pred, gt, 80.0, false);
  CHECK(m.abs_rel == 0.0);  // both clamp to the 80 cap

  ScalarField tiny = row_depth({1e-9, 4.0});
  ScalarField gt2 = row_depth({4.0, 4.0});
  DepthMetrics m2 = depth_metrics(tiny, gt2, 80.0, false);
  CHECK(std::isfinite(m2.rmse_log));  // floor keeps the log finite
  CHECK(m2.rmse_log == doctest::Approx(std::log(4.0 / 1e-3) / std::sqrt(2.0))
                           .epsilon(1e-12));
}

TEST_CASE("depth metrics validate their inputs") {
  ScalarField a(2, 2, 1.0), b(3, 2, 1.0);
  CHECK_THROWS_AS(depth_metrics(a, b, 80.0, false), std::invalid_argument);
  CHECK_THROWS_AS(depth_metrics(a, a, 1e-4, false), std::invalid_argument);

  ScalarField zero_gt(2, 2, 0.0);
  CHECK_THROWS_AS(depth_metrics(a, zero_gt, 80.0, false),
                  std::invalid_argument);

  ScalarField inval(2, 2, 1.0);
  for (int v = 0; v < 2; ++v)
    for (int u = 0; u < 2; ++u) inval.set_valid(u, v, false);
  CHECK_THROWS_AS(depth_metrics(inval, a, 80.0, false), std::invalid_argument);
}

TEST_CASE("invalid pixels are excluded from depth metrics") {
  ScalarField pred = row_depth({1, 9});
  ScalarField gt = row_depth({2, 2});
  pred.set_valid(1, 0, false);
  DepthMetrics m = depth_metrics(pred, gt, 80.0, false);
  CHECK(m.abs_rel == 0.5);  // only the first pixel counts
}

TEST_CASE("identical normals score zero angle and full fractions") {
  NormalMap n = tilted_normals(3, 2, 20.0);
  NormalMetrics m = normal_metrics(n, n);
  CHECK(m.mean_deg == 0.0);
  CHECK(m.median_deg == 0.0);
  CHECK(m.pct_11_25 == 1.0);
  CHECK(m.pct_22_5 == 1.0);
  CHECK(m.pct_30 == 1.0);
}

TEST_CASE("opposite normals score 180 degrees") {
  NormalMap a = tilted_normals(2, 2, 0.0);
  NormalMap b = tilted_normals(2, 2, 0.0);
  for (int v = 0; v < 2; ++v)
    for (int u = 0; u < 2; ++u)
      for (int c = 0; c < 3; ++c) b.n.at(u, v, c) = -a.n.at(u, v, c);
  NormalMetrics m = normal_metrics(a, b);
  CHECK(m.mean_deg == doctest::Approx(180.0).epsilon(1e-12));
  CHECK(m.pct_11_25 == 0.0);
  CHECK(m.pct_22_5 == 0.0);
  CHECK(m.pct_30 == 0.0);
}

TEST_CASE("half 10 degrees, half 25 degrees: midpoint median") {
  NormalMap gt = tilted_normals(2, 1, 0.0);
  NormalMap pred = tilted_normals(2, 1, 0.0);
  NormalMap t10 = tilted_normals(1, 1, 10.0);
  NormalMap t25 = tilted_normals(1, 1, 25.0);
  for (int c = 0; c < 3; ++c) {
    pred.n.at(0, 0, c) = t10.n.at(0, 0, c);
    pred.n.at(1, 0, c) = t25.n.at(0, 0, c);
  }
  NormalMetrics m = normal_metrics(pred, gt);
  CHECK(m.mean_deg == doctest::Approx(17.5).epsilon(1e-12));
  CHECK(m.median_deg == doctest::Approx(17.5).epsilon(1e-12));
  CHECK(m.pct_11_25 == 0.5);
  CHECK(m.pct_22_5 == 0.5);
  CHECK(m.pct_30 == 1.0);
}

TEST_CASE("normal metrics are symmetric and reject bad inputs") {
  NormalMap a = tilted_normals(3, 3, 12.0);
  NormalMap b = tilted_normals(3, 3, 31.0);
  NormalMetrics ab = normal_metrics(a, b);
  NormalMetrics ba = normal_metrics(b, a);
  CHECK(ab.mean_deg == ba.mean_deg);
  CHECK(ab.pct_30 == ba.pct_30);
  CHECK(ab.pct_11_25 <= ab.pct_22_5);
  CHECK(ab.pct_22_5 <= ab.pct_30);

  NormalMap bad = tilted_normals(3, 3, 0.0);
  bad.n.at(1, 1, 2) = -1.5;
  CHECK_THROWS_AS(normal_metrics(bad, a), std::invalid_argument);

  NormalMap c = tilted_normals(2, 2, 0.0);
  CHECK_THROWS_AS(normal_metrics(a, c), std::invalid_argument);  // shape
}

TEST_CASE("normal metrics skip pixels invalid in either map") {
  NormalMap a = tilted_normals(2, 1, 0.0);
  NormalMap b = tilted_normals(2, 1, 0.0);
  for (int c = 0; c < 3; ++c) b.n.at(1, 0, c) = -b.n.at(1, 0, c);
  b.n.set_valid(1, 0, false);
  NormalMetrics m = normal_metrics(a, b);
  CHECK(m.mean_deg == 0.0);  // the flipped pixel was skipped
}

TEST_CASE("gt normals from depth recover analytic plane normals") {
  SceneSpec spec = scene_preset("fronto", 20, 12);
  RenderedSequence seq = make_sequence(spec);
  NormalMap n = gt_normals_from_depth(seq.depth_gt, seq.data.K);
  for (int v = 0; v < 12; ++v)
    for (int u = 0; u < 20; ++u) {
      CHECK(n.at(u, v).x() == 0.0);
      CHECK(n.at(u, v).z() == -1.0);
    }

  SceneSpec sl = scene_preset("slanted", 20, 12);
  RenderedSequence sseq = make_sequence(sl);
  NormalMap sn = gt_normals_from_depth(sseq.depth_gt, sseq.data.K);
  NormalMetrics m = normal_metrics(sn, sseq.normal_gt);
  CHECK(m.mean_deg < 0.1);
}

TEST_CASE("invalid depth pixels yield invalid reference normals") {
  SceneSpec spec = scene_preset("fronto", 11, 9);
  RenderedSequence seq = make_sequence(spec);
  seq.depth_gt.set_valid(5, 4, false);
  NormalMap n = gt_normals_from_depth(seq.depth_gt, seq.data.K);
  CHECK_FALSE(n.n.valid_at(5, 4));
  CHECK(n.n.valid_at(8, 4));
}

TEST_CASE("gt-mean baseline reproduces a constant field exactly") {
  NormalMap gt = tilted_normals(5, 4, 25.0);
  NormalMap base = baseline_normals(BaselineKind::kGtMean, gt, 5, 4);
  for (size_t i = 0; i < gt.n.size(); ++i)
    CHECK(base.n.data()[i] == doctest::Approx(gt.n.data()[i]).epsilon(1e-12));
  NormalMetrics m = normal_metrics(base, gt);
  CHECK(m.mean_deg < 1e-6);
}

TEST_CASE("gt-mean baseline of cancelling normals falls back flagged") {
  NormalMap gt;
  gt.n = VectorField(2, 1, 3);
  gt.degenerate.assign(2, 0);
  gt.n.at(0, 0, 0) = 1.0;   // +x
  gt.n.at(1, 0, 0) = -1.0;  // -x
  NormalMap base = baseline_normals(BaselineKind::kGtMean, gt, 2, 1);
  for (int u = 0; u < 2; ++u) {
    CHECK(base.n.at(u, 0, 0) == 0.0);
    CHECK(base.n.at(u, 0, 2) == -1.0);
    CHECK(base.degenerate[base.n.pix(u, 0)] == 1);
  }
}

TEST_CASE("predefined-scene baseline splits the frame into four wedges") {
  NormalMap gt = tilted_normals(8, 8, 0.0);  // only sizes matter
  NormalMap base = baseline_normals(BaselineKind::kPredefinedScene, gt, 8, 8);
  // Bottom wedge: up-directed.
  CHECK(base.at(4, 7) == Vec3(0, -1, 0));
  // Top wedge: camera-facing.
  CHECK(base.at(4, 0) == Vec3(0, 0, -1));
  // Left wedge: right-directed.
  CHECK(base.at(0, 4) == Vec3(1, 0, 0));
  // Right wedge: left-directed.
  CHECK(base.at(7, 4) == Vec3(-1, 0, 0));
  // Self-consistency: zero error against itself.
  NormalMetrics m = normal_metrics(base, base);
  CHECK(m.mean_deg == 0.0);
  CHECK(m.pct_11_25 == 1.0);
}
