#include <doctest.h>

#include <json.hpp>
#include <stdexcept>
#include <string>

#include "test_support.hpp"
#include "warpgeo/serialize.hpp"

using namespace warpgeo;
using nlohmann::json;

TEST_CASE("scene spec survives a JSON round trip bit-exactly") {
  SceneSpec spec = scene_preset("two_plane_edge", 20, 10);
  spec.noise_sigma = 0.034567891234567;
  spec.seed = 987654321;
  spec.cam_to_world_sources[0].t = Vec3(0.1234567890123456, -2.5, 3.75);

  SceneSpec back = scene_from_json(to_json(spec));
  CHECK(back.name == spec.name);
  CHECK(back.seed == spec.seed);
  CHECK(back.noise_sigma == spec.noise_sigma);
  CHECK(back.camera.fx == spec.camera.fx);
  CHECK(back.camera.width == spec.camera.width);
  REQUIRE(back.planes.size() == spec.planes.size());
  for (size_t i = 0; i < spec.planes.size(); ++i) {
    CHECK(back.planes[i].normal == spec.planes[i].normal);
    CHECK(back.planes[i].offset == spec.planes[i].offset);
    CHECK(back.planes[i].texture == spec.planes[i].texture);
    CHECK(back.planes[i].tex_bias == spec.planes[i].tex_bias);
    CHECK(back.planes[i].slab_axis == spec.planes[i].slab_axis);
    CHECK(back.planes[i].slab_lo == spec.planes[i].slab_lo);
    CHECK(back.planes[i].slab_hi == spec.planes[i].slab_hi);
  }
  REQUIRE(back.cam_to_world_sources.size() == 2);
  CHECK((back.cam_to_world_sources[0].t - spec.cam_to_world_sources[0].t)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((back.cam_to_world_sources[0].R - spec.cam_to_world_sources[0].R)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("poses serialize as row-major 3x4") {
  SceneSpec spec = scene_preset("fronto", 8, 4);
  Twist xi;
  xi << 0.3, -0.2, 0.1, 1.0, 2.0, 3.0;
  spec.cam_to_world_target = se3_exp(xi);
  json j = json::parse(to_json(spec));
  const json& a = j.at("pose_target");
  REQUIRE(a.size() == 12);
  const PoseSE3& T = spec.cam_to_world_target;
  CHECK(a[0].get<double>() == T.R(0, 0));
  CHECK(a[1].get<double>() == T.R(0, 1));
  CHECK(a[3].get<double>() == T.t(0));
  CHECK(a[4].get<double>() == T.R(1, 0));
  CHECK(a[7].get<double>() == T.t(1));
  CHECK(a[11].get<double>() == T.t(2));
}

TEST_CASE("optim config partial document overrides only named keys") {
  OptimConfig cfg = optim_config_from_json(
      R"({"lr": 0.01, "objective": {"weights": {"lambda_g": 0.0}}})");
  OptimConfig defaults;
  CHECK(cfg.lr == 0.01);
  CHECK(cfg.beta1 == defaults.beta1);
  CHECK(cfg.max_steps == defaults.max_steps);
  CHECK(cfg.objective.scales == defaults.objective.scales);
  CHECK(cfg.objective.weights.lambda_g == 0.0);
  CHECK(cfg.objective.weights.lambda_s == defaults.objective.weights.lambda_s);
  CHECK(cfg.init == defaults.init);
}

TEST_CASE("optim config full round trip") {
  OptimConfig cfg;
  cfg.lr = 0.0012345678901234;
  cfg.max_steps = 777;
  cfg.stage_split = 0.65;
  cfg.freeze_poses = true;
  cfg.init = InitStrategy::kPerturbed;
  cfg.init_scale = 1.75;
  cfg.seed = 42;
  cfg.objective.scales = 3;
  cfg.objective.no_edge_dn = true;
  cfg.objective.weights.lambda_n = 0.25;
  cfg.objective.weights.alpha_smooth = 0.05;

  OptimConfig back = optim_config_from_json(to_json(cfg));
  CHECK(back.lr == cfg.lr);
  CHECK(back.max_steps == cfg.max_steps);
  CHECK(back.stage_split == cfg.stage_split);
  CHECK(back.freeze_poses == cfg.freeze_poses);
  CHECK(back.init == cfg.init);
  CHECK(back.init_scale == cfg.init_scale);
  CHECK(back.seed == cfg.seed);
  CHECK(back.objective.scales == cfg.objective.scales);
  CHECK(back.objective.no_edge_dn == cfg.objective.no_edge_dn);
  CHECK(back.objective.no_dn == cfg.objective.no_dn);
  CHECK(back.objective.weights.lambda_n == cfg.objective.weights.lambda_n);
  CHECK(back.objective.weights.alpha_smooth ==
        cfg.objective.weights.alpha_smooth);
}

TEST_CASE("malformed documents throw invalid_argument") {
  CHECK_THROWS_AS(scene_from_json("{ not json"), std::invalid_argument);
  CHECK_THROWS_AS(optim_config_from_json("[1,2"), std::invalid_argument);
  CHECK_THROWS_AS(scene_from_json(R"({"planes": [{"texture": "plaid"}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(optim_config_from_json(R"({"init": "psychic"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      scene_from_json(R"({"pose_target": [1,2,3]})"),
      std::invalid_argument);  // poses must carry all 12 numbers
}

TEST_CASE("metric JSON carries every evaluation field") {
  DepthMetrics dm;
  dm.abs_rel = 0.125;
  dm.sq_rel = 0.0625;
  dm.rmse = 1.5;
  dm.rmse_log = 0.25;
  dm.delta_1 = 0.75;
  dm.delta_2 = 0.875;
  dm.delta_3 = 1.0;
  json j = json::parse(to_json(dm));
  CHECK(j.at("abs_rel").get<double>() == 0.125);
  CHECK(j.at("sq_rel").get<double>() == 0.0625);
  CHECK(j.at("rmse").get<double>() == 1.5);
  CHECK(j.at("rmse_log").get<double>() == 0.25);
  CHECK(j.at("delta_1").get<double>() == 0.75);
  CHECK(j.at("delta_2").get<double>() == 0.875);
  CHECK(j.at("delta_3").get<double>() == 1.0);

  NormalMetrics nm;
  nm.mean_deg = 17.5;
  nm.median_deg = 17.5;
  nm.pct_11_25 = 0.5;
  nm.pct_22_5 = 0.5;
  nm.pct_30 = 1.0;
  json jn = json::parse(to_json(nm));
  CHECK(jn.at("mean_deg").get<double>() == 17.5);
  CHECK(jn.at("pct_30").get<double>() == 1.0);
}

TEST_CASE("csv rows follow the evaluation-table column order") {
  DepthMetrics dm;
  CHECK(csv_header(dm) == "abs_rel,sq_rel,rmse,rmse_log,delta_1,delta_2,delta_3");
  dm.abs_rel = 0.5;
  dm.sq_rel = 0.25;
  dm.rmse = 2.0;
  dm.rmse_log = 0.0;
  dm.delta_1 = 1.0;
  dm.delta_2 = 1.0;
  dm.delta_3 = 1.0;
  CHECK(csv_row(dm) == "0.5,0.25,2,0,1,1,1");

  NormalMetrics nm;
  CHECK(csv_header(nm) == "mean_deg,median_deg,pct_11_25,pct_22_5,pct_30");
  nm.mean_deg = 12.5;
  nm.median_deg = 10.0;
  nm.pct_11_25 = 0.25;
  nm.pct_22_5 = 0.75;
  nm.pct_30 = 1.0;
  CHECK(csv_row(nm) == "12.5,10,0.25,0.75,1");
}

TEST_CASE("trace csv prints %.17g values under a fixed header") {
  std::vector<TraceRow> rows(2);
  rows[0] = TraceRow{0, 1, 0.5, 0.25, 0.0, 0.0, 2.0, 0.0};
  rows[1] = TraceRow{1, 2, 1.0 / 3.0, 0.0, 0.125, 0.0, 0.0, 0.0};
  std::string csv = trace_csv(rows);
  CHECK(csv ==
        "step,stage,total,vs,smooth_depth,smooth_normal,mask,grad\n"
        "0,1,0.5,0.25,0,0,2,0\n"
        "1,2,0.33333333333333331,0,0.125,0,0,0\n");
}

TEST_CASE("sequence bundle round trips through disk") {
  const std::string dir = testsup::make_temp_dir("seq_bundle");
  SceneSpec spec = scene_preset("slanted", 10, 6);
  RenderedSequence seq = make_sequence(spec);
  save_sequence(dir, seq, spec);

  for (const char* name :
       {"manifest.json", "target.pfm", "target.png", "source_0.pfm",
        "source_1.pfm", "depth_gt.pfm", "depth_gt.png", "normals_gt.pfm",
        "normals_gt.png"})
    CHECK(testsup::file_exists(dir + "/" + std::string(name)));

  RenderedSequence back = load_sequence(dir);
  CHECK(back.data.K.fx == seq.data.K.fx);
  CHECK(back.data.K.width == 10);
  REQUIRE(back.data.sources.size() == 2);
  REQUIRE(back.poses_gt.size() == 2);
  // Poses travel as JSON doubles: exact. Maps travel as float32 PFM.
  for (size_t s = 0; s < 2; ++s) {
    CHECK((back.poses_gt[s].R - seq.poses_gt[s].R).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((back.poses_gt[s].t - seq.poses_gt[s].t).cwiseAbs().maxCoeff() ==
          0.0);
  }
  for (int v = 0; v < 6; ++v)
    for (int u = 0; u < 10; ++u) {
      for (int c = 0; c < 3; ++c) {
        CHECK(back.data.target.at(u, v, c) ==
              double(float(seq.data.target.at(u, v, c))));
        CHECK(back.normal_gt.n.at(u, v, c) ==
              double(float(seq.normal_gt.n.at(u, v, c))));
      }
      CHECK(back.depth_gt.at(u, v) == double(float(seq.depth_gt.at(u, v))));
    }
}

TEST_CASE("loading a bundle without a manifest fails loudly") {
  const std::string dir = testsup::make_temp_dir("seq_missing");
  CHECK_THROWS_AS(load_sequence(dir), std::runtime_error);
}
