#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "warpgeo/gradcheck_suite.hpp"
#include "warpgeo/metrics.hpp"
#include "warpgeo/optimizer.hpp"
#include "warpgeo/pfm.hpp"
#include "warpgeo/png_io.hpp"
#include "warpgeo/scene.hpp"
#include "warpgeo/serialize.hpp"

namespace warpgeo::cli {
namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitGradcheck = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

// Everything a run depends on; serialized in full (defaults included) as
// resolved_config.json so any run can be replayed bit-exactly.
struct RunConfig {
  std::string scene = "slanted";  // preset name or scene-spec JSON path
  std::string scene_spec_json;    // spec actually used, wins over `scene`
  std::string data_dir;           // pre-rendered bundle, wins over both
  int width = 416, height = 128;
  double noise_sigma = 0.0;
  OptimConfig optim;
  double cap = 80.0;
  bool scale_correct = false;
  double fx = 0.0, fy = 0.0, cx = -1.0, cy = -1.0;  // layers intrinsics
  std::string pred, gt, pred_normals, gt_normals;   // eval inputs
  std::string depth_in, image_in;                   // layers inputs
  std::string out_dir = "out";
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

json rc_to_json(const RunConfig& rc, const std::string& sub) {
  json j{{"subcommand", sub},
         {"scene", rc.scene},
         {"data_dir", rc.data_dir},
         {"width", rc.width},
         {"height", rc.height},
         {"noise_sigma", rc.noise_sigma},
         {"optim", json::parse(to_json(rc.optim))},
         {"cap", rc.cap},
         {"scale_correct", rc.scale_correct},
         {"fx", rc.fx},
         {"fy", rc.fy},
         {"cx", rc.cx},
         {"cy", rc.cy},
         {"pred", rc.pred},
         {"gt", rc.gt},
         {"pred_normals", rc.pred_normals},
         {"gt_normals", rc.gt_normals},
         {"depth_in", rc.depth_in},
         {"image_in", rc.image_in},
         {"out", rc.out_dir}};
  if (!rc.scene_spec_json.empty())
    j["scene_spec"] = json::parse(rc.scene_spec_json);
  return j;
}

RunConfig rc_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw std::invalid_argument("config: malformed JSON");
  RunConfig rc;
  try {
    rc.scene = j.value("scene", rc.scene);
    if (j.contains("scene_spec")) rc.scene_spec_json = j.at("scene_spec").dump();
    rc.data_dir = j.value("data_dir", rc.data_dir);
    rc.width = j.value("width", rc.width);
    rc.height = j.value("height", rc.height);
    rc.noise_sigma = j.value("noise_sigma", rc.noise_sigma);
    if (j.contains("optim"))
      rc.optim = optim_config_from_json(j.at("optim").dump());
    rc.cap = j.value("cap", rc.cap);
    rc.scale_correct = j.value("scale_correct", rc.scale_correct);
    rc.fx = j.value("fx", rc.fx);
    rc.fy = j.value("fy", rc.fy);
    rc.cx = j.value("cx", rc.cx);
    rc.cy = j.value("cy", rc.cy);
    rc.pred = j.value("pred", rc.pred);
    rc.gt = j.value("gt", rc.gt);
    rc.pred_normals = j.value("pred_normals", rc.pred_normals);
    rc.gt_normals = j.value("gt_normals", rc.gt_normals);
    rc.depth_in = j.value("depth_in", rc.depth_in);
    rc.image_in = j.value("image_in", rc.image_in);
    rc.out_dir = j.value("out", rc.out_dir);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return rc;
}

void write_resolved_config(const RunConfig& rc, const std::string& sub) {
  std::filesystem::create_directories(rc.out_dir);
  write_text_file(rc.out_dir + "/resolved_config.json",
                  rc_to_json(rc, sub).dump(2) + "\n");
}

bool is_preset(const std::string& name) {
  return name == "fronto" || name == "slanted" || name == "two_plane_edge" ||
         name == "lowtex";
}

// Builds the sequence and pins the spec that was actually used into
// rc.scene_spec_json (so the resolved config replays the exact scene).
RenderedSequence make_seq(RunConfig& rc) {
  if (!rc.data_dir.empty()) {
    rc.scene_spec_json.clear();
    return load_sequence(rc.data_dir);
  }
  SceneSpec spec;
  if (!rc.scene_spec_json.empty()) {
    spec = scene_from_json(rc.scene_spec_json);
  } else if (is_preset(rc.scene)) {
    spec = scene_preset(rc.scene, rc.width, rc.height);
    spec.noise_sigma = rc.noise_sigma;
    spec.seed = rc.optim.seed;
  } else if (std::filesystem::exists(rc.scene)) {
    spec = scene_from_json(read_text_file(rc.scene));
  } else {
    throw std::invalid_argument("scene: '" + rc.scene +
                                "' is neither a preset nor a file");
  }
  rc.scene_spec_json = to_json(spec);
  return make_sequence(spec);
}

json pose12(const PoseSE3& T) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(T.R(r, c));
    a.push_back(T.t(r));
  }
  return a;
}

NormalMap normal_map_from_pfm(const std::string& path) {
  NormalMap m;
  m.n = read_pfm(path);
  if (m.n.channels() != 3)
    throw std::invalid_argument("normals PFM must have 3 channels: " + path);
  m.degenerate.assign(m.n.pixels(), 0);
  return m;
}

void save_optimize_outputs(const std::string& dir, const OptimResult& res) {
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/trace.csv", trace_csv(res.trace));
  write_pfm(dir + "/depth.pfm", res.depth);
  write_depth_png(dir + "/depth.png", res.depth);
  write_pfm(dir + "/depth_refined.pfm", res.depth_refined);
  write_depth_png(dir + "/depth_refined.png", res.depth_refined);
  write_pfm(dir + "/normals.pfm", res.normals.n);
  write_normal_png(dir + "/normals.png", res.normals.n);
  for (size_t s = 0; s < res.masks.size(); ++s) {
    write_pfm(dir + "/mask_" + std::to_string(s) + ".pfm", res.masks[s]);
    write_depth_png(dir + "/mask_" + std::to_string(s) + ".png", res.masks[s],
                    0.0, 1.0);
  }
}

json summarize(const OptimResult& res, const RenderedSequence& seq,
               const RunConfig& rc) {
  json poses{{"recovered", json::array()}, {"ground_truth", json::array()}};
  for (const PoseSE3& T : res.poses) poses["recovered"].push_back(pose12(T));
  for (const PoseSE3& T : seq.poses_gt)
    poses["ground_truth"].push_back(pose12(T));

  json j{{"aborted", res.aborted},
         {"abort_reason", res.abort_reason},
         {"steps", res.state.step},
         {"poses", poses}};
  if (!res.trace.empty()) {
    const TraceRow& r = res.trace.back();
    j["final"] = {{"total", r.total},       {"vs", r.vs},
                  {"smooth_depth", r.smooth_depth},
                  {"smooth_normal", r.smooth_normal},
                  {"mask", r.mask},         {"grad", r.grad}};
  }
  if (!res.aborted) {
    j["depth_metrics"] = json::parse(to_json(
        depth_metrics(res.depth_refined, seq.depth_gt, rc.cap,
                      rc.scale_correct)));
    j["normal_metrics"] =
        json::parse(to_json(normal_metrics(res.normals, seq.normal_gt)));
  }
  return j;
}

int run_gen_scene(RunConfig& rc) {
  if (!rc.data_dir.empty())
    throw std::invalid_argument("gen-scene renders from a spec, not --data");
  RenderedSequence seq = make_seq(rc);
  SceneSpec spec = scene_from_json(rc.scene_spec_json);
  save_sequence(rc.out_dir, seq, spec);
  write_resolved_config(rc, "gen-scene");
  std::printf("wrote %zu-frame sequence (%dx%d) to %s\n",
              seq.data.sources.size() + 1, seq.data.K.width,
              seq.data.K.height, rc.out_dir.c_str());
  return kExitOk;
}

int run_optimize(RunConfig& rc) {
  RenderedSequence seq = make_seq(rc);
  OptimResult res = optimize(seq, rc.optim);
  save_optimize_outputs(rc.out_dir, res);
  write_text_file(rc.out_dir + "/summary.json",
                  summarize(res, seq, rc).dump(2) + "\n");
  write_resolved_config(rc, "optimize");
  if (res.aborted) {
    std::fprintf(stderr, "numeric failure: %s\n", res.abort_reason.c_str());
    return kExitNumeric;
  }
  const TraceRow& last = res.trace.back();
  std::printf("%lld steps, final total %.6g (vs %.6g) -> %s\n",
              res.state.step, last.total, last.vs, rc.out_dir.c_str());
  return kExitOk;
}

int run_eval(const RunConfig& rc) {
  if (rc.pred.empty() || rc.gt.empty())
    throw std::invalid_argument("eval: --pred and --gt are required");
  const ScalarField pred = read_pfm_scalar(rc.pred);
  const ScalarField gtd = read_pfm_scalar(rc.gt);
  const DepthMetrics dm = depth_metrics(pred, gtd, rc.cap, rc.scale_correct);

  json out = json::parse(to_json(dm));
  std::string csv = csv_header(dm) + "\n" + csv_row(dm) + "\n";
  if (!rc.pred_normals.empty() || !rc.gt_normals.empty()) {
    if (rc.pred_normals.empty() || rc.gt_normals.empty())
      throw std::invalid_argument(
          "eval: --pred-normals and --gt-normals go together");
    const NormalMetrics nm =
        normal_metrics(normal_map_from_pfm(rc.pred_normals),
                       normal_map_from_pfm(rc.gt_normals));
    out["normals"] = json::parse(to_json(nm));
    csv += csv_header(nm) + "\n" + csv_row(nm) + "\n";
  }
  std::filesystem::create_directories(rc.out_dir);
  write_text_file(rc.out_dir + "/metrics.json", out.dump(2) + "\n");
  write_text_file(rc.out_dir + "/metrics.csv", csv);
  write_resolved_config(rc, "eval");
  std::fputs(csv.c_str(), stdout);
  return kExitOk;
}

int run_layers(const RunConfig& rc) {
  if (rc.depth_in.empty())
    throw std::invalid_argument("layers: --depth is required");
  const ScalarField D = read_pfm_scalar(rc.depth_in);
  CameraIntrinsics K{rc.fx, rc.fy, rc.cx, rc.cy, D.width(), D.height()};
  if (rc.fx <= 0.0)  // default pinhole: f = width, principal point centred
    K = CameraIntrinsics{double(D.width()), double(D.width()),
                         (D.width() - 1) / 2.0, (D.height() - 1) / 2.0,
                         D.width(), D.height()};
  K.validate();

  EdgeWeights W = EdgeWeights::uniform(D.width(), D.height());
  if (!rc.image_in.empty()) {
    const Image img = read_pfm(rc.image_in);
    if (img.width() != D.width() || img.height() != D.height())
      throw std::invalid_argument("layers: image and depth sizes differ");
    W = edge_weights(grayscale(img), rc.optim.objective.alpha_dn);
  }

  const NormalMap N = depth_to_normal(D, K, W);
  const ScalarField Dn = normal_to_depth(D, N, K, W);
  for (size_t i = 0; i < Dn.size(); ++i)
    if (!std::isfinite(Dn.data()[i]) || !std::isfinite(N.n.data()[3 * i]) ||
        !std::isfinite(N.n.data()[3 * i + 1]) ||
        !std::isfinite(N.n.data()[3 * i + 2])) {
      std::fprintf(stderr, "numeric failure: non-finite layer output\n");
      return kExitNumeric;
    }

  std::filesystem::create_directories(rc.out_dir);
  write_pfm(rc.out_dir + "/normals.pfm", N.n);
  write_normal_png(rc.out_dir + "/normals.png", N.n);
  write_pfm(rc.out_dir + "/depth_refined.pfm", Dn);
  write_depth_png(rc.out_dir + "/depth_refined.png", Dn);
  write_resolved_config(rc, "layers");

  double mad = 0.0;
  for (size_t i = 0; i < Dn.size(); ++i)
    mad += std::abs(Dn.data()[i] - D.data()[i]);
  std::printf("round-trip mean |D_n - D| = %.6g -> %s\n",
              mad / double(Dn.size()), rc.out_dir.c_str());
  return kExitOk;
}

int run_gradcheck(const RunConfig& rc) {
  const SuiteResult res = run_gradcheck_suite(rc.optim.seed);
  const std::string table = res.table();
  std::fputs(table.c_str(), stdout);
  std::filesystem::create_directories(rc.out_dir);
  write_text_file(rc.out_dir + "/gradcheck.txt", table);
  write_resolved_config(rc, "gradcheck");
  return res.pass ? kExitOk : kExitGradcheck;
}

struct Ablation {
  const char* label;
  const char* slug;
  void (*apply)(ObjectiveOptions&);
};

constexpr Ablation kAblations[4] = {
    {"no d-n", "no_dn", [](ObjectiveOptions& o) { o.no_dn = true; }},
    {"smooth no gradient", "smooth_no_gradient",
     [](ObjectiveOptions& o) { o.no_edge_smooth = true; }},
    {"no img grad for d-n", "no_img_grad_for_dn",
     [](ObjectiveOptions& o) { o.no_edge_dn = true; }},
    {"no normal smooth", "no_normal_smooth",
     [](ObjectiveOptions& o) { o.no_normal_smooth = true; }},
};

int run_ablate(RunConfig& rc) {
  RenderedSequence seq = make_seq(rc);

  struct Row {
    DepthMetrics dm;
    NormalMetrics nm;
    bool aborted = false;
  };
  std::vector<std::future<Row>> futures;
  for (const Ablation& ab : kAblations) {
    OptimConfig cfg = rc.optim;
    ab.apply(cfg.objective);
    const std::string dir = rc.out_dir + "/" + ab.slug;
    futures.push_back(std::async(std::launch::async, [cfg, dir, &seq, &rc]() {
      OptimResult res = optimize(seq, cfg);
      save_optimize_outputs(dir, res);
      write_text_file(dir + "/optim.json", to_json(cfg));
      Row row;
      row.aborted = res.aborted;
      if (!res.aborted) {
        row.dm = depth_metrics(res.depth_refined, seq.depth_gt, rc.cap,
                               rc.scale_correct);
        row.nm = normal_metrics(res.normals, seq.normal_gt);
      }
      return row;
    }));
  }

  bool any_aborted = false;
  std::string csv = "label," + csv_header(DepthMetrics{}) + "," +
                    csv_header(NormalMetrics{}) + "\n";
  for (size_t i = 0; i < futures.size(); ++i) {
    const Row row = futures[i].get();
    any_aborted = any_aborted || row.aborted;
    csv += std::string(kAblations[i].label) + "," + csv_row(row.dm) + "," +
           csv_row(row.nm) + "\n";
  }
  std::filesystem::create_directories(rc.out_dir);
  write_text_file(rc.out_dir + "/ablation.csv", csv);
  write_resolved_config(rc, "ablate");
  std::fputs(csv.c_str(), stdout);
  if (any_aborted) {
    std::fprintf(stderr, "numeric failure in at least one configuration\n");
    return kExitNumeric;
  }
  return kExitOk;
}

InitStrategy init_from_flag(const std::string& s) {
  if (s == "constant") return InitStrategy::kConstant;
  if (s == "ground_truth") return InitStrategy::kGroundTruth;
  if (s == "perturbed") return InitStrategy::kPerturbed;
  throw std::invalid_argument("unknown init strategy '" + s + "'");
}

}  // namespace

int run(int argc, const char* const* argv) {
  // --config loads first so explicit flags override file values on the
  // real parse below.
  RunConfig rc;
  try {
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a == "--config" && i + 1 < argc)
        rc = rc_from_json(read_text_file(argv[i + 1]));
      else if (a.rfind("--config=", 0) == 0)
        rc = rc_from_json(read_text_file(a.substr(9)));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  CLI::App app{"differentiable multi-view depth/normal toolkit"};
  app.require_subcommand(1);
  std::string config_path;  // consumed above; declared so it parses
  std::string init_str;

  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--config", config_path, "resolved-config JSON to replay");
    sc->add_option("--out", rc.out_dir, "output directory");
    sc->add_option("--seed", rc.optim.seed, "RNG seed");
  };
  auto add_scene = [&](CLI::App* sc) {
    sc->add_option("--scene", rc.scene, "scene preset name or spec JSON path")
        ->each([&rc](const std::string&) { rc.scene_spec_json.clear(); });
    sc->add_option("--width", rc.width)->each([&rc](const std::string&) {
      rc.scene_spec_json.clear();
    });
    sc->add_option("--height", rc.height)->each([&rc](const std::string&) {
      rc.scene_spec_json.clear();
    });
    sc->add_option("--noise", rc.noise_sigma, "image noise sigma")
        ->each([&rc](const std::string&) { rc.scene_spec_json.clear(); });
  };
  auto add_objective = [&](CLI::App* sc) {
    sc->add_option("--scales", rc.optim.objective.scales, "pyramid levels");
    sc->add_option_function<double>(
        "--alpha",
        [&rc](const double& a) {
          rc.optim.objective.alpha_dn = a;
          rc.optim.objective.weights.alpha_smooth = a;
        },
        "edge weight alpha (smoothness and consistency)");
    sc->add_option("--lambda-s", rc.optim.objective.weights.lambda_s);
    sc->add_option("--lambda-m", rc.optim.objective.weights.lambda_m);
    sc->add_option("--lambda-g", rc.optim.objective.weights.lambda_g);
    sc->add_option("--lambda-n", rc.optim.objective.weights.lambda_n);
    sc->add_flag("--no-dn", rc.optim.objective.no_dn,
                 "bypass the consistency layers");
    sc->add_flag("--no-edge-smooth", rc.optim.objective.no_edge_smooth);
    sc->add_flag("--no-edge-dn", rc.optim.objective.no_edge_dn);
    sc->add_flag("--no-normal-smooth", rc.optim.objective.no_normal_smooth);
  };
  auto add_optim = [&](CLI::App* sc) {
    sc->add_option("--data", rc.data_dir, "pre-rendered sequence directory");
    sc->add_option("--steps", rc.optim.max_steps);
    sc->add_option("--lr", rc.optim.lr);
    sc->add_option("--stage-split", rc.optim.stage_split);
    sc->add_option("--init", init_str)
        ->check(CLI::IsMember({"constant", "ground_truth", "perturbed"}));
    sc->add_option("--init-depth", rc.optim.init_depth);
    sc->add_option("--init-scale", rc.optim.init_scale);
    sc->add_flag("--freeze-poses", rc.optim.freeze_poses);
  };

  CLI::App* sc_gen = app.add_subcommand("gen-scene", "render a synthetic sequence");
  add_common(sc_gen);
  add_scene(sc_gen);

  CLI::App* sc_opt = app.add_subcommand("optimize", "recover depth/pose/masks");
  add_common(sc_opt);
  add_scene(sc_opt);
  add_objective(sc_opt);
  add_optim(sc_opt);

  CLI::App* sc_eval = app.add_subcommand("eval", "depth/normal metrics");
  add_common(sc_eval);
  sc_eval->add_option("--pred", rc.pred, "predicted depth PFM");
  sc_eval->add_option("--gt", rc.gt, "ground-truth depth PFM");
  sc_eval->add_option("--pred-normals", rc.pred_normals);
  sc_eval->add_option("--gt-normals", rc.gt_normals);
  sc_eval->add_option("--cap", rc.cap, "depth cap");
  sc_eval->add_flag("--scale-correct", rc.scale_correct, "median scaling");

  CLI::App* sc_layers = app.add_subcommand(
      "layers", "apply the consistency layers to PFM inputs");
  add_common(sc_layers);
  sc_layers->add_option("--depth", rc.depth_in, "input depth PFM");
  sc_layers->add_option("--image", rc.image_in, "image PFM for edge weights");
  sc_layers->add_option_function<double>(
      "--alpha",
      [&rc](const double& a) { rc.optim.objective.alpha_dn = a; },
      "edge weight alpha");
  sc_layers->add_option("--fx", rc.fx);
  sc_layers->add_option("--fy", rc.fy);
  sc_layers->add_option("--cx", rc.cx);
  sc_layers->add_option("--cy", rc.cy);

  CLI::App* sc_grad =
      app.add_subcommand("gradcheck", "verify analytic gradients");
  add_common(sc_grad);

  CLI::App* sc_abl =
      app.add_subcommand("ablate", "run the four ablation configurations");
  add_common(sc_abl);
  add_scene(sc_abl);
  add_objective(sc_abl);
  add_optim(sc_abl);
  sc_abl->add_flag("--scale-correct", rc.scale_correct, "median scaling");
  sc_abl->add_option("--cap", rc.cap, "depth cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (!init_str.empty()) rc.optim.init = init_from_flag(init_str);
    if (app.got_subcommand(sc_gen)) return run_gen_scene(rc);
    if (app.got_subcommand(sc_opt)) return run_optimize(rc);
    if (app.got_subcommand(sc_eval)) return run_eval(rc);
    if (app.got_subcommand(sc_layers)) return run_layers(rc);
    if (app.got_subcommand(sc_grad)) return run_gradcheck(rc);
    if (app.got_subcommand(sc_abl)) return run_ablate(rc);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace warpgeo::cli
