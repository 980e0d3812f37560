#include "warpgeo/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "warpgeo/pfm.hpp"
#include "warpgeo/png_io.hpp"

namespace warpgeo {
namespace {

using nlohmann::json;

json pose_to_json(const PoseSE3& T) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(T.R(r, c));
    a.push_back(T.t(r));
  }
  return a;
}

PoseSE3 pose_from_json(const json& a) {
  if (!a.is_array() || a.size() != 12)
    throw std::invalid_argument("pose: expected 12 row-major 3x4 numbers");
  PoseSE3 T;
  size_t i = 0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) T.R(r, c) = a[i++].get<double>();
    T.t(r) = a[i++].get<double>();
  }
  return T;
}

json intrinsics_to_json(const CameraIntrinsics& K) {
  return {{"fx", K.fx},       {"fy", K.fy},           {"cx", K.cx},
          {"cy", K.cy},       {"width", K.width},     {"height", K.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics K;
  K.fx = j.at("fx").get<double>();
  K.fy = j.at("fy").get<double>();
  K.cx = j.at("cx").get<double>();
  K.cy = j.at("cy").get<double>();
  K.width = j.at("width").get<int>();
  K.height = j.at("height").get<int>();
  return K;
}

const char* texture_name(TextureId id) {
  switch (id) {
    case TextureId::kSine: return "sine";
    case TextureId::kLowTex: return "lowtex";
    case TextureId::kStep: return "step";
  }
  return "sine";
}

TextureId texture_from_name(const std::string& s) {
  if (s == "sine") return TextureId::kSine;
  if (s == "lowtex") return TextureId::kLowTex;
  if (s == "step") return TextureId::kStep;
  throw std::invalid_argument("scene: unknown texture '" + s + "'");
}

const char* init_name(InitStrategy s) {
  switch (s) {
    case InitStrategy::kConstant: return "constant";
    case InitStrategy::kGroundTruth: return "ground_truth";
    case InitStrategy::kPerturbed: return "perturbed";
  }
  return "constant";
}

InitStrategy init_from_name(const std::string& s) {
  if (s == "constant") return InitStrategy::kConstant;
  if (s == "ground_truth") return InitStrategy::kGroundTruth;
  if (s == "perturbed") return InitStrategy::kPerturbed;
  throw std::invalid_argument("optim: unknown init strategy '" + s + "'");
}

json scene_to_json_obj(const SceneSpec& spec) {
  json planes = json::array();
  for (const PlaneSpec& p : spec.planes)
    planes.push_back({{"normal", {p.normal.x(), p.normal.y(), p.normal.z()}},
                      {"offset", p.offset},
                      {"texture", texture_name(p.texture)},
                      {"tex_freq", p.tex_freq},
                      {"tex_bias", p.tex_bias},
                      {"slab_axis", p.slab_axis},
                      {"slab_lo", p.slab_lo},
                      {"slab_hi", p.slab_hi}});
  json sources = json::array();
  for (const PoseSE3& T : spec.cam_to_world_sources)
    sources.push_back(pose_to_json(T));
  return {{"name", spec.name},
          {"camera", intrinsics_to_json(spec.camera)},
          {"planes", planes},
          {"pose_target", pose_to_json(spec.cam_to_world_target)},
          {"pose_sources", sources},
          {"noise_sigma", spec.noise_sigma},
          {"seed", spec.seed}};
}

SceneSpec scene_from_json_obj(const json& j) {
  SceneSpec spec;
  spec.name = j.value("name", spec.name);
  if (j.contains("camera")) spec.camera = intrinsics_from_json(j.at("camera"));
  if (j.contains("planes")) {
    spec.planes.clear();
    for (const json& jp : j.at("planes")) {
      PlaneSpec p;
      if (jp.contains("normal")) {
        const json& n = jp.at("normal");
        p.normal = Vec3(n.at(0).get<double>(), n.at(1).get<double>(),
                        n.at(2).get<double>());
      }
      p.offset = jp.value("offset", p.offset);
      p.texture = texture_from_name(jp.value("texture", "sine"));
      p.tex_freq = jp.value("tex_freq", p.tex_freq);
      p.tex_bias = jp.value("tex_bias", p.tex_bias);
      p.slab_axis = jp.value("slab_axis", p.slab_axis);
      p.slab_lo = jp.value("slab_lo", p.slab_lo);
      p.slab_hi = jp.value("slab_hi", p.slab_hi);
      spec.planes.push_back(p);
    }
  }
  if (j.contains("pose_target"))
    spec.cam_to_world_target = pose_from_json(j.at("pose_target"));
  if (j.contains("pose_sources")) {
    spec.cam_to_world_sources.clear();
    for (const json& jt : j.at("pose_sources"))
      spec.cam_to_world_sources.push_back(pose_from_json(jt));
  }
  spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
  spec.seed = j.value("seed", spec.seed);
  return spec;
}

json parse(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    throw std::invalid_argument(std::string(what) + ": malformed JSON");
  return j;
}

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string to_json(const SceneSpec& spec) {
  return scene_to_json_obj(spec).dump(2) + "\n";
}

SceneSpec scene_from_json(const std::string& text) {
  try {
    return scene_from_json_obj(parse(text, "scene"));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scene: ") + e.what());
  }
}

std::string to_json(const OptimConfig& cfg) {
  json j{{"lr", cfg.lr},
         {"beta1", cfg.beta1},
         {"beta2", cfg.beta2},
         {"eps", cfg.eps},
         {"max_steps", cfg.max_steps},
         {"stage_split", cfg.stage_split},
         {"freeze_poses", cfg.freeze_poses},
         {"init", init_name(cfg.init)},
         {"init_depth", cfg.init_depth},
         {"init_scale", cfg.init_scale},
         {"seed", cfg.seed},
         {"objective",
          {{"scales", cfg.objective.scales},
           {"alpha_dn", cfg.objective.alpha_dn},
           {"no_dn", cfg.objective.no_dn},
           {"no_edge_smooth", cfg.objective.no_edge_smooth},
           {"no_edge_dn", cfg.objective.no_edge_dn},
           {"no_normal_smooth", cfg.objective.no_normal_smooth},
           {"weights",
            {{"lambda_s", cfg.objective.weights.lambda_s},
             {"lambda_m", cfg.objective.weights.lambda_m},
             {"lambda_g", cfg.objective.weights.lambda_g},
             {"lambda_n", cfg.objective.weights.lambda_n},
             {"alpha_smooth", cfg.objective.weights.alpha_smooth}}}}}};
  return j.dump(2) + "\n";
}

OptimConfig optim_config_from_json(const std::string& text) {
  OptimConfig cfg;
  try {
    json j = parse(text, "optim config");
    cfg.lr = j.value("lr", cfg.lr);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.eps = j.value("eps", cfg.eps);
    cfg.max_steps = j.value("max_steps", cfg.max_steps);
    cfg.stage_split = j.value("stage_split", cfg.stage_split);
    cfg.freeze_poses = j.value("freeze_poses", cfg.freeze_poses);
    cfg.init = init_from_name(j.value("init", init_name(cfg.init)));
    cfg.init_depth = j.value("init_depth", cfg.init_depth);
    cfg.init_scale = j.value("init_scale", cfg.init_scale);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("objective")) {
      const json& jo = j.at("objective");
      cfg.objective.scales = jo.value("scales", cfg.objective.scales);
      cfg.objective.alpha_dn = jo.value("alpha_dn", cfg.objective.alpha_dn);
      cfg.objective.no_dn = jo.value("no_dn", cfg.objective.no_dn);
      cfg.objective.no_edge_smooth =
          jo.value("no_edge_smooth", cfg.objective.no_edge_smooth);
      cfg.objective.no_edge_dn =
          jo.value("no_edge_dn", cfg.objective.no_edge_dn);
      cfg.objective.no_normal_smooth =
          jo.value("no_normal_smooth", cfg.objective.no_normal_smooth);
      if (jo.contains("weights")) {
        const json& jw = jo.at("weights");
        LossWeights& w = cfg.objective.weights;
        w.lambda_s = jw.value("lambda_s", w.lambda_s);
        w.lambda_m = jw.value("lambda_m", w.lambda_m);
        w.lambda_g = jw.value("lambda_g", w.lambda_g);
        w.lambda_n = jw.value("lambda_n", w.lambda_n);
        w.alpha_smooth = jw.value("alpha_smooth", w.alpha_smooth);
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("optim config: ") + e.what());
  }
  return cfg;
}

std::string to_json(const DepthMetrics& m) {
  json j{{"abs_rel", m.abs_rel},   {"sq_rel", m.sq_rel},
         {"rmse", m.rmse},         {"rmse_log", m.rmse_log},
         {"delta_1", m.delta_1},   {"delta_2", m.delta_2},
         {"delta_3", m.delta_3}};
  return j.dump(2) + "\n";
}

std::string to_json(const NormalMetrics& m) {
  json j{{"mean_deg", m.mean_deg},
         {"median_deg", m.median_deg},
         {"pct_11_25", m.pct_11_25},
         {"pct_22_5", m.pct_22_5},
         {"pct_30", m.pct_30}};
  return j.dump(2) + "\n";
}

std::string csv_header(const DepthMetrics&) {
  return "abs_rel,sq_rel,rmse,rmse_log,delta_1,delta_2,delta_3";
}
std::string csv_header(const NormalMetrics&) {
  return "mean_deg,median_deg,pct_11_25,pct_22_5,pct_30";
}

std::string csv_row(const DepthMetrics& m) {
  return g17(m.abs_rel) + "," + g17(m.sq_rel) + "," + g17(m.rmse) + "," +
         g17(m.rmse_log) + "," + g17(m.delta_1) + "," + g17(m.delta_2) + "," +
         g17(m.delta_3);
}
std::string csv_row(const NormalMetrics& m) {
  return g17(m.mean_deg) + "," + g17(m.median_deg) + "," + g17(m.pct_11_25) +
         "," + g17(m.pct_22_5) + "," + g17(m.pct_30);
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string out = "step,stage,total,vs,smooth_depth,smooth_normal,mask,grad\n";
  for (const TraceRow& r : rows) {
    out += std::to_string(r.step) + "," + std::to_string(r.stage) + "," +
           g17(r.total) + "," + g17(r.vs) + "," + g17(r.smooth_depth) + "," +
           g17(r.smooth_normal) + "," + g17(r.mask) + "," + g17(r.grad) + "\n";
  }
  return out;
}

void save_sequence(const std::string& dir, const RenderedSequence& seq,
                   const SceneSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);

  write_pfm((base / "target.pfm").string(), seq.data.target);
  write_png((base / "target.png").string(), seq.data.target);
  json sources = json::array();
  for (size_t s = 0; s < seq.data.sources.size(); ++s) {
    const std::string name = "source_" + std::to_string(s);
    write_pfm((base / (name + ".pfm")).string(), seq.data.sources[s]);
    write_png((base / (name + ".png")).string(), seq.data.sources[s]);
    sources.push_back(name + ".pfm");
  }
  write_pfm((base / "depth_gt.pfm").string(), seq.depth_gt);
  write_depth_png((base / "depth_gt.png").string(), seq.depth_gt);
  write_pfm((base / "normals_gt.pfm").string(), seq.normal_gt.n);
  write_normal_png((base / "normals_gt.png").string(), seq.normal_gt.n);

  json poses = json::array();
  for (const PoseSE3& T : seq.poses_gt) poses.push_back(pose_to_json(T));
  json manifest{{"intrinsics", intrinsics_to_json(seq.data.K)},
                {"poses_target_to_source", poses},
                {"files",
                 {{"target", "target.pfm"},
                  {"sources", sources},
                  {"depth_gt", "depth_gt.pfm"},
                  {"normals_gt", "normals_gt.pfm"}}},
                {"spec", scene_to_json_obj(spec)}};
  write_text((base / "manifest.json").string(), manifest.dump(2) + "\n");
}

RenderedSequence load_sequence(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  json manifest;
  try {
    manifest = parse(read_text((base / "manifest.json").string()), "manifest");
    RenderedSequence seq;
    seq.data.K = intrinsics_from_json(manifest.at("intrinsics"));
    const json& files = manifest.at("files");
    seq.data.target =
        read_pfm((base / files.at("target").get<std::string>()).string());
    for (const json& f : files.at("sources"))
      seq.data.sources.push_back(
          read_pfm((base / f.get<std::string>()).string()));
    seq.depth_gt = read_pfm_scalar(
        (base / files.at("depth_gt").get<std::string>()).string());
    seq.normal_gt.n =
        read_pfm((base / files.at("normals_gt").get<std::string>()).string());
    seq.normal_gt.degenerate.assign(seq.normal_gt.n.pixels(), 0);
    for (const json& jt : manifest.at("poses_target_to_source"))
      seq.poses_gt.push_back(pose_from_json(jt));
    return seq;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("manifest: ") + e.what());
  }
}

}  // namespace warpgeo
