#pragma once

#include <string>
#include <vector>

#include "warpgeo/metrics.hpp"
#include "warpgeo/optimizer.hpp"
#include "warpgeo/scene.hpp"

namespace warpgeo {

// JSON text round trips (doubles survive bit-exactly). Parsers start from
// default-constructed values, so partial documents override only the keys
// they mention; malformed documents throw std::invalid_argument.
std::string to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const std::string& text);

std::string to_json(const OptimConfig& cfg);
OptimConfig optim_config_from_json(const std::string& text);

std::string to_json(const DepthMetrics& m);
std::string to_json(const NormalMetrics& m);

// CSV rows in evaluation-table column order.
std::string csv_header(const DepthMetrics&);
std::string csv_header(const NormalMetrics&);
std::string csv_row(const DepthMetrics& m);
std::string csv_row(const NormalMetrics& m);

// Per-step optimization trace, %.17g so replays compare bit-exactly.
std::string trace_csv(const std::vector<TraceRow>& rows);

// Sequence artifact bundle: float maps as PFM (images included, so reloads
// are exact), PNG previews, and a manifest.json carrying intrinsics, the
// target->source poses (row-major 3x4), and the scene spec.
void save_sequence(const std::string& dir, const RenderedSequence& seq,
                   const SceneSpec& spec);
RenderedSequence load_sequence(const std::string& dir);

}  // namespace warpgeo
