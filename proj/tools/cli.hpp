#pragma once

namespace warpgeo::cli {

// Full command-line entry point (parse, dispatch, artifact output).
// Returns the process exit code: 0 success, 1 gradient-check threshold
// failure, 2 configuration error, 3 numeric failure.
int run(int argc, const char* const* argv);

}  // namespace warpgeo::cli
