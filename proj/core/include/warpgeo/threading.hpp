#pragma once

#include <functional>

namespace warpgeo {

// Worker count resolved once at first use: min(hardware_concurrency,
// WARPGEO_THREADS) with WARPGEO_THREADS=1 forcing serial execution.
int thread_count();

// Rows are split into fixed 8-row tiles whose layout depends only on `rows`,
// never on the thread count. Reductions must give each tile its own slot and
// combine the slots in tile order afterwards; that makes every result
// bit-identical whether the pool has 1 or N workers.
constexpr int kRowTile = 8;
int num_row_tiles(int rows);

// Runs fn(tile, row_begin, row_end) for every tile. Tiles may execute on any
// worker in any order; fn must only write to state owned by its tile index.
// Nested calls (fn itself parallelising) run inline on the calling thread.
void parallel_tiles(int rows, const std::function<void(int, int, int)>& fn);

// Convenience wrapper when no per-tile state is needed.
void parallel_rows(int rows, const std::function<void(int, int)>& fn);

}  // namespace warpgeo
