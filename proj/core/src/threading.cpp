#include "warpgeo/threading.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace warpgeo {

namespace {

int resolve_thread_count() {
  int n = int(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("WARPGEO_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = int(std::min<long>(n, cap));
  }
  return n;
}

// One persistent pool. Top-level regions are serialized by region_mu_;
// nested regions run inline (see parallel_tiles), so recursion cannot
// deadlock. Tile dispatch is mutex-guarded and generation-checked: a worker
// that wakes up late sees a generation mismatch and goes back to sleep
// instead of touching a newer job's counters. Tile bodies must not throw.
class Pool {
 public:
  Pool() : workers_(size_t(resolve_thread_count() - 1)) {
    for (auto& w : workers_) w = std::thread([this] { worker_loop(); });
  }
  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int threads() const { return int(workers_.size()) + 1; }

  void run(int tiles, int rows, const std::function<void(int, int, int)>& fn) {
    std::lock_guard<std::mutex> region(region_mu_);
    uint64_t gen;
    {
      std::lock_guard<std::mutex> lk(mu_);
      job_ = &fn;
      rows_ = rows;
      tiles_ = tiles;
      next_tile_ = 0;
      pending_ = tiles;
      gen = ++generation_;
    }
    cv_.notify_all();
    drain(gen);  // the calling thread works too
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  void drain(uint64_t gen) {
    for (;;) {
      int t;
      const std::function<void(int, int, int)>* job;
      int rows;
      {
        std::lock_guard<std::mutex> lk(mu_);
        if (generation_ != gen || next_tile_ >= tiles_) return;
        t = next_tile_++;
        job = job_;
        rows = rows_;
      }
      (*job)(t, t * kRowTile, std::min((t + 1) * kRowTile, rows));
      {
        std::lock_guard<std::mutex> lk(mu_);
        if (generation_ == gen && --pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      uint64_t gen;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = gen = generation_;
      }
      drain(gen);
    }
  }

  std::vector<std::thread> workers_;
  std::mutex region_mu_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int, int, int)>* job_ = nullptr;
  int next_tile_ = 0, tiles_ = 0, rows_ = 0, pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p;
  return p;
}

thread_local bool inside_region = false;

}  // namespace

int thread_count() { return pool().threads(); }

int num_row_tiles(int rows) { return (rows + kRowTile - 1) / kRowTile; }

void parallel_tiles(int rows, const std::function<void(int, int, int)>& fn) {
  if (rows <= 0) return;
  const int tiles = num_row_tiles(rows);
  if (inside_region || thread_count() == 1 || tiles == 1) {
    for (int t = 0; t < tiles; ++t)
      fn(t, t * kRowTile, std::min((t + 1) * kRowTile, rows));
    return;
  }
  inside_region = true;
  std::function<void(int, int, int)> wrapped = [&fn](int t, int r0, int r1) {
    inside_region = true;  // workers stay sticky-inline for nested regions
    fn(t, r0, r1);
  };
  pool().run(tiles, rows, wrapped);
  inside_region = false;
}

void parallel_rows(int rows, const std::function<void(int, int)>& fn) {
  parallel_tiles(rows, [&fn](int, int r0, int r1) { fn(r0, r1); });
}

}  // namespace warpgeo
