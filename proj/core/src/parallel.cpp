#include "repgeom/parallel.hpp"

#include <atomic>

#include <Eigen/Core>
#include <omp.h>

namespace repgeom {
namespace {
std::atomic<int> g_threads{0};
std::atomic<bool> g_deterministic{false};

void apply() {
  const int n = thread_count();
  omp_set_num_threads(n);
  Eigen::setNbThreads(n);
}
}  // namespace

void set_thread_count(int threads) {
  g_threads = threads < 0 ? 0 : threads;
  apply();
}

int thread_count() {
  if (g_deterministic) return 1;
  const int n = g_threads;
  return n > 0 ? n : omp_get_num_procs();
}

void set_deterministic(bool on) {
  g_deterministic = on;
  apply();
}

bool deterministic() { return g_deterministic; }

}  // namespace repgeom
