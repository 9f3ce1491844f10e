#pragma once

namespace repgeom {

/// Worker threads used by parallel loops and Eigen products; 0 selects the
/// hardware default.
void set_thread_count(int threads);
int thread_count();

/// Deterministic mode pins every parallel section to one thread so that
/// floating-point reductions happen in a fixed order.
void set_deterministic(bool on);
bool deterministic();

}  // namespace repgeom
