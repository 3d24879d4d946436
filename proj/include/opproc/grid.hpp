#pragma once

#include <cstddef>

namespace opproc {

/// Uniform grid t_k = k * horizon / n_steps, k = 0..n_steps.
struct TimeGrid {
  double horizon = 1.0;
  int n_steps = 1;

  double dt() const { return horizon / n_steps; }
  double time(int k) const { return k == n_steps ? horizon : k * dt(); }
  std::size_t n_points() const { return static_cast<std::size_t>(n_steps) + 1; }
};

}  // namespace opproc
