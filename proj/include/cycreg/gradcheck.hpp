#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cycreg {

/// Result of the finite-difference gradient self-check used by the
/// `selfcheck` subcommand and the acceptance suite.
struct GradCheckReport {
  int instances = 0;
  int coordinates_checked = 0;
  int breaches = 0;
  double max_rel_err = 0.0;
  double seconds = 0.0;
  std::vector<std::string> lines;
  bool passed() const { return breaches == 0; }
};

/// Compares analytic total-loss gradients against central finite differences
/// on random small instances (dims 6..8 per axis, fields kept away from
/// lattice planes). A coordinate breaches when
/// |analytic - fd| > tol * max(|analytic|, |fd|, 1e-3).
GradCheckReport run_gradient_selfcheck(std::uint64_t seed = 20240901, int instances = 20,
                                       int coords_per_instance = 64, double tol = 1e-3);

}  // namespace cycreg
