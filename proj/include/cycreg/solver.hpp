#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cycreg/field.hpp"
#include "cycreg/losses.hpp"
#include "cycreg/volume.hpp"

namespace cycreg {

/// Defaults are calibrated on the synthetic phantom suite. Note the scale of
/// alpha: the cycle loss is an unnormalized l1 sum, so its per-voxel gradients
/// are O(1) while the global cross-correlation contributes O(1/n) per voxel;
/// alpha must sit below that ratio or the cycle term dominates the update.
struct SolverConfig {
  LossWeights weights{0.03, 2e-5, 0.5};  // lambda, alpha, beta
  double learning_rate = 0.03;
  std::vector<int> iterations_per_level = {2000, 800, 300};
  std::vector<Index3> pyramid_factors = {{4, 4, 2}, {2, 2, 1}, {1, 1, 1}};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  SimMode sim_mode = SimMode::normalized;
  RegMode reg_mode = RegMode::gradient;
};

/// Throws std::invalid_argument when a config violates its invariants
/// (weights finite and >= 0, Adam betas in [0,1), last pyramid level (1,1,1),
/// matching schedule lengths, iteration counts >= 0).
void validate_config(const SolverConfig& cfg);

struct RegistrationResult {
  DisplacementField phi_ab;
  DisplacementField phi_ba;
  /// Entry 0 is the evaluation at the zero-field initialization; one entry per
  /// iteration follows, and the last entry is the final full-resolution loss.
  std::vector<LossBreakdown> loss_trace;
  double wall_time_s = 0.0;
};

/// Raised when the total loss becomes non-finite; carries the trace of
/// finite evaluations seen up to that point.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(const std::string& msg, std::vector<LossBreakdown> trace)
      : std::runtime_error(msg), partial_trace(std::move(trace)) {}
  std::vector<LossBreakdown> partial_trace;
};

/// Jointly optimizes phi_ab and phi_ba under the total loss with Adam over a
/// coarse-to-fine pyramid. Fields start at zero on the coarsest level and are
/// trilinearly upsampled (and rescaled per axis) between levels.
RegistrationResult register_pair(const Volume3D& a, const Volume3D& b, const SolverConfig& cfg);

/// Registers a volume to itself with the identity loss active (the pair
/// fields double as the self-pair fields). Stationarity is judged by
/// mean_field_magnitude of the result.
RegistrationResult register_self(const Volume3D& a, const SolverConfig& cfg);

SolverConfig solver_config_from_json_string(const std::string& text);
SolverConfig load_solver_config(const std::string& path);
std::string solver_config_to_json_string(const SolverConfig& cfg);

namespace detail {

/// Loss and gradients of the solver's per-level objective. In self mode the
/// pair fields double as the self-pair fields of the identity term, which
/// then contributes beta times the same similarity gradients; in pair mode
/// the identity component is zero. Pass null gradient pointers to skip the
/// backward pass.
LossBreakdown pair_objective(const Volume3D& a, const Volume3D& b,
                             const DisplacementField& phi_ab, const DisplacementField& phi_ba,
                             const LossWeights& w, SimMode sim, RegMode reg, bool self_mode,
                             DisplacementField* g_ab, DisplacementField* g_ba);

}  // namespace detail

const char* to_string(SimMode mode);
const char* to_string(RegMode mode);
SimMode sim_mode_from_string(const std::string& s);
RegMode reg_mode_from_string(const std::string& s);

}  // namespace cycreg
