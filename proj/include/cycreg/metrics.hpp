#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cycreg/field.hpp"
#include "cycreg/solver.hpp"
#include "cycreg/volume.hpp"

namespace cycreg {

struct LandmarkError {
  std::string id;
  double tre_mm;
};

struct MetricReport {
  std::optional<double> tre_mm;  // mean over landmarks; absent without landmarks
  double nmse = 0.0;
  double folding_percent = 0.0;
  double wall_time_s = 0.0;
  std::vector<LandmarkError> per_landmark_tre_mm;
};

/// Target registration error: each fixed-image point q is pushed to
/// q + sample(field, q) and compared against the matching moving-image point,
/// scaled per axis by the voxel spacing in mm. Returns the mean and the
/// per-landmark list sorted by id.
std::pair<double, std::vector<LandmarkError>> tre(const LandmarkSet& fixed_points,
                                                  const LandmarkSet& moving_points,
                                                  const DisplacementField& field,
                                                  Real3 spacing_mm);

/// ||original - reconstructed||^2 / ||original||^2 over all voxels.
double nmse(const Volume3D& original, const Volume3D& reconstructed);

/// Folding from jacobian_stats(phi_ab), NMSE of the cycle reconstruction
/// warp(warp(a,phi_ab),phi_ba) against a, TRE when landmarks are given
/// (fixed-image set first), wall time copied from the result.
MetricReport evaluate(const Volume3D& a, const Volume3D& b, const RegistrationResult& result,
                      const std::optional<std::pair<LandmarkSet, LandmarkSet>>& landmarks);

/// JSON with exactly the MetricReport field names, floats with 17 significant
/// digits.
std::string metric_report_to_json(const MetricReport& report);

}  // namespace cycreg
