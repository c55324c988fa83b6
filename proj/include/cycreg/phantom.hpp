#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "cycreg/field.hpp"
#include "cycreg/volume.hpp"

namespace cycreg {

enum class PhantomKind { spheres, ramp, perlin_smooth };

struct Translation {
  Real3 t{0.0, 0.0, 0.0};
};
/// Linear displacement phi(x) = M*x (row-major 3x3).
struct Affine {
  std::array<double, 9> m{};
};
/// phi_d(x) = amplitude * sin(2*pi*x_d/period + phase_d), seeded phases.
/// Fold-free whenever amplitude < period/(2*pi).
struct Sinusoid {
  double amplitude = 0.0;
  double period = 1.0;
};
/// phi_axis(x) = -2*x_axis (mirror about the axis origin), det = -1.
struct ReflectionAxis {
  int axis = 0;
};
using Deformation = std::variant<Translation, Affine, Sinusoid, ReflectionAxis>;

struct ContrastNone {};
struct ContrastAffine {
  double c = 1.0;
  double d = 0.0;
};
struct ContrastGamma {
  double g = 1.0;
};
using Contrast = std::variant<ContrastNone, ContrastAffine, ContrastGamma>;

struct PhantomSpec {
  Index3 dims{32, 32, 32};
  PhantomKind kind = PhantomKind::perlin_smooth;
  Deformation deformation = Translation{};
  Contrast contrast = ContrastNone{};
  std::uint64_t seed = 0;
};

struct PhantomData {
  Volume3D moving;
  Volume3D fixed;
  DisplacementField truth;  // warp(moving, truth) ~= fixed (pre-contrast)
};

/// Deterministic given the seed. The fixed image is the analytic deformation
/// of the moving image (sampled in closed form, not by discrete warping) with
/// the contrast remap applied afterwards. Throws when a sinusoid violates the
/// fold-free amplitude bound.
PhantomData generate(const PhantomSpec& spec);

/// Mean Euclidean norm of (estimate - truth) over voxels at least `margin`
/// away from every face.
double endpoint_error(const DisplacementField& estimate, const DisplacementField& truth,
                      int margin);

/// Closed-form displacement of a spec's deformation at a continuous voxel
/// coordinate (what `generate` samples onto the grid).
Real3 analytic_displacement(const Deformation& def, const PhantomSpec& spec, double px, double py,
                            double pz);

PhantomSpec phantom_spec_from_json_string(const std::string& text);
PhantomSpec load_phantom_spec(const std::string& path);
std::string phantom_spec_to_json_string(const PhantomSpec& spec);

}  // namespace cycreg
