#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cycreg {

using Index3 = std::array<int, 3>;
using Real3 = std::array<double, 3>;

/// Dense scalar 3D image. Voxel (i,j,k) lives at data[i + nx*(j + ny*k)]
/// (x-fastest ordering). Values are held as doubles in memory; containers
/// on disk store float32 (see io.hpp).
struct Volume3D {
  Index3 dims{0, 0, 0};
  Real3 spacing_mm{1.0, 1.0, 1.0};
  Real3 origin_mm{0.0, 0.0, 0.0};
  std::vector<double> data;

  Volume3D() = default;
  Volume3D(Index3 dims, Real3 spacing_mm, Real3 origin_mm, std::vector<double> values);

  /// Volume filled with a constant value.
  static Volume3D filled(Index3 dims, double value, Real3 spacing_mm = {1.0, 1.0, 1.0},
                         Real3 origin_mm = {0.0, 0.0, 0.0});

  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  }
  std::int64_t index(int i, int j, int k) const {
    return i + static_cast<std::int64_t>(dims[0]) * (j + static_cast<std::int64_t>(dims[1]) * k);
  }
  double at(int i, int j, int k) const { return data[index(i, j, k)]; }
  double& at(int i, int j, int k) { return data[index(i, j, k)]; }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && i < dims[0] && j >= 0 && j < dims[1] && k >= 0 && k < dims[2];
  }
};

/// Checks dims (each >= 2) and spacing (> 0); throws std::invalid_argument.
void validate_geometry(const Index3& dims, const Real3& spacing_mm);

/// Trilinear sample at a continuous voxel coordinate. Neighbors outside the
/// volume contribute intensity 0 with their weight (zero-padding convention).
double sample_trilinear(const Volume3D& v, double px, double py, double pz);

/// Scales intensities by 1/max so the output maximum is exactly 1.
/// Throws if max(v) <= 0.
Volume3D normalize_max(const Volume3D& v);

/// Integer-factor downsampling: output index c reads the trilinear sample at
/// fine coordinate c*factor (exact lattice reads for integer factors).
/// Output dims are ceil(n/factor); spacing is multiplied by the factor.
Volume3D downsample_trilinear(const Volume3D& v, Index3 factor);

/// Pads the z extent to target_nz with zero-valued slices, original slices
/// centered; an odd leftover slice goes below (low z).
Volume3D zero_pad_centered(const Volume3D& v, int target_nz);

/// Named anatomical point in voxel coordinates.
struct Landmark {
  std::string id;
  Real3 position;
};

struct LandmarkSet {
  std::vector<Landmark> entries;
};

/// Throws if two entries share an id.
void validate_unique_ids(const LandmarkSet& points);

/// Throws if any point lies outside [0, dim-1] on some axis.
void validate_in_domain(const LandmarkSet& points, const Index3& dims);

}  // namespace cycreg
