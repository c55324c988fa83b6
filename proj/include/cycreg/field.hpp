#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cycreg/volume.hpp"

namespace cycreg {

/// Dense per-voxel displacement field in voxel units, x-fastest ordering,
/// interleaved (dx,dy,dz). The warp convention is warped(x) = moving(x + phi(x)).
struct DisplacementField {
  Index3 dims{0, 0, 0};
  std::vector<double> vectors;  // 3 * nx*ny*nz

  DisplacementField() = default;
  DisplacementField(Index3 dims, std::vector<double> vectors);

  static DisplacementField zeros(Index3 dims);

  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  }
  std::int64_t base(int i, int j, int k) const {
    return 3 * (i + static_cast<std::int64_t>(dims[0]) * (j + static_cast<std::int64_t>(dims[1]) * k));
  }
  Real3 at(int i, int j, int k) const {
    const std::int64_t b = base(i, j, k);
    return {vectors[b], vectors[b + 1], vectors[b + 2]};
  }
  void set(int i, int j, int k, const Real3& v) {
    const std::int64_t b = base(i, j, k);
    vectors[b] = v[0];
    vectors[b + 1] = v[1];
    vectors[b + 2] = v[2];
  }
};

struct JacobianStats {
  Volume3D det_volume;          // per-voxel det(I + grad(phi)), grid-unit spacing
  double nonpositive_fraction;  // voxels with det <= 0 over total voxels
};

/// Trilinear sample of a field at a continuous voxel coordinate;
/// out-of-bounds neighbors read as zero vectors.
Real3 sample_field(const DisplacementField& f, double px, double py, double pz);

/// Same, but coordinates are clamped to the grid (constant extrapolation).
Real3 sample_field_clamped(const DisplacementField& f, double px, double py, double pz);

/// Warps `moving` by `field`: out(x) = sum over the 8-voxel cubic neighborhood
/// of x+phi(x) of moving(y) * prod_d (1 - |x_d + phi_d(x) - y_d|). Neighbors
/// outside the volume contribute intensity 0 with their weight.
Volume3D warp(const Volume3D& moving, const DisplacementField& field);

/// Gradient of <upstream, warp(moving, field)> with respect to the field:
/// per voxel, the derivative of the trilinear weights times neighbor
/// intensities, scaled by upstream(x).
DisplacementField warp_gradient(const Volume3D& moving, const DisplacementField& field,
                                const Volume3D& upstream);

/// Adjoint of warp with respect to the moving image: returns g with
/// <upstream, warp(m, field)> = <g, m> for every m (scatters upstream onto
/// the displaced neighborhoods).
Volume3D warp_adjoint(const DisplacementField& field, const Volume3D& upstream);

/// Field equivalent to warping by `outer` then by `inner`:
/// result(x) = inner(x) + sample(outer, x + inner(x)).
DisplacementField compose(const DisplacementField& outer, const DisplacementField& inner);

/// Moves each point q to q + sample(field, q); ids preserved.
LandmarkSet warp_landmarks(const LandmarkSet& points, const DisplacementField& field);

/// Per-voxel det(I + grad(phi)) with central differences in the interior and
/// one-sided differences on boundary faces, in grid units.
JacobianStats jacobian_stats(const DisplacementField& field);

/// Resamples a field onto a new grid: output voxel x reads the clamped
/// trilinear sample at x*coord_scale, with components multiplied per-axis by
/// vector_scale. Used for pyramid level transitions.
DisplacementField resample_field(const DisplacementField& f, Index3 new_dims, Real3 coord_scale,
                                 Real3 vector_scale);

double mean_field_magnitude(const DisplacementField& f);

}  // namespace cycreg
