#include "cycreg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace cycreg {

void validate_geometry(const Index3& dims, const Real3& spacing_mm) {
  for (int d = 0; d < 3; ++d) {
    if (dims[d] < 2) {
      throw std::invalid_argument("volume dims must be >= 2 per axis, got " +
                                  std::to_string(dims[d]) + " on axis " + std::to_string(d));
    }
    if (!(spacing_mm[d] > 0.0) || !std::isfinite(spacing_mm[d])) {
      throw std::invalid_argument("voxel spacing must be strictly positive");
    }
  }
}

Volume3D::Volume3D(Index3 dims_, Real3 spacing_, Real3 origin_, std::vector<double> values)
    : dims(dims_), spacing_mm(spacing_), origin_mm(origin_), data(std::move(values)) {
  validate_geometry(dims, spacing_mm);
  if (static_cast<std::int64_t>(data.size()) != voxel_count()) {
    throw std::invalid_argument("volume data length " + std::to_string(data.size()) +
                                " does not match dims product " + std::to_string(voxel_count()));
  }
}

Volume3D Volume3D::filled(Index3 dims, double value, Real3 spacing_mm, Real3 origin_mm) {
  std::int64_t n = static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  return Volume3D(dims, spacing_mm, origin_mm, std::vector<double>(n, value));
}

double sample_trilinear(const Volume3D& v, double px, double py, double pz) {
  const double fx = std::floor(px), fy = std::floor(py), fz = std::floor(pz);
  double acc = 0.0;
  for (int dz = 0; dz <= 1; ++dz) {
    const double cz = fz + dz;
    const double wz = 1.0 - std::abs(pz - cz);
    if (wz <= 0.0 || cz < 0.0 || cz > v.dims[2] - 1) continue;
    for (int dy = 0; dy <= 1; ++dy) {
      const double cy = fy + dy;
      const double wy = 1.0 - std::abs(py - cy);
      if (wy <= 0.0 || cy < 0.0 || cy > v.dims[1] - 1) continue;
      for (int dx = 0; dx <= 1; ++dx) {
        const double cx = fx + dx;
        const double wx = 1.0 - std::abs(px - cx);
        if (wx <= 0.0 || cx < 0.0 || cx > v.dims[0] - 1) continue;
        acc += v.at(static_cast<int>(cx), static_cast<int>(cy), static_cast<int>(cz)) * wx * wy * wz;
      }
    }
  }
  return acc;
}

Volume3D normalize_max(const Volume3D& v) {
  const double mx = *std::max_element(v.data.begin(), v.data.end());
  if (!(mx > 0.0)) {
    throw std::invalid_argument("normalize_max: volume maximum is not positive");
  }
  Volume3D out = v;
  for (double& x : out.data) x /= mx;
  return out;
}

Volume3D downsample_trilinear(const Volume3D& v, Index3 factor) {
  Index3 out_dims;
  for (int d = 0; d < 3; ++d) {
    if (factor[d] < 1) throw std::invalid_argument("downsample factor must be >= 1");
    out_dims[d] = (v.dims[d] + factor[d] - 1) / factor[d];
    if (out_dims[d] < 2) {
      throw std::invalid_argument("downsample factor " + std::to_string(factor[d]) +
                                  " leaves fewer than 2 samples on axis " + std::to_string(d));
    }
  }
  Real3 spacing{v.spacing_mm[0] * factor[0], v.spacing_mm[1] * factor[1],
                v.spacing_mm[2] * factor[2]};
  Volume3D out(out_dims, spacing, v.origin_mm,
               std::vector<double>(static_cast<std::size_t>(out_dims[0]) * out_dims[1] * out_dims[2]));
  for (int k = 0; k < out_dims[2]; ++k)
    for (int j = 0; j < out_dims[1]; ++j)
      for (int i = 0; i < out_dims[0]; ++i)
        out.at(i, j, k) = sample_trilinear(v, double(i) * factor[0], double(j) * factor[1],
                                           double(k) * factor[2]);
  return out;
}

Volume3D zero_pad_centered(const Volume3D& v, int target_nz) {
  if (target_nz < v.dims[2]) {
    throw std::invalid_argument("zero_pad_centered: target nz " + std::to_string(target_nz) +
                                " is smaller than volume nz " + std::to_string(v.dims[2]));
  }
  const int pad_total = target_nz - v.dims[2];
  const int pad_below = (pad_total + 1) / 2;  // tie goes below
  Volume3D out = Volume3D::filled({v.dims[0], v.dims[1], target_nz}, 0.0, v.spacing_mm, v.origin_mm);
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i)
        out.at(i, j, k + pad_below) = v.at(i, j, k);
  return out;
}

void validate_unique_ids(const LandmarkSet& points) {
  std::set<std::string> seen;
  for (const auto& p : points.entries) {
    if (!seen.insert(p.id).second) {
      throw std::invalid_argument("duplicate landmark id: " + p.id);
    }
  }
}

void validate_in_domain(const LandmarkSet& points, const Index3& dims) {
  for (const auto& p : points.entries) {
    for (int d = 0; d < 3; ++d) {
      if (!(p.position[d] >= 0.0) || !(p.position[d] <= dims[d] - 1)) {
        throw std::invalid_argument("landmark " + p.id + " lies outside the volume domain");
      }
    }
  }
}

}  // namespace cycreg
