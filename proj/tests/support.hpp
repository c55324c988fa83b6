#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "cycreg/field.hpp"
#include "cycreg/rng.hpp"
#include "cycreg/volume.hpp"

namespace testsupport {

using namespace cycreg;

inline Volume3D random_volume(SplitMix64& rng, Index3 dims, double lo = 0.0, double hi = 1.0) {
  Volume3D v = Volume3D::filled(dims, 0.0);
  for (double& x : v.data) x = rng.uniform(lo, hi);
  return v;
}

inline DisplacementField random_field(SplitMix64& rng, Index3 dims, double max_mag) {
  DisplacementField f = DisplacementField::zeros(dims);
  for (double& x : f.vectors) x = rng.uniform(-max_mag, max_mag);
  return f;
}

/// Field whose displaced points have fractional parts in (0.2, 0.45) bands,
/// i.e. away from trilinear lattice planes.
inline DisplacementField random_offcell_field(SplitMix64& rng, Index3 dims) {
  DisplacementField f = DisplacementField::zeros(dims);
  for (double& x : f.vectors) {
    const double mag = rng.uniform(0.2, 0.45);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return f;
}

/// Brute-force warp oracle: scans every source voxel for each output voxel
/// instead of enumerating the 8-corner neighborhood.
inline Volume3D warp_bruteforce(const Volume3D& moving, const DisplacementField& field) {
  Volume3D out = Volume3D::filled(moving.dims, 0.0, moving.spacing_mm, moving.origin_mm);
  for (int k = 0; k < moving.dims[2]; ++k)
    for (int j = 0; j < moving.dims[1]; ++j)
      for (int i = 0; i < moving.dims[0]; ++i) {
        const Real3 d = field.at(i, j, k);
        const double p[3] = {i + d[0], j + d[1], k + d[2]};
        double acc = 0.0;
        for (int z = 0; z < moving.dims[2]; ++z)
          for (int y = 0; y < moving.dims[1]; ++y)
            for (int x = 0; x < moving.dims[0]; ++x) {
              const double w = std::max(0.0, 1.0 - std::abs(p[0] - x)) *
                               std::max(0.0, 1.0 - std::abs(p[1] - y)) *
                               std::max(0.0, 1.0 - std::abs(p[2] - z));
              if (w > 0.0) acc += moving.at(x, y, z) * w;
            }
        out.at(i, j, k) = acc;
      }
  return out;
}

/// Unique scratch directory under the system temp dir; removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("cycreg_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testsupport
