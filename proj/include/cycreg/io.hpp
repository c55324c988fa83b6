#pragma once

#include <string>

#include "cycreg/field.hpp"
#include "cycreg/volume.hpp"

namespace cycreg {

// Volume/field containers are a JSON header `<name>.json` plus a raw payload
// `<name>.raw` of little-endian IEEE-754 float32, x-fastest. Scalar payloads
// are 4*nx*ny*nz bytes; field payloads 12*nx*ny*nz bytes with per-voxel
// interleaved (dx,dy,dz). `path` may be the .json path, the .raw path, or the
// bare stem.

Volume3D load_volume(const std::string& path);
void save_volume(const Volume3D& v, const std::string& path);

DisplacementField load_field(const std::string& path);
void save_field(const DisplacementField& f, const std::string& path,
                Real3 spacing_mm = {1.0, 1.0, 1.0}, Real3 origin_mm = {0.0, 0.0, 0.0});

/// Landmark CSV: header line `id,x,y,z`, voxel coordinates.
LandmarkSet load_landmarks(const std::string& path);
void save_landmarks(const LandmarkSet& points, const std::string& path);

}  // namespace cycreg
