#include "cycreg/field.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cycreg/parallel.hpp"

namespace cycreg {

namespace {

std::string dims_str(const Index3& d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

void require_same_dims(const Index3& a, const Index3& b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch " + dims_str(a) +
                                " vs " + dims_str(b));
  }
}

}  // namespace

DisplacementField::DisplacementField(Index3 dims_, std::vector<double> vectors_)
    : dims(dims_), vectors(std::move(vectors_)) {
  validate_geometry(dims, {1.0, 1.0, 1.0});
  if (static_cast<std::int64_t>(vectors.size()) != 3 * voxel_count()) {
    throw std::invalid_argument("field vector count does not match dims");
  }
}

DisplacementField DisplacementField::zeros(Index3 dims) {
  validate_geometry(dims, {1.0, 1.0, 1.0});
  std::int64_t n = static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  return DisplacementField(dims, std::vector<double>(3 * n, 0.0));
}

Real3 sample_field(const DisplacementField& f, double px, double py, double pz) {
  const double fx = std::floor(px), fy = std::floor(py), fz = std::floor(pz);
  Real3 acc{0.0, 0.0, 0.0};
  for (int dz = 0; dz <= 1; ++dz) {
    const double cz = fz + dz;
    const double wz = 1.0 - std::abs(pz - cz);
    if (wz <= 0.0 || cz < 0.0 || cz > f.dims[2] - 1) continue;
    for (int dy = 0; dy <= 1; ++dy) {
      const double cy = fy + dy;
      const double wy = 1.0 - std::abs(py - cy);
      if (wy <= 0.0 || cy < 0.0 || cy > f.dims[1] - 1) continue;
      for (int dx = 0; dx <= 1; ++dx) {
        const double cx = fx + dx;
        const double wx = 1.0 - std::abs(px - cx);
        if (wx <= 0.0 || cx < 0.0 || cx > f.dims[0] - 1) continue;
        const double w = wx * wy * wz;
        const std::int64_t b =
            f.base(static_cast<int>(cx), static_cast<int>(cy), static_cast<int>(cz));
        acc[0] += f.vectors[b] * w;
        acc[1] += f.vectors[b + 1] * w;
        acc[2] += f.vectors[b + 2] * w;
      }
    }
  }
  return acc;
}

Real3 sample_field_clamped(const DisplacementField& f, double px, double py, double pz) {
  auto clamp = [](double p, int n) { return p < 0.0 ? 0.0 : (p > n - 1 ? double(n - 1) : p); };
  return sample_field(f, clamp(px, f.dims[0]), clamp(py, f.dims[1]), clamp(pz, f.dims[2]));
}

Volume3D warp(const Volume3D& moving, const DisplacementField& field) {
  require_same_dims(moving.dims, field.dims, "warp");
  Volume3D out = moving;  // copies geometry; data overwritten below
  const int nx = moving.dims[0], ny = moving.dims[1];
  parallel_for(moving.dims[2], [&](std::int64_t k) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Real3 d = field.at(i, int(j), int(k));
        out.at(i, int(j), int(k)) =
            sample_trilinear(moving, i + d[0], j + d[1], double(k) + d[2]);
      }
  });
  return out;
}

DisplacementField warp_gradient(const Volume3D& moving, const DisplacementField& field,
                                const Volume3D& upstream) {
  require_same_dims(moving.dims, field.dims, "warp_gradient");
  require_same_dims(moving.dims, upstream.dims, "warp_gradient");
  DisplacementField grad = DisplacementField::zeros(field.dims);
  const int nx = moving.dims[0], ny = moving.dims[1];
  parallel_for(moving.dims[2], [&](std::int64_t k) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const double u = upstream.at(i, j, int(k));
        if (u == 0.0) continue;
        const Real3 d = field.at(i, j, int(k));
        const double p[3] = {i + d[0], j + d[1], double(k) + d[2]};
        const double f[3] = {std::floor(p[0]), std::floor(p[1]), std::floor(p[2])};
        // per-axis corner weights and their derivatives wrt the coordinate
        double w[3][2], dw[3][2];
        for (int a = 0; a < 3; ++a) {
          w[a][0] = 1.0 - (p[a] - f[a]);
          w[a][1] = p[a] - f[a];
          dw[a][0] = -1.0;
          dw[a][1] = 1.0;
        }
        double gx = 0.0, gy = 0.0, gz = 0.0;
        for (int sz = 0; sz <= 1; ++sz) {
          const double cz = f[2] + sz;
          if (cz < 0.0 || cz > moving.dims[2] - 1) continue;
          for (int sy = 0; sy <= 1; ++sy) {
            const double cy = f[1] + sy;
            if (cy < 0.0 || cy > moving.dims[1] - 1) continue;
            for (int sx = 0; sx <= 1; ++sx) {
              const double cx = f[0] + sx;
              if (cx < 0.0 || cx > moving.dims[0] - 1) continue;
              const double v = moving.at(static_cast<int>(cx), static_cast<int>(cy),
                                         static_cast<int>(cz));
              gx += v * dw[0][sx] * w[1][sy] * w[2][sz];
              gy += v * w[0][sx] * dw[1][sy] * w[2][sz];
              gz += v * w[0][sx] * w[1][sy] * dw[2][sz];
            }
          }
        }
        grad.set(i, j, int(k), {u * gx, u * gy, u * gz});
      }
  });
  return grad;
}

Volume3D warp_adjoint(const DisplacementField& field, const Volume3D& upstream) {
  require_same_dims(upstream.dims, field.dims, "warp_adjoint");
  Volume3D out = Volume3D::filled(upstream.dims, 0.0, upstream.spacing_mm, upstream.origin_mm);
  // scatter; kept sequential so the accumulation order is fixed
  for (int k = 0; k < upstream.dims[2]; ++k)
    for (int j = 0; j < upstream.dims[1]; ++j)
      for (int i = 0; i < upstream.dims[0]; ++i) {
        const double u = upstream.at(i, j, k);
        if (u == 0.0) continue;
        const Real3 d = field.at(i, j, k);
        const double p[3] = {i + d[0], j + d[1], k + d[2]};
        const double f[3] = {std::floor(p[0]), std::floor(p[1]), std::floor(p[2])};
        for (int sz = 0; sz <= 1; ++sz) {
          const double cz = f[2] + sz;
          const double wz = 1.0 - std::abs(p[2] - cz);
          if (wz <= 0.0 || cz < 0.0 || cz > out.dims[2] - 1) continue;
          for (int sy = 0; sy <= 1; ++sy) {
            const double cy = f[1] + sy;
            const double wy = 1.0 - std::abs(p[1] - cy);
            if (wy <= 0.0 || cy < 0.0 || cy > out.dims[1] - 1) continue;
            for (int sx = 0; sx <= 1; ++sx) {
              const double cx = f[0] + sx;
              const double wx = 1.0 - std::abs(p[0] - cx);
              if (wx <= 0.0 || cx < 0.0 || cx > out.dims[0] - 1) continue;
              out.at(static_cast<int>(cx), static_cast<int>(cy), static_cast<int>(cz)) +=
                  u * wx * wy * wz;
            }
          }
        }
      }
  return out;
}

DisplacementField compose(const DisplacementField& outer, const DisplacementField& inner) {
  require_same_dims(outer.dims, inner.dims, "compose");
  DisplacementField out = DisplacementField::zeros(inner.dims);
  const int nx = inner.dims[0], ny = inner.dims[1];
  parallel_for(inner.dims[2], [&](std::int64_t k) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Real3 di = inner.at(i, j, int(k));
        const Real3 doub = sample_field(outer, i + di[0], j + di[1], double(k) + di[2]);
        out.set(i, j, int(k), {di[0] + doub[0], di[1] + doub[1], di[2] + doub[2]});
      }
  });
  return out;
}

LandmarkSet warp_landmarks(const LandmarkSet& points, const DisplacementField& field) {
  validate_unique_ids(points);
  validate_in_domain(points, field.dims);
  LandmarkSet out = points;
  for (auto& p : out.entries) {
    const Real3 d = sample_field(field, p.position[0], p.position[1], p.position[2]);
    for (int a = 0; a < 3; ++a) p.position[a] += d[a];
  }
  return out;
}

JacobianStats jacobian_stats(const DisplacementField& field) {
  const int nx = field.dims[0], ny = field.dims[1], nz = field.dims[2];
  Volume3D det = Volume3D::filled(field.dims, 0.0);
  parallel_for(nz, [&](std::int64_t kk) {
    const int k = static_cast<int>(kk);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        // J[c][d] = d(phi_c)/d(x_d), central in the interior, one-sided on faces
        double J[3][3];
        const int idx[3] = {i, j, k};
        const int n[3] = {nx, ny, nz};
        for (int d = 0; d < 3; ++d) {
          int lo[3] = {i, j, k}, hi[3] = {i, j, k};
          double h;
          if (idx[d] == 0) {
            hi[d] = 1;
            h = 1.0;
          } else if (idx[d] == n[d] - 1) {
            lo[d] = n[d] - 2;
            h = 1.0;
          } else {
            lo[d] -= 1;
            hi[d] += 1;
            h = 2.0;
          }
          const Real3 a = field.at(hi[0], hi[1], hi[2]);
          const Real3 b = field.at(lo[0], lo[1], lo[2]);
          for (int c = 0; c < 3; ++c) J[c][d] = (a[c] - b[c]) / h;
        }
        for (int c = 0; c < 3; ++c) J[c][c] += 1.0;
        det.at(i, j, k) = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                          J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                          J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
      }
  });
  std::int64_t nonpos = 0;
  for (double v : det.data)
    if (v <= 0.0) ++nonpos;
  return JacobianStats{std::move(det), double(nonpos) / double(field.voxel_count())};
}

DisplacementField resample_field(const DisplacementField& f, Index3 new_dims, Real3 coord_scale,
                                 Real3 vector_scale) {
  DisplacementField out = DisplacementField::zeros(new_dims);
  for (int k = 0; k < new_dims[2]; ++k)
    for (int j = 0; j < new_dims[1]; ++j)
      for (int i = 0; i < new_dims[0]; ++i) {
        const Real3 v = sample_field_clamped(f, i * coord_scale[0], j * coord_scale[1],
                                             k * coord_scale[2]);
        out.set(i, j, k, {v[0] * vector_scale[0], v[1] * vector_scale[1], v[2] * vector_scale[2]});
      }
  return out;
}

double mean_field_magnitude(const DisplacementField& f) {
  double acc = 0.0;
  const std::int64_t n = f.voxel_count();
  for (std::int64_t v = 0; v < n; ++v) {
    const double dx = f.vectors[3 * v], dy = f.vectors[3 * v + 1], dz = f.vectors[3 * v + 2];
    acc += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return acc / double(n);
}

}  // namespace cycreg
