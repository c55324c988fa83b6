#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cycreg/field.hpp"
#include "support.hpp"

using namespace cycreg;
using testsupport::random_field;
using testsupport::random_offcell_field;
using testsupport::random_volume;
using testsupport::warp_bruteforce;

namespace {

Volume3D linear_volume(Index3 dims, Real3 slope, double offset) {
  Volume3D v = Volume3D::filled(dims, 0.0);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i)
        v.at(i, j, k) = offset + slope[0] * i + slope[1] * j + slope[2] * k;
  return v;
}

DisplacementField sinusoid_field(Index3 dims, double amplitude, double period, double phase) {
  DisplacementField f = DisplacementField::zeros(dims);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        const double c = 2.0 * 3.14159265358979323846 / period;
        f.set(i, j, k,
              {amplitude * std::sin(c * i + phase), amplitude * std::sin(c * j + 2.0 * phase),
               amplitude * std::sin(c * k + 3.0 * phase)});
      }
  return f;
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace

TEST_CASE("warp with a zero field is bit-identical to the input") {
  SplitMix64 rng(201);
  for (int trial = 0; trial < 10; ++trial) {
    const Index3 dims{rng.uniform_int(2, 10), rng.uniform_int(2, 10), rng.uniform_int(2, 10)};
    const Volume3D v = random_volume(rng, dims, -5.0, 5.0);
    const Volume3D w = warp(v, DisplacementField::zeros(dims));
    CHECK(w.data == v.data);
  }
}

TEST_CASE("warp of a linear ramp by a unit shift adds the slope") {
  const Volume3D ramp = linear_volume({8, 4, 4}, {1.0, 0.0, 0.0}, 0.0);
  DisplacementField f = DisplacementField::zeros({8, 4, 4});
  for (double& x : f.vectors) x = 0.0;
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 8; ++i) f.set(i, j, k, {1.0, 0.0, 0.0});
  const Volume3D w = warp(ramp, f);
  const Volume3D oracle = warp_bruteforce(ramp, f);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 7; ++i) {  // displaced neighborhood in bounds
        CHECK(w.at(i, j, k) == doctest::Approx(i + 1.0).epsilon(1e-12));
        CHECK(w.at(i, j, k) == doctest::Approx(oracle.at(i, j, k)).epsilon(1e-12));
      }
}

TEST_CASE("warp of a constant volume is constant where neighborhoods stay in bounds") {
  SplitMix64 rng(202);
  const Volume3D v = Volume3D::filled({6, 6, 6}, 3.25);
  const DisplacementField f = random_field(rng, {6, 6, 6}, 1.5);
  const Volume3D w = warp(v, f);
  for (int k = 0; k < 6; ++k)
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 6; ++i) {
        const Real3 d = f.at(i, j, k);
        const double p[3] = {i + d[0], j + d[1], k + d[2]};
        bool inside = true;
        for (int a = 0; a < 3; ++a)
          if (p[a] < 0.0 || p[a] > 5.0) inside = false;
        if (inside) CHECK(w.at(i, j, k) == doctest::Approx(3.25).epsilon(1e-12));
      }
}

TEST_CASE("warp matches the brute-force oracle on random instances") {
  SplitMix64 rng(203);
  for (int trial = 0; trial < 4; ++trial) {
    const Index3 dims{rng.uniform_int(4, 8), rng.uniform_int(4, 8), rng.uniform_int(4, 8)};
    const Volume3D v = random_volume(rng, dims);
    const DisplacementField f = random_field(rng, dims, 3.0);  // partly out of bounds
    const Volume3D w = warp(v, f);
    const Volume3D oracle = warp_bruteforce(v, f);
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      CHECK(w.data[i] == doctest::Approx(oracle.data[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("warp reproduces linear images at interior voxels for any field") {
  SplitMix64 rng(204);
  const Index3 dims{9, 8, 7};
  const Volume3D v = linear_volume(dims, {0.5, -0.25, 1.5}, 2.0);
  const DisplacementField f = random_field(rng, dims, 1.25);
  const Volume3D w = warp(v, f);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        const Real3 d = f.at(i, j, k);
        const double p[3] = {i + d[0], j + d[1], k + d[2]};
        bool full_neighborhood = true;
        for (int a = 0; a < 3; ++a)
          if (std::floor(p[a]) < 0.0 || std::floor(p[a]) + 1.0 > dims[a] - 1)
            full_neighborhood = false;
        if (!full_neighborhood) continue;
        const double expected = 2.0 + 0.5 * p[0] - 0.25 * p[1] + 1.5 * p[2];
        CHECK(std::abs(w.at(i, j, k) - expected) < 1e-6);
      }
}

TEST_CASE("warp output stays within the convex hull of intensities and zero") {
  SplitMix64 rng(205);
  const Volume3D v = random_volume(rng, {7, 7, 7}, -2.0, 3.0);
  const DisplacementField f = random_field(rng, {7, 7, 7}, 4.0);
  const Volume3D w = warp(v, f);
  const double lo = std::min(0.0, *std::min_element(v.data.begin(), v.data.end()));
  const double hi = std::max(0.0, *std::max_element(v.data.begin(), v.data.end()));
  for (double x : w.data) {
    CHECK(x >= lo - 1e-12);
    CHECK(x <= hi + 1e-12);
  }
}

TEST_CASE("warp rejects mismatched dims") {
  const Volume3D v = Volume3D::filled({4, 4, 4}, 1.0);
  CHECK_THROWS_AS(warp(v, DisplacementField::zeros({4, 4, 5})), std::invalid_argument);
}

TEST_CASE("warp_gradient of a constant volume is zero") {
  SplitMix64 rng(206);
  const Volume3D v = Volume3D::filled({6, 6, 6}, 1.5);
  const DisplacementField f = random_field(rng, {6, 6, 6}, 1.0);
  const Volume3D upstream = random_volume(rng, {6, 6, 6});
  const DisplacementField g = warp_gradient(v, f, upstream);
  // interior only: near faces the implicit zero padding creates real gradients
  for (int k = 2; k < 4; ++k)
    for (int j = 2; j < 4; ++j)
      for (int i = 2; i < 4; ++i) {
        const Real3 gi = g.at(i, j, k);
        CHECK(std::abs(gi[0]) < 1e-12);
        CHECK(std::abs(gi[1]) < 1e-12);
        CHECK(std::abs(gi[2]) < 1e-12);
      }
}

TEST_CASE("warp_gradient matches central finite differences") {
  SplitMix64 rng(207);
  const Index3 dims{8, 8, 8};
  const Volume3D v = random_volume(rng, dims);
  DisplacementField f = random_offcell_field(rng, dims);
  const Volume3D upstream = random_volume(rng, dims, -1.0, 1.0);
  const DisplacementField g = warp_gradient(v, f, upstream);
  const double step = 1e-3;
  for (int c = 0; c < 96; ++c) {
    const std::int64_t i = std::int64_t(rng.next() % f.vectors.size());
    const double saved = f.vectors[i];
    f.vectors[i] = saved + step;
    const double lp = dot(upstream.data, warp(v, f).data);
    f.vectors[i] = saved - step;
    const double lm = dot(upstream.data, warp(v, f).data);
    f.vectors[i] = saved;
    const double fd = (lp - lm) / (2.0 * step);
    const double rel = std::abs(g.vectors[i] - fd) / std::max({std::abs(g.vectors[i]),
                                                               std::abs(fd), 1e-6});
    CHECK(rel <= 1e-3);
  }
}

TEST_CASE("warp_gradient of a ramp under an indicator upstream is the slope") {
  const Index3 dims{8, 8, 8};
  const Volume3D ramp = linear_volume(dims, {0.75, 0.0, 0.0}, 0.0);
  DisplacementField f = DisplacementField::zeros(dims);
  f.set(3, 4, 5, {0.3, -0.2, 0.4});
  Volume3D upstream = Volume3D::filled(dims, 0.0);
  upstream.at(3, 4, 5) = 1.0;
  const DisplacementField g = warp_gradient(ramp, f, upstream);
  const Real3 gi = g.at(3, 4, 5);
  CHECK(gi[0] == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(std::abs(gi[1]) < 1e-9);
  CHECK(std::abs(gi[2]) < 1e-9);
}

TEST_CASE("warp_adjoint satisfies the adjoint identity") {
  SplitMix64 rng(208);
  for (int trial = 0; trial < 4; ++trial) {
    const Index3 dims{rng.uniform_int(4, 7), rng.uniform_int(4, 7), rng.uniform_int(4, 7)};
    const Volume3D m = random_volume(rng, dims, -1.0, 1.0);
    const Volume3D u = random_volume(rng, dims, -1.0, 1.0);
    const DisplacementField f = random_field(rng, dims, 2.0);
    const double lhs = dot(u.data, warp(m, f).data);
    const double rhs = dot(warp_adjoint(f, u).data, m.data);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("compose identity elements") {
  SplitMix64 rng(209);
  const Index3 dims{6, 6, 6};
  const DisplacementField f = random_field(rng, dims, 1.0);
  const DisplacementField zero = DisplacementField::zeros(dims);
  const DisplacementField a = compose(zero, f);
  const DisplacementField b = compose(f, zero);
  for (std::size_t i = 0; i < f.vectors.size(); ++i) {
    CHECK(a.vectors[i] == doctest::Approx(f.vectors[i]).epsilon(1e-12));
  }
  // compose(f, 0)(x) = 0 + sample(f, x) = f(x) exactly on lattice points
  for (std::size_t i = 0; i < f.vectors.size(); ++i) {
    CHECK(b.vectors[i] == doctest::Approx(f.vectors[i]).epsilon(1e-12));
  }
}

TEST_CASE("composing constant translations adds them at interior voxels") {
  const Index3 dims{8, 8, 8};
  DisplacementField t1 = DisplacementField::zeros(dims);
  DisplacementField t2 = DisplacementField::zeros(dims);
  for (std::int64_t v = 0; v < t1.voxel_count(); ++v) {
    t1.vectors[3 * v] = 1.25;
    t2.vectors[3 * v + 1] = -0.75;
  }
  const DisplacementField c = compose(t1, t2);
  for (int k = 2; k < 6; ++k)
    for (int j = 2; j < 6; ++j)
      for (int i = 2; i < 6; ++i) {
        const Real3 d = c.at(i, j, k);
        CHECK(d[0] == doctest::Approx(1.25).epsilon(1e-12));
        CHECK(d[1] == doctest::Approx(-0.75).epsilon(1e-12));
        CHECK(d[2] == doctest::Approx(0.0).epsilon(1e-12));
      }
}

TEST_CASE("warping by a composed field approximates sequential warping") {
  const Index3 dims{16, 16, 16};
  Volume3D smooth = Volume3D::filled(dims, 0.0);
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) {
        smooth.at(i, j, k) = 0.5 + 0.5 * std::sin(2.0 * 3.14159265358979 * i / 32.0) *
                                       std::cos(2.0 * 3.14159265358979 * (j + k) / 32.0);
      }
  const DisplacementField outer = sinusoid_field(dims, 0.6, 16.0, 0.3);
  const DisplacementField inner = sinusoid_field(dims, 0.5, 16.0, 1.1);
  const Volume3D sequential = warp(warp(smooth, outer), inner);
  const Volume3D composed = warp(smooth, compose(outer, inner));
  // compare outside the boundary band (max displacement + 1), where the
  // sequential path's intermediate volume is free of zero-padding reads
  double max_err = 0.0;
  for (int k = 2; k < 14; ++k)
    for (int j = 2; j < 14; ++j)
      for (int i = 2; i < 14; ++i)
        max_err = std::max(max_err,
                           std::abs(sequential.at(i, j, k) - composed.at(i, j, k)));
  CHECK(max_err <= 0.02);
}

TEST_CASE("compose is associative within interpolation tolerance") {
  const Index3 dims{16, 16, 16};
  const DisplacementField f = sinusoid_field(dims, 0.5, 16.0, 0.2);
  const DisplacementField g = sinusoid_field(dims, 0.4, 16.0, 0.9);
  const DisplacementField h = sinusoid_field(dims, 0.45, 16.0, 1.7);
  const DisplacementField left = compose(compose(f, g), h);
  const DisplacementField right = compose(f, compose(g, h));
  // compare away from faces, where out-of-bounds reads differ
  double max_err = 0.0;
  for (int k = 2; k < 14; ++k)
    for (int j = 2; j < 14; ++j)
      for (int i = 2; i < 14; ++i) {
        const Real3 a = left.at(i, j, k), b = right.at(i, j, k);
        for (int d = 0; d < 3; ++d) max_err = std::max(max_err, std::abs(a[d] - b[d]));
      }
  CHECK(max_err <= 0.02);
}

TEST_CASE("warp_landmarks") {
  SUBCASE("zero field leaves points unchanged") {
    LandmarkSet s;
    s.entries.push_back({"a", {1.5, 2.0, 3.25}});
    s.entries.push_back({"b", {0.0, 0.0, 0.0}});
    const LandmarkSet w = warp_landmarks(s, DisplacementField::zeros({6, 6, 6}));
    CHECK(w.entries[0].position == s.entries[0].position);
    CHECK(w.entries[1].position == s.entries[1].position);
    CHECK(w.entries[0].id == "a");
  }
  SUBCASE("constant field translates every point") {
    LandmarkSet s;
    s.entries.push_back({"a", {1.0, 2.0, 1.5}});
    DisplacementField f = DisplacementField::zeros({6, 6, 6});
    for (std::int64_t v = 0; v < f.voxel_count(); ++v) f.vectors[3 * v + 2] = 2.0;
    const LandmarkSet w = warp_landmarks(s, f);
    CHECK(w.entries[0].position == Real3{1.0, 2.0, 3.5});
  }
  SUBCASE("trilinear sampling reproduces a linear field at fractional points") {
    DisplacementField f = DisplacementField::zeros({8, 8, 8});
    for (int k = 0; k < 8; ++k)
      for (int j = 0; j < 8; ++j)
        for (int i = 0; i < 8; ++i) f.set(i, j, k, {0.1 * i, 0.1 * j, 0.1 * k});
    LandmarkSet s;
    s.entries.push_back({"q", {2.25, 5.5, 3.75}});
    const LandmarkSet w = warp_landmarks(s, f);
    CHECK(w.entries[0].position[0] == doctest::Approx(2.25 * 1.1).epsilon(1e-12));
    CHECK(w.entries[0].position[1] == doctest::Approx(5.5 * 1.1).epsilon(1e-12));
    CHECK(w.entries[0].position[2] == doctest::Approx(3.75 * 1.1).epsilon(1e-12));
  }
  SUBCASE("out-of-domain point is rejected") {
    LandmarkSet s;
    s.entries.push_back({"a", {7.5, 0.0, 0.0}});
    CHECK_THROWS_AS(warp_landmarks(s, DisplacementField::zeros({6, 6, 6})),
                    std::invalid_argument);
  }
}

TEST_CASE("jacobian_stats") {
  SUBCASE("zero field has unit determinant everywhere") {
    const JacobianStats st = jacobian_stats(DisplacementField::zeros({5, 5, 5}));
    CHECK(st.nonpositive_fraction == 0.0);
    for (double d : st.det_volume.data) CHECK(d == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("linear field 0.5x has determinant 1.5^3") {
    DisplacementField f = DisplacementField::zeros({7, 7, 7});
    for (int k = 0; k < 7; ++k)
      for (int j = 0; j < 7; ++j)
        for (int i = 0; i < 7; ++i) f.set(i, j, k, {0.5 * i, 0.5 * j, 0.5 * k});
    const JacobianStats st = jacobian_stats(f);
    for (int k = 1; k < 6; ++k)
      for (int j = 1; j < 6; ++j)
        for (int i = 1; i < 6; ++i) {
          CHECK(std::abs(st.det_volume.at(i, j, k) - 3.375) < 1e-6);
        }
    CHECK(st.nonpositive_fraction == 0.0);
  }
  SUBCASE("reflection along x folds everywhere") {
    DisplacementField f = DisplacementField::zeros({6, 6, 6});
    for (int k = 0; k < 6; ++k)
      for (int j = 0; j < 6; ++j)
        for (int i = 0; i < 6; ++i) f.set(i, j, k, {-2.0 * i, 0.0, 0.0});
    const JacobianStats st = jacobian_stats(f);
    for (int k = 1; k < 5; ++k)
      for (int j = 1; j < 5; ++j)
        for (int i = 1; i < 5; ++i) {
          CHECK(st.det_volume.at(i, j, k) == doctest::Approx(-1.0).epsilon(1e-9));
        }
    CHECK(st.nonpositive_fraction > 0.0);
  }
  SUBCASE("orientation-preserving affine fields never fold") {
    // phi(x) = M x with I + M positive-determinant and diagonally dominant
    const double M[3][3] = {{0.2, 0.05, -0.1}, {0.08, -0.3, 0.04}, {-0.06, 0.02, 0.25}};
    DisplacementField f = DisplacementField::zeros({6, 7, 8});
    for (int k = 0; k < 8; ++k)
      for (int j = 0; j < 7; ++j)
        for (int i = 0; i < 6; ++i)
          f.set(i, j, k,
                {M[0][0] * i + M[0][1] * j + M[0][2] * k,
                 M[1][0] * i + M[1][1] * j + M[1][2] * k,
                 M[2][0] * i + M[2][1] * j + M[2][2] * k});
    const JacobianStats st = jacobian_stats(f);
    CHECK(st.nonpositive_fraction == 0.0);
    // analytic det(I+M)
    const double a = 1.2, b = 0.05, c = -0.1, d = 0.08, e = 0.7, g = 0.04, h = -0.06, p = 0.02,
                 q = 1.25;
    const double expected = a * (e * q - g * p) - b * (d * q - g * h) + c * (d * p - e * h);
    for (int k = 1; k < 7; ++k)
      for (int j = 1; j < 6; ++j)
        for (int i = 1; i < 5; ++i)
          CHECK(std::abs(st.det_volume.at(i, j, k) - expected) < 1e-6);
  }
}

TEST_CASE("resample_field reproduces constant fields exactly") {
  DisplacementField f = DisplacementField::zeros({5, 5, 5});
  for (std::int64_t v = 0; v < f.voxel_count(); ++v) {
    f.vectors[3 * v] = 0.6;
    f.vectors[3 * v + 1] = -1.1;
    f.vectors[3 * v + 2] = 0.25;
  }
  const DisplacementField up = resample_field(f, {10, 10, 10}, {0.5, 0.5, 0.5}, {2.0, 2.0, 2.0});
  for (std::int64_t v = 0; v < up.voxel_count(); ++v) {
    CHECK(up.vectors[3 * v] == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(up.vectors[3 * v + 1] == doctest::Approx(-2.2).epsilon(1e-12));
    CHECK(up.vectors[3 * v + 2] == doctest::Approx(0.5).epsilon(1e-12));
  }
}
