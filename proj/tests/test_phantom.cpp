#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cycreg/losses.hpp"
#include "cycreg/phantom.hpp"
#include "support.hpp"

using namespace cycreg;

namespace {

Volume3D interior_crop(const Volume3D& v, int margin) {
  const Index3 dims{v.dims[0] - 2 * margin, v.dims[1] - 2 * margin, v.dims[2] - 2 * margin};
  Volume3D out = Volume3D::filled(dims, 0.0);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i)
        out.at(i, j, k) = v.at(i + margin, j + margin, k + margin);
  return out;
}

}  // namespace

TEST_CASE("generate is deterministic given the seed") {
  PhantomSpec spec;
  spec.dims = {12, 12, 12};
  spec.kind = PhantomKind::perlin_smooth;
  spec.deformation = Sinusoid{0.8, 10.0};
  spec.seed = 77;
  const PhantomData p1 = generate(spec);
  const PhantomData p2 = generate(spec);
  CHECK(p1.moving.data == p2.moving.data);
  CHECK(p1.fixed.data == p2.fixed.data);
  CHECK(p1.truth.vectors == p2.truth.vectors);
  spec.seed = 78;
  const PhantomData p3 = generate(spec);
  CHECK(p1.moving.data != p3.moving.data);
}

TEST_CASE("translation phantom has a constant truth field") {
  PhantomSpec spec;
  spec.dims = {10, 10, 10};
  spec.kind = PhantomKind::spheres;
  spec.deformation = Translation{{2.0, 0.0, 0.0}};
  spec.seed = 5;
  const PhantomData p = generate(spec);
  for (std::int64_t v = 0; v < p.truth.voxel_count(); ++v) {
    CHECK(p.truth.vectors[3 * v] == 2.0);
    CHECK(p.truth.vectors[3 * v + 1] == 0.0);
    CHECK(p.truth.vectors[3 * v + 2] == 0.0);
  }
  // fixed is the analytic shift of moving: interior voxels match exactly
  for (int k = 0; k < 10; ++k)
    for (int j = 0; j < 10; ++j)
      for (int i = 0; i < 8; ++i)
        CHECK(p.fixed.at(i, j, k) == doctest::Approx(p.moving.at(i + 2, j, k)).epsilon(1e-12));
}

TEST_CASE("affine phantom reproduces the analytic jacobian") {
  PhantomSpec spec;
  spec.dims = {9, 9, 9};
  spec.kind = PhantomKind::perlin_smooth;
  Affine aff;
  aff.m = {0.5, 0, 0, 0, 0.5, 0, 0, 0, 0.5};
  spec.deformation = aff;
  const PhantomData p = generate(spec);
  for (int k = 0; k < 9; ++k)
    for (int j = 0; j < 9; ++j)
      for (int i = 0; i < 9; ++i) {
        const Real3 t = p.truth.at(i, j, k);
        CHECK(t[0] == doctest::Approx(0.5 * i).epsilon(1e-12));
        CHECK(t[1] == doctest::Approx(0.5 * j).epsilon(1e-12));
        CHECK(t[2] == doctest::Approx(0.5 * k).epsilon(1e-12));
      }
  const JacobianStats st = jacobian_stats(p.truth);
  for (int k = 1; k < 8; ++k)
    for (int j = 1; j < 8; ++j)
      for (int i = 1; i < 8; ++i)
        CHECK(std::abs(st.det_volume.at(i, j, k) - 3.375) < 1e-6);
}

TEST_CASE("degenerate sinusoid gives an identical pair with zero truth") {
  PhantomSpec spec;
  spec.dims = {8, 8, 8};
  spec.kind = PhantomKind::ramp;
  spec.deformation = Sinusoid{0.0, 8.0};
  const PhantomData p = generate(spec);
  for (double v : p.truth.vectors) CHECK(v == 0.0);
  CHECK(p.moving.data == p.fixed.data);
}

TEST_CASE("fold-free truth fields show zero folding") {
  PhantomSpec spec;
  spec.dims = {16, 16, 16};
  spec.kind = PhantomKind::perlin_smooth;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    spec.seed = seed;
    spec.deformation = Sinusoid{0.9 * 8.0 / (2.0 * 3.14159265358979), 8.0};
    const PhantomData p = generate(spec);
    CHECK(jacobian_stats(p.truth).nonpositive_fraction == 0.0);
  }
}

TEST_CASE("reflection phantom folds") {
  PhantomSpec spec;
  spec.dims = {8, 8, 8};
  spec.kind = PhantomKind::spheres;
  spec.deformation = ReflectionAxis{1};
  const PhantomData p = generate(spec);
  const JacobianStats st = jacobian_stats(p.truth);
  CHECK(st.nonpositive_fraction > 0.0);
}

TEST_CASE("sinusoid amplitude at or above the fold-free bound is rejected") {
  PhantomSpec spec;
  spec.dims = {8, 8, 8};
  spec.deformation = Sinusoid{8.0 / (2.0 * 3.14159265358979), 8.0};
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("contrast-affine pairs stay highly correlated under the truth warp") {
  PhantomSpec spec;
  spec.dims = {24, 24, 24};
  spec.kind = PhantomKind::perlin_smooth;
  spec.contrast = ContrastAffine{1.3, -0.08};
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    spec.seed = seed;
    spec.deformation = Translation{{1.6, -2.0, 0.8}};
    const PhantomData p = generate(spec);
    const Volume3D warped = warp(p.moving, p.truth);
    // crop past the apodization ramp (0.15 of the extent) plus the shift
    const int margin = 7;
    const double cc = cross_correlation(interior_crop(warped, margin),
                                        interior_crop(p.fixed, margin), SimMode::normalized);
    CHECK(cc > 0.999);
  }
}

TEST_CASE("gamma contrast never produces non-finite intensities") {
  PhantomSpec spec;
  spec.dims = {10, 10, 10};
  spec.kind = PhantomKind::ramp;  // linear model goes negative outside the domain
  spec.deformation = Translation{{-3.0, -3.0, -3.0}};
  spec.contrast = ContrastGamma{0.5};
  const PhantomData p = generate(spec);
  for (double v : p.fixed.data) CHECK(std::isfinite(v));
}

TEST_CASE("endpoint_error") {
  SplitMix64 rng(401);
  const DisplacementField truth = testsupport::random_field(rng, {8, 8, 8}, 2.0);

  SUBCASE("zero for an exact estimate") { CHECK(endpoint_error(truth, truth, 1) == 0.0); }
  SUBCASE("constant offset of one voxel scores exactly one") {
    DisplacementField est = truth;
    for (std::int64_t v = 0; v < est.voxel_count(); ++v) est.vectors[3 * v] += 1.0;
    CHECK(endpoint_error(est, truth, 2) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("matches a direct per-voxel oracle") {
    const DisplacementField est = testsupport::random_field(rng, {8, 8, 8}, 2.0);
    const int margin = 2;
    double acc = 0.0;
    std::int64_t count = 0;
    for (int k = margin; k < 8 - margin; ++k)
      for (int j = margin; j < 8 - margin; ++j)
        for (int i = margin; i < 8 - margin; ++i) {
          const Real3 e = est.at(i, j, k), t = truth.at(i, j, k);
          acc += std::sqrt((e[0] - t[0]) * (e[0] - t[0]) + (e[1] - t[1]) * (e[1] - t[1]) +
                           (e[2] - t[2]) * (e[2] - t[2]));
          ++count;
        }
    CHECK(endpoint_error(est, truth, margin) ==
          doctest::Approx(acc / double(count)).epsilon(1e-12));
  }
  SUBCASE("margin covering the whole volume is rejected") {
    CHECK_THROWS_AS(endpoint_error(truth, truth, 4), std::invalid_argument);
  }
}

TEST_CASE("phantom spec json round-trip") {
  PhantomSpec spec;
  spec.dims = {32, 32, 24};
  spec.kind = PhantomKind::perlin_smooth;
  spec.deformation = Sinusoid{1.1, 9.0};
  spec.contrast = ContrastAffine{0.9, 0.05};
  spec.seed = 1234;
  const PhantomSpec back = phantom_spec_from_json_string(phantom_spec_to_json_string(spec));
  CHECK(back.dims == spec.dims);
  CHECK(back.kind == spec.kind);
  CHECK(back.seed == spec.seed);
  const auto* s = std::get_if<Sinusoid>(&back.deformation);
  REQUIRE(s != nullptr);
  CHECK(s->amplitude == 1.1);
  CHECK(s->period == 9.0);
  const auto* c = std::get_if<ContrastAffine>(&back.contrast);
  REQUIRE(c != nullptr);
  CHECK(c->c == 0.9);
  // identical volumes regenerate from the round-tripped spec
  CHECK(generate(spec).moving.data == generate(back).moving.data);
}

TEST_CASE("malformed phantom specs are rejected") {
  CHECK_THROWS_AS(phantom_spec_from_json_string("{"), std::runtime_error);
  CHECK_THROWS_AS(phantom_spec_from_json_string(R"({"dims":[8,8,8],"kind":"cube",)"
                                                R"("deformation":{"type":"translation","t":[0,0,0]}})"),
                  std::runtime_error);
  CHECK_THROWS_AS(phantom_spec_from_json_string(R"({"dims":[8,8,8],"kind":"ramp",)"
                                                R"("deformation":{"type":"spiral"}})"),
                  std::runtime_error);
}
