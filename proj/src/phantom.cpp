#include "cycreg/phantom.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "cycreg/rng.hpp"

namespace cycreg {

namespace {

using nlohmann::json;

constexpr double two_pi = 2.0 * std::numbers::pi;

/// Smoothstep apodization toward the faces (flat 1 on the interior, 0 at and
/// beyond the domain edges). Emulates an organ embedded in air so that the
/// zero-padding warp convention sees a consistent background.
double edge_window(double u) {  // u = coordinate / (dim-1)
  constexpr double m = 0.15;
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double t = std::min({u / m, (1.0 - u) / m, 1.0});
  return t * t * (3.0 - 2.0 * t);
}

struct SphereBlob {
  Real3 center;
  double sigma;
  double amplitude;
};

/// Closed-form intensity models, evaluable at any continuous coordinate.
struct IntensityModel {
  PhantomKind kind;
  std::vector<SphereBlob> blobs;             // spheres
  Real3 ramp_coeff{0.0, 0.0, 0.0};           // ramp
  double ramp_scale = 1.0;
  std::array<std::array<int, 3>, 3> freq{};  // perlin-smooth
  std::array<std::array<double, 3>, 3> phase{};
  Index3 dims{};

  double eval(double px, double py, double pz) const {
    switch (kind) {
      case PhantomKind::spheres: {
        double acc = 0.0;
        for (const auto& b : blobs) {
          const double dx = px - b.center[0], dy = py - b.center[1], dz = pz - b.center[2];
          acc += b.amplitude * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * b.sigma * b.sigma));
        }
        return acc / double(blobs.size());
      }
      case PhantomKind::ramp:
        return (ramp_coeff[0] * px + ramp_coeff[1] * py + ramp_coeff[2] * pz) * ramp_scale;
      case PhantomKind::perlin_smooth: {
        // window(p) * (1/2 + 1/6 * sum_{j=1..3} prod_d cos(2*pi*f[j][d]*p_d/n_d + phase[j][d]))
        double acc = 0.0;
        const double p[3] = {px, py, pz};
        double win = 1.0;
        for (int d = 0; d < 3; ++d) win *= edge_window(p[d] / double(dims[d] - 1));
        if (win == 0.0) return 0.0;
        for (int j = 0; j < 3; ++j) {
          double prod = 1.0;
          for (int d = 0; d < 3; ++d) {
            prod *= std::cos(two_pi * freq[j][d] * p[d] / double(dims[d]) + phase[j][d]);
          }
          acc += prod;
        }
        return win * (0.5 + acc / 6.0);
      }
    }
    return 0.0;
  }
};

IntensityModel build_model(const PhantomSpec& spec, SplitMix64& rng) {
  IntensityModel m;
  m.kind = spec.kind;
  m.dims = spec.dims;
  switch (spec.kind) {
    case PhantomKind::spheres: {
      const int count = 6;
      const double min_dim = double(std::min({spec.dims[0], spec.dims[1], spec.dims[2]}));
      for (int i = 0; i < count; ++i) {
        SphereBlob b;
        for (int d = 0; d < 3; ++d) {
          b.center[d] = rng.uniform(0.2, 0.8) * (spec.dims[d] - 1);
        }
        b.sigma = rng.uniform(0.08, 0.18) * min_dim;
        b.amplitude = rng.uniform(0.5, 1.0);
        m.blobs.push_back(b);
      }
      break;
    }
    case PhantomKind::ramp: {
      double denom = 0.0;
      for (int d = 0; d < 3; ++d) {
        m.ramp_coeff[d] = rng.uniform(0.5, 1.5);
        denom += m.ramp_coeff[d] * (spec.dims[d] - 1);
      }
      m.ramp_scale = 1.0 / denom;
      break;
    }
    case PhantomKind::perlin_smooth: {
      for (int j = 0; j < 3; ++j)
        for (int d = 0; d < 3; ++d) {
          m.freq[j][d] = rng.uniform_int(1, 3);
          m.phase[j][d] = rng.uniform(0.0, two_pi);
        }
      break;
    }
  }
  return m;
}

double apply_contrast(const Contrast& contrast, double v) {
  return std::visit(
      [v](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ContrastNone>) {
          return v;
        } else if constexpr (std::is_same_v<T, ContrastAffine>) {
          return c.c * v + c.d;
        } else {
          return std::pow(std::max(v, 0.0), c.g);
        }
      },
      contrast);
}

}  // namespace

Real3 analytic_displacement(const Deformation& def, const PhantomSpec& spec, double px, double py,
                            double pz) {
  // sinusoid phases come from a stream independent of the intensity model
  return std::visit(
      [&](const auto& d) -> Real3 {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Translation>) {
          return d.t;
        } else if constexpr (std::is_same_v<T, Affine>) {
          return {d.m[0] * px + d.m[1] * py + d.m[2] * pz,
                  d.m[3] * px + d.m[4] * py + d.m[5] * pz,
                  d.m[6] * px + d.m[7] * py + d.m[8] * pz};
        } else if constexpr (std::is_same_v<T, Sinusoid>) {
          SplitMix64 rng(spec.seed ^ 0x5deece66dULL);
          Real3 out;
          const double p[3] = {px, py, pz};
          for (int axis = 0; axis < 3; ++axis) {
            const double phase = rng.uniform(0.0, two_pi);
            out[axis] = d.amplitude * std::sin(two_pi * p[axis] / d.period + phase);
          }
          return out;
        } else {
          Real3 out{0.0, 0.0, 0.0};
          const double p[3] = {px, py, pz};
          out[d.axis] = -2.0 * p[d.axis];
          return out;
        }
      },
      def);
}

PhantomData generate(const PhantomSpec& spec) {
  validate_geometry(spec.dims, {1.0, 1.0, 1.0});
  if (const auto* s = std::get_if<Sinusoid>(&spec.deformation)) {
    if (!(s->period > 0.0)) throw std::invalid_argument("sinusoid period must be positive");
    if (!(s->amplitude >= 0.0) || s->amplitude >= s->period / two_pi) {
      throw std::invalid_argument("sinusoid amplitude must satisfy amplitude < period/(2*pi)");
    }
  }
  if (const auto* r = std::get_if<ReflectionAxis>(&spec.deformation)) {
    if (r->axis < 0 || r->axis > 2) throw std::invalid_argument("reflection axis must be 0..2");
  }

  SplitMix64 rng(spec.seed);
  const IntensityModel model = build_model(spec, rng);

  PhantomData out;
  out.moving = Volume3D::filled(spec.dims, 0.0);
  out.fixed = Volume3D::filled(spec.dims, 0.0);
  out.truth = DisplacementField::zeros(spec.dims);
  for (int k = 0; k < spec.dims[2]; ++k)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int i = 0; i < spec.dims[0]; ++i) {
        const Real3 d = analytic_displacement(spec.deformation, spec, i, j, k);
        out.truth.set(i, j, k, d);
        out.moving.at(i, j, k) = model.eval(i, j, k);
        out.fixed.at(i, j, k) =
            apply_contrast(spec.contrast, model.eval(i + d[0], j + d[1], k + d[2]));
      }
  return out;
}

double endpoint_error(const DisplacementField& estimate, const DisplacementField& truth,
                      int margin) {
  if (estimate.dims != truth.dims) {
    throw std::invalid_argument("endpoint_error: dimension mismatch");
  }
  if (margin < 0) throw std::invalid_argument("endpoint_error: margin must be >= 0");
  for (int d = 0; d < 3; ++d) {
    if (2 * margin >= truth.dims[d]) {
      throw std::invalid_argument("endpoint_error: margin too large for axis " +
                                  std::to_string(d));
    }
  }
  double acc = 0.0;
  std::int64_t count = 0;
  for (int k = margin; k < truth.dims[2] - margin; ++k)
    for (int j = margin; j < truth.dims[1] - margin; ++j)
      for (int i = margin; i < truth.dims[0] - margin; ++i) {
        const Real3 e = estimate.at(i, j, k);
        const Real3 t = truth.at(i, j, k);
        const double dx = e[0] - t[0], dy = e[1] - t[1], dz = e[2] - t[2];
        acc += std::sqrt(dx * dx + dy * dy + dz * dz);
        ++count;
      }
  return acc / double(count);
}

namespace {

PhantomKind kind_from_string(const std::string& s) {
  if (s == "spheres") return PhantomKind::spheres;
  if (s == "ramp") return PhantomKind::ramp;
  if (s == "perlin-smooth") return PhantomKind::perlin_smooth;
  throw std::runtime_error("unknown phantom kind '" + s + "'");
}

const char* kind_to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::spheres: return "spheres";
    case PhantomKind::ramp: return "ramp";
    case PhantomKind::perlin_smooth: return "perlin-smooth";
  }
  return "?";
}

Deformation deformation_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "translation") {
    Translation t;
    t.t = j.at("t").get<Real3>();
    return t;
  }
  if (type == "affine") {
    Affine a;
    a.m = j.at("matrix").get<std::array<double, 9>>();
    return a;
  }
  if (type == "sinusoid") {
    Sinusoid s;
    s.amplitude = j.at("amplitude").get<double>();
    s.period = j.at("period").get<double>();
    return s;
  }
  if (type == "reflection-axis") {
    ReflectionAxis r;
    r.axis = j.at("axis").get<int>();
    return r;
  }
  throw std::runtime_error("unknown deformation type '" + type + "'");
}

json deformation_to_json(const Deformation& def) {
  return std::visit(
      [](const auto& d) -> json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Translation>) {
          return {{"type", "translation"}, {"t", d.t}};
        } else if constexpr (std::is_same_v<T, Affine>) {
          return {{"type", "affine"}, {"matrix", d.m}};
        } else if constexpr (std::is_same_v<T, Sinusoid>) {
          return {{"type", "sinusoid"}, {"amplitude", d.amplitude}, {"period", d.period}};
        } else {
          return {{"type", "reflection-axis"}, {"axis", d.axis}};
        }
      },
      def);
}

Contrast contrast_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "none") return ContrastNone{};
  if (type == "affine") {
    ContrastAffine c;
    c.c = j.at("c").get<double>();
    c.d = j.at("d").get<double>();
    return c;
  }
  if (type == "gamma") {
    ContrastGamma g;
    g.g = j.at("g").get<double>();
    return g;
  }
  throw std::runtime_error("unknown contrast type '" + type + "'");
}

json contrast_to_json(const Contrast& contrast) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ContrastNone>) {
          return {{"type", "none"}};
        } else if constexpr (std::is_same_v<T, ContrastAffine>) {
          return {{"type", "affine"}, {"c", c.c}, {"d", c.d}};
        } else {
          return {{"type", "gamma"}, {"g", c.g}};
        }
      },
      contrast);
}

}  // namespace

PhantomSpec phantom_spec_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("malformed phantom spec: ") + e.what());
  }
  PhantomSpec spec;
  try {
    spec.dims = j.at("dims").get<Index3>();
    spec.kind = kind_from_string(j.at("kind").get<std::string>());
    spec.deformation = deformation_from_json(j.at("deformation"));
    if (j.contains("contrast")) spec.contrast = contrast_from_json(j.at("contrast"));
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad phantom spec: ") + e.what());
  }
  return spec;
}

PhantomSpec load_phantom_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open phantom spec: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return phantom_spec_from_json_string(text);
}

std::string phantom_spec_to_json_string(const PhantomSpec& spec) {
  json j;
  j["dims"] = spec.dims;
  j["kind"] = kind_to_string(spec.kind);
  j["deformation"] = deformation_to_json(spec.deformation);
  j["contrast"] = contrast_to_json(spec.contrast);
  j["seed"] = spec.seed;
  return j.dump(2);
}

}  // namespace cycreg
