#include "cycreg/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace cycreg {

namespace {

using nlohmann::json;

bool is_constant(const Volume3D& v) {
  const auto [mn, mx] = std::minmax_element(v.data.begin(), v.data.end());
  return *mn == *mx;
}

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& st,
               const SolverConfig& cfg) {
  st.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(st.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = cfg.adam_beta1 * st.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
    st.v[i] = cfg.adam_beta2 * st.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
  }
}

Volume3D sign_difference(const Volume3D& u, const Volume3D& v) {
  std::vector<double> s(u.data.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = u.data[i] - v.data[i];
    s[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  }
  return Volume3D(u.dims, u.spacing_mm, u.origin_mm, std::move(s));
}

void add_scaled(DisplacementField& dst, const DisplacementField& src, double s) {
  for (std::size_t i = 0; i < dst.vectors.size(); ++i) dst.vectors[i] += s * src.vectors[i];
}

RegistrationResult run(const Volume3D& a, const Volume3D& b, const SolverConfig& cfg,
                       bool self_mode) {
  validate_config(cfg);
  if (a.dims != b.dims) {
    throw std::invalid_argument("register_pair: dimension mismatch " + std::to_string(a.dims[0]) +
                                "x" + std::to_string(a.dims[1]) + "x" + std::to_string(a.dims[2]) +
                                " vs " + std::to_string(b.dims[0]) + "x" +
                                std::to_string(b.dims[1]) + "x" + std::to_string(b.dims[2]));
  }
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t levels = cfg.pyramid_factors.size();
  RegistrationResult result;
  DisplacementField phi_ab, phi_ba;
  Index3 prev_factor{1, 1, 1};
  Volume3D av, bv;  // current-level volumes

  for (std::size_t L = 0; L < levels; ++L) {
    const Index3 f = cfg.pyramid_factors[L];
    av = (f == Index3{1, 1, 1}) ? a : downsample_trilinear(a, f);
    bv = (f == Index3{1, 1, 1}) ? b : downsample_trilinear(b, f);
    if (is_constant(av) || is_constant(bv)) {
      throw std::invalid_argument("register_pair: volume is constant at pyramid level " +
                                  std::to_string(L));
    }
    if (L == 0) {
      phi_ab = DisplacementField::zeros(av.dims);
      phi_ba = DisplacementField::zeros(av.dims);
    } else {
      Real3 coord_scale, vector_scale;
      for (int d = 0; d < 3; ++d) {
        coord_scale[d] = double(f[d]) / double(prev_factor[d]);
        vector_scale[d] = double(prev_factor[d]) / double(f[d]);
      }
      phi_ab = resample_field(phi_ab, av.dims, coord_scale, vector_scale);
      phi_ba = resample_field(phi_ba, av.dims, coord_scale, vector_scale);
    }
    prev_factor = f;

    AdamState adam_ab(phi_ab.vectors.size());
    AdamState adam_ba(phi_ba.vectors.size());
    for (int it = 0; it < cfg.iterations_per_level[L]; ++it) {
      DisplacementField g_ab, g_ba;
      const LossBreakdown lb = detail::pair_objective(av, bv, phi_ab, phi_ba, cfg.weights,
                                                      cfg.sim_mode, cfg.reg_mode, self_mode,
                                                      &g_ab, &g_ba);
      if (!std::isfinite(lb.total)) {
        throw divergence_error("register_pair: non-finite total loss at level " +
                                   std::to_string(L) + ", iteration " + std::to_string(it),
                               std::move(result.loss_trace));
      }
      result.loss_trace.push_back(lb);
      adam_step(phi_ab.vectors, g_ab.vectors, adam_ab, cfg);
      adam_step(phi_ba.vectors, g_ba.vectors, adam_ba, cfg);
    }
  }

  // final evaluation at the finest level
  const LossBreakdown final_lb =
      detail::pair_objective(av, bv, phi_ab, phi_ba, cfg.weights, cfg.sim_mode, cfg.reg_mode,
                             self_mode, nullptr, nullptr);
  if (!std::isfinite(final_lb.total)) {
    throw divergence_error("register_pair: non-finite final loss",
                           std::move(result.loss_trace));
  }
  result.loss_trace.push_back(final_lb);
  result.phi_ab = std::move(phi_ab);
  result.phi_ba = std::move(phi_ba);
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

namespace detail {

LossBreakdown pair_objective(const Volume3D& a, const Volume3D& b,
                             const DisplacementField& phi_ab, const DisplacementField& phi_ba,
                             const LossWeights& w, SimMode sim, RegMode reg, bool self_mode,
                             DisplacementField* g_ab, DisplacementField* g_ba) {
  LossBreakdown out;
  const bool with_grad = g_ab != nullptr && g_ba != nullptr;
  const Volume3D wa = warp(a, phi_ab);
  const Volume3D wb = warp(b, phi_ba);
  const auto cc_ab = cross_correlation_with_grad(wa, b, sim);
  const auto cc_ba = cross_correlation_with_grad(wb, a, sim);
  const auto reg_ab = regularizer_with_grad(phi_ab, reg);
  const auto reg_ba = regularizer_with_grad(phi_ba, reg);
  out.regist_ab = -cc_ab.value + w.lambda * reg_ab.value;
  out.regist_ba = -cc_ba.value + w.lambda * reg_ba.value;

  const Volume3D a_cycled = warp(wa, phi_ba);
  const Volume3D b_cycled = warp(wb, phi_ab);
  double cyc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) cyc += std::abs(a_cycled.data[i] - a.data[i]);
  for (std::size_t i = 0; i < b.data.size(); ++i) cyc += std::abs(b_cycled.data[i] - b.data[i]);
  out.cycle = cyc;

  // identity term only when self-pairs are scheduled (self mode)
  out.identity = self_mode ? (-cc_ab.value - cc_ba.value) : 0.0;
  out.total = out.regist_ab + out.regist_ba + w.alpha * out.cycle + w.beta * out.identity;
  if (!with_grad) return out;

  *g_ab = DisplacementField::zeros(phi_ab.dims);
  *g_ba = DisplacementField::zeros(phi_ba.dims);
  const double sim_scale = self_mode ? 1.0 + w.beta : 1.0;
  {
    std::vector<double> up(cc_ab.grad_x.size());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = -sim_scale * cc_ab.grad_x[i];
    add_scaled(*g_ab,
               warp_gradient(a, phi_ab, Volume3D(a.dims, a.spacing_mm, a.origin_mm,
                                                 std::move(up))),
               1.0);
    add_scaled(*g_ab, reg_ab.grad, w.lambda);
  }
  {
    std::vector<double> up(cc_ba.grad_x.size());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = -sim_scale * cc_ba.grad_x[i];
    add_scaled(*g_ba,
               warp_gradient(b, phi_ba, Volume3D(b.dims, b.spacing_mm, b.origin_mm,
                                                 std::move(up))),
               1.0);
    add_scaled(*g_ba, reg_ba.grad, w.lambda);
  }
  if (w.alpha != 0.0) {
    const Volume3D r1 = sign_difference(a_cycled, a);
    add_scaled(*g_ba, warp_gradient(wa, phi_ba, r1), w.alpha);
    add_scaled(*g_ab, warp_gradient(a, phi_ab, warp_adjoint(phi_ba, r1)), w.alpha);
    const Volume3D r2 = sign_difference(b_cycled, b);
    add_scaled(*g_ab, warp_gradient(wb, phi_ab, r2), w.alpha);
    add_scaled(*g_ba, warp_gradient(b, phi_ba, warp_adjoint(phi_ab, r2)), w.alpha);
  }
  return out;
}

}  // namespace detail

void validate_config(const SolverConfig& cfg) {
  auto finite_nonneg = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument(std::string("config: ") + name + " must be finite and >= 0");
    }
  };
  finite_nonneg(cfg.weights.lambda, "weights.lambda");
  finite_nonneg(cfg.weights.alpha, "weights.alpha");
  finite_nonneg(cfg.weights.beta, "weights.beta");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("config: learning_rate must be positive");
  }
  if (cfg.adam_beta1 < 0.0 || cfg.adam_beta1 >= 1.0 || cfg.adam_beta2 < 0.0 ||
      cfg.adam_beta2 >= 1.0) {
    throw std::invalid_argument("config: adam betas must lie in [0,1)");
  }
  if (!(cfg.adam_epsilon > 0.0)) {
    throw std::invalid_argument("config: adam_epsilon must be positive");
  }
  if (cfg.pyramid_factors.empty()) {
    throw std::invalid_argument("config: pyramid_factors must be nonempty");
  }
  if (cfg.pyramid_factors.back() != Index3{1, 1, 1}) {
    throw std::invalid_argument("config: last pyramid level must have factors (1,1,1)");
  }
  for (const auto& f : cfg.pyramid_factors) {
    if (f[0] < 1 || f[1] < 1 || f[2] < 1) {
      throw std::invalid_argument("config: pyramid factors must be >= 1");
    }
  }
  if (cfg.iterations_per_level.size() != cfg.pyramid_factors.size()) {
    throw std::invalid_argument(
        "config: iterations_per_level and pyramid_factors must have equal length");
  }
  for (int it : cfg.iterations_per_level) {
    if (it < 0) throw std::invalid_argument("config: iteration counts must be >= 0");
  }
}

RegistrationResult register_pair(const Volume3D& a, const Volume3D& b, const SolverConfig& cfg) {
  return run(a, b, cfg, /*self_mode=*/false);
}

RegistrationResult register_self(const Volume3D& a, const SolverConfig& cfg) {
  return run(a, a, cfg, /*self_mode=*/true);
}

const char* to_string(SimMode mode) {
  return mode == SimMode::as_written ? "as-written" : "normalized";
}

const char* to_string(RegMode mode) {
  return mode == RegMode::magnitude ? "magnitude" : "gradient";
}

SimMode sim_mode_from_string(const std::string& s) {
  if (s == "as-written") return SimMode::as_written;
  if (s == "normalized") return SimMode::normalized;
  throw std::invalid_argument("unknown sim_mode '" + s + "' (expected as-written|normalized)");
}

RegMode reg_mode_from_string(const std::string& s) {
  if (s == "magnitude") return RegMode::magnitude;
  if (s == "gradient") return RegMode::gradient;
  throw std::invalid_argument("unknown reg_mode '" + s + "' (expected magnitude|gradient)");
}

SolverConfig solver_config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("malformed config: ") + e.what());
  }
  SolverConfig cfg;
  static const char* known[] = {"weights",     "learning_rate", "iterations_per_level",
                                "pyramid_factors", "adam_beta1",    "adam_beta2",
                                "adam_epsilon",    "seed",          "sim_mode",
                                "reg_mode"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return it.key() == k; }) == std::end(known)) {
      throw std::runtime_error("config: unknown field '" + it.key() + "'");
    }
  }
  try {
    if (j.contains("weights")) {
      const json& w = j["weights"];
      if (w.contains("lambda")) cfg.weights.lambda = w["lambda"].get<double>();
      if (w.contains("alpha")) cfg.weights.alpha = w["alpha"].get<double>();
      if (w.contains("beta")) cfg.weights.beta = w["beta"].get<double>();
    }
    if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("iterations_per_level")) {
      cfg.iterations_per_level = j["iterations_per_level"].get<std::vector<int>>();
    }
    if (j.contains("pyramid_factors")) {
      cfg.pyramid_factors = j["pyramid_factors"].get<std::vector<Index3>>();
    }
    if (j.contains("adam_beta1")) cfg.adam_beta1 = j["adam_beta1"].get<double>();
    if (j.contains("adam_beta2")) cfg.adam_beta2 = j["adam_beta2"].get<double>();
    if (j.contains("adam_epsilon")) cfg.adam_epsilon = j["adam_epsilon"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("sim_mode")) cfg.sim_mode = sim_mode_from_string(j["sim_mode"].get<std::string>());
    if (j.contains("reg_mode")) cfg.reg_mode = reg_mode_from_string(j["reg_mode"].get<std::string>());
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad config field: ") + e.what());
  }
  validate_config(cfg);
  return cfg;
}

SolverConfig load_solver_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return solver_config_from_json_string(text);
}

std::string solver_config_to_json_string(const SolverConfig& cfg) {
  json j;
  j["weights"] = {{"lambda", cfg.weights.lambda},
                  {"alpha", cfg.weights.alpha},
                  {"beta", cfg.weights.beta}};
  j["learning_rate"] = cfg.learning_rate;
  j["iterations_per_level"] = cfg.iterations_per_level;
  j["pyramid_factors"] = cfg.pyramid_factors;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_epsilon"] = cfg.adam_epsilon;
  j["seed"] = cfg.seed;
  j["sim_mode"] = to_string(cfg.sim_mode);
  j["reg_mode"] = to_string(cfg.reg_mode);
  return j.dump(2);
}

}  // namespace cycreg
