#include "cycreg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cycreg {

namespace {

void require_same_dims(const Index3& a, const Index3& b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

struct CenteredStats {
  std::vector<double> xc, yc;  // centered intensities
  double s;                    // <xc, yc>
  double x2, y2;               // squared norms
};

CenteredStats centered_stats(const Volume3D& x, const Volume3D& y) {
  require_same_dims(x.dims, y.dims, "cross_correlation");
  const auto [xmin, xmax] = std::minmax_element(x.data.begin(), x.data.end());
  if (*xmin == *xmax) throw std::invalid_argument("cross_correlation: first volume is constant");
  const auto [ymin, ymax] = std::minmax_element(y.data.begin(), y.data.end());
  if (*ymin == *ymax) throw std::invalid_argument("cross_correlation: second volume is constant");
  const std::size_t n = x.data.size();
  double xsum = 0.0, ysum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xsum += x.data[i];
    ysum += y.data[i];
  }
  const double xbar = xsum / double(n), ybar = ysum / double(n);
  CenteredStats st;
  st.xc.resize(n);
  st.yc.resize(n);
  st.s = st.x2 = st.y2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xc = x.data[i] - xbar, yc = y.data[i] - ybar;
    st.xc[i] = xc;
    st.yc[i] = yc;
    st.s += xc * yc;
    st.x2 += xc * xc;
    st.y2 += yc * yc;
  }
  if (st.x2 == 0.0 || st.y2 == 0.0) {
    throw std::invalid_argument("cross_correlation: zero denominator");
  }
  return st;
}

Volume3D volume_like(const Volume3D& geom, std::vector<double> data) {
  return Volume3D(geom.dims, geom.spacing_mm, geom.origin_mm, std::move(data));
}

void add_scaled(DisplacementField& dst, const DisplacementField& src, double s) {
  for (std::size_t i = 0; i < dst.vectors.size(); ++i) dst.vectors[i] += s * src.vectors[i];
}

double l1_difference(const Volume3D& u, const Volume3D& v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.data.size(); ++i) acc += std::abs(u.data[i] - v.data[i]);
  return acc;
}

Volume3D sign_difference(const Volume3D& u, const Volume3D& v) {
  std::vector<double> s(u.data.size());
  for (std::size_t i = 0; i < u.data.size(); ++i) {
    const double d = u.data[i] - v.data[i];
    s[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  }
  return volume_like(u, std::move(s));
}

}  // namespace

namespace detail {

CCWithGrad cross_correlation_with_grad(const Volume3D& x, const Volume3D& y, SimMode mode) {
  const CenteredStats st = centered_stats(x, y);
  CCWithGrad out;
  out.grad_x.resize(st.xc.size());
  if (mode == SimMode::as_written) {
    const double nx = std::sqrt(st.x2), ny = std::sqrt(st.y2);
    out.value = st.s * st.s / (nx * ny);
    const double c1 = 2.0 * st.s / (nx * ny);
    const double c2 = st.s * st.s / (nx * nx * nx * ny);
    for (std::size_t i = 0; i < st.xc.size(); ++i) {
      out.grad_x[i] = c1 * st.yc[i] - c2 * st.xc[i];
    }
  } else {
    out.value = st.s * st.s / (st.x2 * st.y2);
    const double c1 = 2.0 * st.s / (st.x2 * st.y2);
    const double c2 = 2.0 * st.s * st.s / (st.x2 * st.x2 * st.y2);
    for (std::size_t i = 0; i < st.xc.size(); ++i) {
      out.grad_x[i] = c1 * st.yc[i] - c2 * st.xc[i];
    }
  }
  return out;
}

double regularizer_value(const DisplacementField& f, RegMode reg) {
  if (reg == RegMode::magnitude) {
    double acc = 0.0;
    for (double v : f.vectors) acc += v * v;
    return std::sqrt(acc);
  }
  // forward-difference gradient magnitude
  const int nx = f.dims[0], ny = f.dims[1], nz = f.dims[2];
  double acc = 0.0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Real3 v = f.at(i, j, k);
        if (i + 1 < nx) {
          const Real3 u = f.at(i + 1, j, k);
          for (int c = 0; c < 3; ++c) acc += (u[c] - v[c]) * (u[c] - v[c]);
        }
        if (j + 1 < ny) {
          const Real3 u = f.at(i, j + 1, k);
          for (int c = 0; c < 3; ++c) acc += (u[c] - v[c]) * (u[c] - v[c]);
        }
        if (k + 1 < nz) {
          const Real3 u = f.at(i, j, k + 1);
          for (int c = 0; c < 3; ++c) acc += (u[c] - v[c]) * (u[c] - v[c]);
        }
      }
  return std::sqrt(acc);
}

RegWithGrad regularizer_with_grad(const DisplacementField& f, RegMode reg) {
  RegWithGrad out{regularizer_value(f, reg), DisplacementField::zeros(f.dims)};
  if (out.value == 0.0) return out;  // subgradient 0 at the kink
  if (reg == RegMode::magnitude) {
    for (std::size_t i = 0; i < f.vectors.size(); ++i) {
      out.grad.vectors[i] = f.vectors[i] / out.value;
    }
    return out;
  }
  const int nx = f.dims[0], ny = f.dims[1], nz = f.dims[2];
  auto accumulate = [&](std::int64_t lo, std::int64_t hi) {
    for (int c = 0; c < 3; ++c) {
      const double d = (f.vectors[hi + c] - f.vectors[lo + c]) / out.value;
      out.grad.vectors[hi + c] += d;
      out.grad.vectors[lo + c] -= d;
    }
  };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::int64_t b = f.base(i, j, k);
        if (i + 1 < nx) accumulate(b, f.base(i + 1, j, k));
        if (j + 1 < ny) accumulate(b, f.base(i, j + 1, k));
        if (k + 1 < nz) accumulate(b, f.base(i, j, k + 1));
      }
  return out;
}

}  // namespace detail

double cross_correlation(const Volume3D& x, const Volume3D& y, SimMode mode) {
  const CenteredStats st = centered_stats(x, y);
  if (mode == SimMode::as_written) {
    return st.s * st.s / (std::sqrt(st.x2) * std::sqrt(st.y2));
  }
  return st.s * st.s / (st.x2 * st.y2);
}

double registration_loss(const Volume3D& moving, const Volume3D& fixed,
                         const DisplacementField& field, double lambda, SimMode mode,
                         RegMode reg) {
  require_same_dims(moving.dims, fixed.dims, "registration_loss");
  const Volume3D warped = warp(moving, field);
  return -cross_correlation(warped, fixed, mode) + lambda * detail::regularizer_value(field, reg);
}

double cycle_loss(const Volume3D& a, const Volume3D& b, const DisplacementField& phi_ab,
                  const DisplacementField& phi_ba) {
  require_same_dims(a.dims, b.dims, "cycle_loss");
  require_same_dims(a.dims, phi_ab.dims, "cycle_loss");
  require_same_dims(a.dims, phi_ba.dims, "cycle_loss");
  const Volume3D a_cycled = warp(warp(a, phi_ab), phi_ba);
  const Volume3D b_cycled = warp(warp(b, phi_ba), phi_ab);
  return l1_difference(a_cycled, a) + l1_difference(b_cycled, b);
}

double identity_loss(const Volume3D& a, const Volume3D& b, const DisplacementField& phi_aa,
                     const DisplacementField& phi_bb, SimMode mode) {
  return -cross_correlation(warp(a, phi_aa), a, mode) -
         cross_correlation(warp(b, phi_bb), b, mode);
}

LossBreakdown total_loss(const Volume3D& a, const Volume3D& b, const DisplacementField& phi_ab,
                         const DisplacementField& phi_ba, const DisplacementField& phi_aa,
                         const DisplacementField& phi_bb, const LossWeights& w, SimMode mode,
                         RegMode reg) {
  LossBreakdown out;
  out.regist_ab = registration_loss(a, b, phi_ab, w.lambda, mode, reg);
  out.regist_ba = registration_loss(b, a, phi_ba, w.lambda, mode, reg);
  out.cycle = cycle_loss(a, b, phi_ab, phi_ba);
  out.identity = identity_loss(a, b, phi_aa, phi_bb, mode);
  out.total = out.regist_ab + out.regist_ba + w.alpha * out.cycle + w.beta * out.identity;
  return out;
}

TotalLossGradient total_loss_gradient(const Volume3D& a, const Volume3D& b,
                                      const DisplacementField& phi_ab,
                                      const DisplacementField& phi_ba,
                                      const DisplacementField& phi_aa,
                                      const DisplacementField& phi_bb, const LossWeights& w,
                                      SimMode mode, RegMode reg) {
  TotalLossGradient out;
  out.d_phi_ab = DisplacementField::zeros(phi_ab.dims);
  out.d_phi_ba = DisplacementField::zeros(phi_ba.dims);
  out.d_phi_aa = DisplacementField::zeros(phi_aa.dims);
  out.d_phi_bb = DisplacementField::zeros(phi_bb.dims);

  // registration terms
  const Volume3D wa = warp(a, phi_ab);
  const Volume3D wb = warp(b, phi_ba);
  const auto cc_ab = detail::cross_correlation_with_grad(wa, b, mode);
  const auto cc_ba = detail::cross_correlation_with_grad(wb, a, mode);
  const auto reg_ab = detail::regularizer_with_grad(phi_ab, reg);
  const auto reg_ba = detail::regularizer_with_grad(phi_ba, reg);
  out.value.regist_ab = -cc_ab.value + w.lambda * reg_ab.value;
  out.value.regist_ba = -cc_ba.value + w.lambda * reg_ba.value;

  {
    std::vector<double> up(cc_ab.grad_x.size());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = -cc_ab.grad_x[i];
    add_scaled(out.d_phi_ab, warp_gradient(a, phi_ab, volume_like(a, std::move(up))), 1.0);
    add_scaled(out.d_phi_ab, reg_ab.grad, w.lambda);
  }
  {
    std::vector<double> up(cc_ba.grad_x.size());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = -cc_ba.grad_x[i];
    add_scaled(out.d_phi_ba, warp_gradient(b, phi_ba, volume_like(b, std::move(up))), 1.0);
    add_scaled(out.d_phi_ba, reg_ba.grad, w.lambda);
  }

  // cycle term: re-deform the deformed volumes with the opposite fields
  const Volume3D a_cycled = warp(wa, phi_ba);
  const Volume3D b_cycled = warp(wb, phi_ab);
  out.value.cycle = l1_difference(a_cycled, a) + l1_difference(b_cycled, b);
  if (w.alpha != 0.0) {
    const Volume3D r1 = sign_difference(a_cycled, a);
    add_scaled(out.d_phi_ba, warp_gradient(wa, phi_ba, r1), w.alpha);
    add_scaled(out.d_phi_ab, warp_gradient(a, phi_ab, warp_adjoint(phi_ba, r1)), w.alpha);
    const Volume3D r2 = sign_difference(b_cycled, b);
    add_scaled(out.d_phi_ab, warp_gradient(wb, phi_ab, r2), w.alpha);
    add_scaled(out.d_phi_ba, warp_gradient(b, phi_ba, warp_adjoint(phi_ab, r2)), w.alpha);
  }

  // identity term on the self-pair fields
  const Volume3D waa = warp(a, phi_aa);
  const Volume3D wbb = warp(b, phi_bb);
  const auto cc_aa = detail::cross_correlation_with_grad(waa, a, mode);
  const auto cc_bb = detail::cross_correlation_with_grad(wbb, b, mode);
  out.value.identity = -cc_aa.value - cc_bb.value;
  if (w.beta != 0.0) {
    std::vector<double> up_a(cc_aa.grad_x.size());
    for (std::size_t i = 0; i < up_a.size(); ++i) up_a[i] = -cc_aa.grad_x[i];
    add_scaled(out.d_phi_aa, warp_gradient(a, phi_aa, volume_like(a, std::move(up_a))), w.beta);
    std::vector<double> up_b(cc_bb.grad_x.size());
    for (std::size_t i = 0; i < up_b.size(); ++i) up_b[i] = -cc_bb.grad_x[i];
    add_scaled(out.d_phi_bb, warp_gradient(b, phi_bb, volume_like(b, std::move(up_b))), w.beta);
  }

  out.value.total = out.value.regist_ab + out.value.regist_ba + w.alpha * out.value.cycle +
                    w.beta * out.value.identity;
  return out;
}

}  // namespace cycreg
