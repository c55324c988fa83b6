#pragma once

#include "cycreg/field.hpp"
#include "cycreg/volume.hpp"

namespace cycreg {

/// Cross-correlation flavor. `as_written` keeps first powers of the centered
/// norms in the denominator; `normalized` divides by the squared norms,
/// giving a value in [0,1] that is invariant to affine intensity remaps.
enum class SimMode { as_written, normalized };

/// Regularizer flavor: Euclidean magnitude of the field, or Euclidean
/// magnitude of its forward-difference gradient.
enum class RegMode { magnitude, gradient };

struct LossWeights {
  double lambda = 0.0;  // regularization weight inside each registration loss
  double alpha = 0.0;   // cycle weight
  double beta = 0.0;    // identity weight
};

struct LossBreakdown {
  double regist_ab = 0.0;
  double regist_ba = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
  double total = 0.0;
};

/// Cross-correlation of two volumes over centered intensities:
/// <x-xbar, y-ybar>^2 divided by ||x-xbar||*||y-ybar|| (as_written) or by the
/// squared norms (normalized). Throws on constant input.
double cross_correlation(const Volume3D& x, const Volume3D& y, SimMode mode);

/// -(warp(moving,field) (x) fixed) + lambda * reg(field), with reg the field
/// magnitude ||phi||_2 by default.
double registration_loss(const Volume3D& moving, const Volume3D& fixed,
                         const DisplacementField& field, double lambda, SimMode mode,
                         RegMode reg = RegMode::magnitude);

/// ||warp(warp(a,phi_ab),phi_ba) - a||_1 + ||warp(warp(b,phi_ba),phi_ab) - b||_1.
/// The re-deformation reuses the same two fields (inverse-consistency form).
double cycle_loss(const Volume3D& a, const Volume3D& b, const DisplacementField& phi_ab,
                  const DisplacementField& phi_ba);

/// -(warp(a,phi_aa) (x) a) - (warp(b,phi_bb) (x) b) for the self-pair fields.
double identity_loss(const Volume3D& a, const Volume3D& b, const DisplacementField& phi_aa,
                     const DisplacementField& phi_bb, SimMode mode);

/// total = regist_ab + regist_ba + alpha*cycle + beta*identity.
LossBreakdown total_loss(const Volume3D& a, const Volume3D& b, const DisplacementField& phi_ab,
                         const DisplacementField& phi_ba, const DisplacementField& phi_aa,
                         const DisplacementField& phi_bb, const LossWeights& w, SimMode mode,
                         RegMode reg = RegMode::magnitude);

struct TotalLossGradient {
  LossBreakdown value;
  DisplacementField d_phi_ab;
  DisplacementField d_phi_ba;
  DisplacementField d_phi_aa;
  DisplacementField d_phi_bb;
};

/// Analytic gradient of total_loss with respect to every field component.
/// The cycle term chains through both warps: the inner field's gradient
/// passes through the outer warp's spatial sampling via warp_adjoint.
TotalLossGradient total_loss_gradient(const Volume3D& a, const Volume3D& b,
                                      const DisplacementField& phi_ab,
                                      const DisplacementField& phi_ba,
                                      const DisplacementField& phi_aa,
                                      const DisplacementField& phi_bb, const LossWeights& w,
                                      SimMode mode, RegMode reg = RegMode::magnitude);

namespace detail {

/// Cross-correlation value plus its gradient with respect to x.
struct CCWithGrad {
  double value;
  std::vector<double> grad_x;
};
CCWithGrad cross_correlation_with_grad(const Volume3D& x, const Volume3D& y, SimMode mode);

/// Regularizer value plus gradient wrt the field (unit weight).
struct RegWithGrad {
  double value;
  DisplacementField grad;
};
RegWithGrad regularizer_with_grad(const DisplacementField& f, RegMode reg);
double regularizer_value(const DisplacementField& f, RegMode reg);

}  // namespace detail

}  // namespace cycreg
