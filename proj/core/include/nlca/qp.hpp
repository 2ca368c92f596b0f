#pragma once

#include "nlca/effectiveness.hpp"
#include "nlca/linalg.hpp"
#include "nlca/types.hpp"

namespace nlca {

// Affine snapshot of an effectiveness model around a linearization point:
// evaluate(u) = slope * u + offset. The box is copied from the source model
// so downstream solvers keep honoring the same deflection limits.
struct AffineLocalModel {
  Mat35 slope{};
  MomentVector offset{};
  BoxSet box{};

  MomentVector evaluate(const ControlVector& u) const;
};

// Linearizes `model` at (u0, sigma0). The offset is chosen so the affine
// model agrees with the nonlinear one exactly at u0.
AffineLocalModel linearize(const EffectivenessModel& model,
                           const ControlVector& u0,
                           const StateVector& sigma0);

// Same, but when the model reports an on-kink point (piecewise-linear
// variant), nudges u0 toward the box center by 1e-9 and retries once.
AffineLocalModel linearize_off_kink(const EffectivenessModel& model,
                                    const ControlVector& u0,
                                    const StateVector& sigma0);

// Weighted minimum-norm solution of g * u = tau:
//   u = W^-1 g^T [g W^-1 g^T]^-1 tau
// with w a symmetric positive definite weight on the controls, so u
// minimizes u^T w u among exact solutions. Throws
// ErrorCode::not_positive_definite when w fails its Cholesky test and
// ErrorCode::rank_deficient when the 3x3 Gram matrix g W^-1 g^T has a
// spectral condition number above 1e12 (or a nonpositive eigenvalue), since
// the inverse is then numerically meaningless.
ControlVector weighted_pinv(const Mat35& g, const Mat5& w,
                            const MomentVector& tau);

struct QpSolution {
  ControlVector u{};
  // (g u + offset - tau_d)^T W (g u + offset - tau_d) at u.
  double objective = 0.0;
  // Largest first-order optimality violation over the five variables: the
  // absolute residual-gradient component for free variables, its descent
  // portion for variables sitting on a bound.
  double kkt_residual = 0.0;
  int iterations = 0;
  // True when the solver gave up before meeting the KKT tolerance; `u` is
  // then the best (lowest objective) feasible iterate seen.
  bool iteration_limit = false;
};

// Minimizes (affine.evaluate(u) - tau_d)^T W (affine.evaluate(u) - tau_d)
// over `box` with a primal active-set method: solve the free-variable
// least-squares subproblem, step toward that solution clamping whichever
// variables hit their bounds, and release the lowest-index bound whose
// gradient sign admits descent. Ties in a rank-deficient free subproblem
// are resolved toward the smallest Euclidean norm of the free variables.
// Bounds with lower == upper pin that variable permanently.
QpSolution solve_box_qp(const AffineLocalModel& affine,
                        const MomentVector& tau_d, const WeightMatrix& w,
                        const BoxSet& box);

// Per-call affine baseline: linearize `model` at (u_prev, sigma), solve the
// box QP for tau_d, return the admissible solution. u_prev doubles as the
// warm-start linearization point; trajectory code feeds the previous
// allocation back in, first calls use the box center.
ControlVector allocate_affine(const EffectivenessModel& model,
                              const MomentVector& tau_d,
                              const StateVector& sigma,
                              const ControlVector& u_prev,
                              const WeightMatrix& w, const BoxSet& box);

}  // namespace nlca
