#pragma once

#include <memory>
#include <string>

#include "nlca/types.hpp"

namespace nlca {

// Coefficients of the synthetic flying-wing moment model. The smooth variant
// is polynomial in the deflections; the piecewise-linear variant replaces the
// elevator term and the alpha-gain factors with a two-segment ramp (slope 1
// up to 10, slope 0.5 beyond) and drops the quadratic elevator term.
//
//   e  = elevator deflection
//   sL = clam7U + clam7L     (left clamshell sum, symmetric opening)
//   sR = clam8U + clam8L
//   fL = clam7U - clam7L     (left clamshell spread, drag flap)
//   fR = clam8U - clam8L
//
//   Cl = c_le (sL - sR)(1 + 0.01 a) + c_lb e b
//   Cm = c_me e (1 + 0.02 a) + c_ms (sL + sR) + c_m2 e|e| + c_ma (sL + sR) a
//   Cn = c_nf (fL - fR)(1 + 0.01 a) + c_na (sL - sR) a
//
// with a = alpha, b = beta in degrees. Every term carries a deflection
// factor, so zero deflection gives zero moment at any flight condition.
struct SyntheticModelParams {
  double c_le = 4.0e-4;
  double c_lb = -1.0e-5;
  double c_me = -1.0e-3;
  double c_ma = 0.0;
  double c_m2 = -5.0e-6;
  double c_ms = -2.0e-4;
  double c_nf = 2.5e-4;
  double c_na = 1.0e-5;
  bool pwl_variant = false;
};

// Clamp onto the box, component-wise. Total and idempotent.
ControlVector project_box(const ControlVector& u, const BoxSet& box);

MomentVector eval_synthetic(const ControlVector& u, const StateVector& sigma,
                            const SyntheticModelParams& p);

// Analytic partials of the moments with respect to the deflections, row-major
// 3x5. The piecewise-linear variant is undefined exactly at a ramp breakpoint
// and raises pwl_breakpoint there; callers pick a side by nudging.
Mat35 jacobian_synthetic(const ControlVector& u, const StateVector& sigma,
                         const SyntheticModelParams& p);

class EffectivenessModel {
 public:
  virtual ~EffectivenessModel() = default;
  virtual MomentVector evaluate(const ControlVector& u,
                                const StateVector& sigma) const = 0;
  virtual Mat35 jacobian_u(const ControlVector& u,
                           const StateVector& sigma) const = 0;
  virtual BoxSet box() const = 0;
  virtual StateBox state_box() const = 0;
};

class SyntheticModel final : public EffectivenessModel {
 public:
  SyntheticModel() = default;
  SyntheticModel(const SyntheticModelParams& p, const BoxSet& box,
                 const StateBox& envelope)
      : params_(p), box_(box), envelope_(envelope) {}

  MomentVector evaluate(const ControlVector& u,
                        const StateVector& sigma) const override {
    return eval_synthetic(u, sigma, params_);
  }
  Mat35 jacobian_u(const ControlVector& u,
                   const StateVector& sigma) const override {
    return jacobian_synthetic(u, sigma, params_);
  }
  BoxSet box() const override { return box_; }
  StateBox state_box() const override { return envelope_; }

  const SyntheticModelParams& params() const { return params_; }

 private:
  SyntheticModelParams params_{};
  BoxSet box_{};
  StateBox envelope_{};
};

// Affine test model tau = G u + g0. Used as ground truth where an exact
// inverse exists (oracle evaluations, linearization checks).
class LinearEffectivenessModel final : public EffectivenessModel {
 public:
  LinearEffectivenessModel(const Mat35& g, const MomentVector& g0,
                           const BoxSet& box, const StateBox& envelope)
      : g_(g), g0_(g0), box_(box), envelope_(envelope) {}

  MomentVector evaluate(const ControlVector& u,
                        const StateVector& /*sigma*/) const override {
    const Vec3 y = mat35_vec(g_, u.v);
    return MomentVector{y[0] + g0_.cl, y[1] + g0_.cm, y[2] + g0_.cn};
  }
  Mat35 jacobian_u(const ControlVector& /*u*/,
                   const StateVector& /*sigma*/) const override {
    return g_;
  }
  BoxSet box() const override { return box_; }
  StateBox state_box() const override { return envelope_; }

  const Mat35& slope() const { return g_; }
  const MomentVector& offset() const { return g0_; }

 private:
  Mat35 g_;
  MomentVector g0_;
  BoxSet box_;
  StateBox envelope_;
};

// gain * [I3 | 0] with a symmetric deflection box. The exact inverse of this
// model maps each moment back onto its own axis, so pseudo-inverse solutions
// of attainable targets are always admissible; coverage and error oracles
// built on it are exact by construction.
LinearEffectivenessModel make_axis_affine_model(double gain,
                                                double halfwidth);

// Model description as shipped in flat "name = value" files: coefficients,
// the deflection box, and the flight envelope.
struct ModelFile {
  SyntheticModelParams params;
  BoxSet box;
  StateBox envelope;
};

ModelFile load_model_file(const std::string& path);
void save_model_file(const ModelFile& mf, const std::string& path);

}  // namespace nlca
