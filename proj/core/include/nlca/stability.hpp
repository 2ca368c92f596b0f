#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nlca/allocators.hpp"
#include "nlca/effectiveness.hpp"
#include "nlca/types.hpp"

namespace nlca {

// Plant with the allocator in the loop:
//   xdot = f(x) + B(x) G(P(alloc(k_ctrl(x), sigma(x))), sigma(x)),
// where k_ctrl is the virtual control law in moment space and sigma maps the
// state to the flight condition the model sees.
struct ClosedLoopSystem {
  int k = 0;  // state dimension
  std::function<std::vector<double>(const std::vector<double>&)> f;
  // Row-major k x 3 input matrix B(x).
  std::function<std::vector<double>(const std::vector<double>&)> b;
  std::function<MomentVector(const std::vector<double>&)> k_ctrl;
  std::function<StateVector(const std::vector<double>&)> sigma_of_x;
};

// Monomial comparison function c * s^p with c > 0, p >= 1: strictly
// increasing, zero at zero, invertible in closed form.
struct ClassKFn {
  double c = 1.0;
  double p = 1.0;

  void validate() const;
  double operator()(double s) const;
  double inv(double y) const;
};

// Comparison-function certificate for an ultimate-bound check: a1, a2
// sandwich the Lyapunov function, a3 bounds its decay, a4 bounds the
// disturbance gain, on the ball of radius r, with margin split theta.
struct ClassKSpec {
  ClassKFn a1, a2, a3, a4;
  double theta = 0.5;
  double r = 1.0;

  void validate() const;
};

// Largest allocation-error bound the certificate tolerates:
//   theta * a3(a2^-1(a1(r))) / a4(r).
double admissible_delta(const ClassKSpec& spec);

// Ultimate bound rho(r) = a1^-1(a2(a3^-1(delta * a4(r) / theta))). Throws
// ErrorCode::inadmissible when delta exceeds admissible_delta(spec); the
// bound formula does not apply there.
double rho_bound(const ClassKSpec& spec, double delta);

struct SimPoint {
  double t = 0.0;
  std::vector<double> x;
  double norm = 0.0;  // Euclidean state norm
  double err = 0.0;   // 1-norm allocation error of the command at this state
};

struct SimResult {
  std::vector<SimPoint> points;
  // Largest allocation error over every integration stage: the measured
  // error bound on the commands this loop actually visited.
  double max_err = 0.0;
  // Set when the state left the finite range; points hold the prefix.
  bool nonfinite_abort = false;
};

// Fixed-step fourth-order Runge-Kutta; the command passes through the
// allocator at every stage evaluation.
SimResult simulate(const ClosedLoopSystem& sys, Allocator& alloc,
                   const EffectivenessModel& model,
                   const std::vector<double>& x0, double t_end, double dt);

// Same integration with the virtual command applied exactly, bypassing
// allocator and model. Reference loop for zero allocation error.
SimResult simulate_ideal(const ClosedLoopSystem& sys,
                         const std::vector<double>& x0, double t_end,
                         double dt);

struct BoundTrajectory {
  std::vector<double> x0;
  bool settled = false;
  // First time the norm enters the rho-ball and stays; +inf when it never
  // does (or the bound is inadmissible).
  double settling_time = 0.0;
  // Sup norm after settling; over the whole trajectory when not settled.
  double settled_sup = 0.0;
  bool nonfinite = false;
};

struct BoundReport {
  double delta = 0.0;
  std::string delta_source;  // "visited-commands", "full-domain-search", "override"
  double admissible_delta = 0.0;
  bool admissible = false;
  double rho = 0.0;  // NaN when inadmissible
  double theta = 0.0;
  double r = 0.0;
  double horizon = 0.0;
  double dt = 0.0;
  std::vector<BoundTrajectory> trajectories;
  bool pass = false;
};

// Default horizon: the toy loop contracts at unit-order rate, so 25 s of
// decay from the basin boundary reaches any rho a double-precision measured
// delta can produce.
struct UltimateBoundOptions {
  double horizon = 25.0;
  double dt = 1e-3;
  // When set, used as delta instead of any measurement.
  std::optional<double> delta_override;
  // Measure delta by the full-domain maximum-error search instead of the
  // visited commands (conservative; the visited set never exceeds it).
  bool full_domain_mae = false;
  int mae_starts = 16;
  std::uint64_t seed = 0;
};

// Simulates every initial state, measures the allocation-error bound, checks
// admissibility, and verifies each trajectory enters the rho-ball and stays
// there. Initial states must satisfy |x0| <= a2^-1(a1(r)). An inadmissible
// delta or a straying trajectory fails the report; it never throws for that.
BoundReport check_ultimate_bound(const ClosedLoopSystem& sys, Allocator& alloc,
                                 const EffectivenessModel& model,
                                 const ClassKSpec& spec,
                                 const std::vector<std::vector<double>>& x0s,
                                 const UltimateBoundOptions& opts = {});

// Three-state toy plant: f(x) = -x, B = I, command law -0.02 x clipped into
// the 0.003-ball, constant flight condition (alpha 4 deg, beta 0).
ClosedLoopSystem make_toy_system();

// Certificate constants for the toy plant with V = 0.5 |x|^2. The command
// term x . k_ctrl(x) is never positive, so
//   Vdot = -|x|^2 + x . k_ctrl(x) + x . e <= -a3(|x|) + a4(|x|) |e|_1
// with a1 = a2 = 0.5 s^2, a3 = s^2, a4 = s.
ClassKSpec toy_classk_spec(double theta, double r);

void write_bound_json(const BoundReport& report, const std::string& path,
                      std::uint64_t seed);

// Time series as CSV: a `# seed = N` line, header t,x0,..,x{k-1},norm,err,
// one row per sample with 17 significant digits.
void write_sim_csv(const SimResult& result, const std::string& path,
                   std::uint64_t seed);

}  // namespace nlca
