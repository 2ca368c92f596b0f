#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nlca/effectiveness.hpp"
#include "nlca/network.hpp"
#include "nlca/qp.hpp"
#include "nlca/types.hpp"

namespace nlca {

// Deterministic map from desired moments and flight condition to an
// admissible deflection vector. Implementations may carry warm-start state;
// that state lives in the instance, so concurrent callers use separate
// instances. reset() returns an instance to its cold state.
class Allocator {
 public:
  virtual ~Allocator() = default;
  virtual ControlVector allocate(const MomentVector& tau_d,
                                 const StateVector& sigma) = 0;
  virtual std::string name() const = 0;
  virtual void reset() {}
};

// Trained-network allocator: normalized forward pass, projection onto the
// network's output box. Fault-conditioned architectures see the stored
// health mask (default all-healthy) appended to the input. The pass runs in
// preallocated scratch buffers over column-major weight copies; each output
// element accumulates its terms in the same order as mlp_forward_raw, so
// results match forward() exactly while the per-call cost stays free of heap
// traffic and the row loop vectorizes.
class AnnAllocator final : public Allocator {
 public:
  explicit AnnAllocator(Network net);
  AnnAllocator(Network net, const std::array<std::uint8_t, kNumSurfaces>& mask);

  ControlVector allocate(const MomentVector& tau_d,
                         const StateVector& sigma) override;
  std::string name() const override;

  const Network& net() const { return net_; }

 private:
  Network net_;
  std::array<std::uint8_t, kNumSurfaces> mask_;
  std::vector<std::vector<double>> theta_t_;  // per layer, in x out
  std::vector<double> buf_a_;
  std::vector<double> buf_b_;
};

// Per-call affine QP baseline: linearize the model at the warm-start point,
// solve the box QP, feed the solution back as the next linearization point.
// Cold start is the box center. The model must outlive the allocator. When a
// piecewise-linear model reports an on-kink linearization point, the point is
// nudged toward the box center by 1e-9 and the call retried once.
class QpBaselineAllocator final : public Allocator {
 public:
  QpBaselineAllocator(const EffectivenessModel& model, const WeightMatrix& w);

  ControlVector allocate(const MomentVector& tau_d,
                         const StateVector& sigma) override;
  std::string name() const override { return "qp"; }
  void reset() override;

  const QpSolution& last_solution() const { return last_; }

 private:
  const EffectivenessModel* model_;
  WeightMatrix w_;
  BoxSet box_;
  ControlVector u_prev_;
  QpSolution last_;
};

// Always returns zero deflection. Error floor for sanity checks.
class ZeroAllocator final : public Allocator {
 public:
  ControlVector allocate(const MomentVector&, const StateVector&) override {
    return ControlVector{};
  }
  std::string name() const override { return "zero"; }
};

// Always returns the same deflection. Timing floor for sanity checks.
class ConstantAllocator final : public Allocator {
 public:
  explicit ConstantAllocator(const ControlVector& u) : u_(u) {}
  ControlVector allocate(const MomentVector&, const StateVector&) override {
    return u_;
  }
  std::string name() const override { return "constant"; }

 private:
  ControlVector u_;
};

// Iterated linearize-and-solve allocator: Gauss-Newton refinement of the
// box QP until the step stalls or max_iters runs out. Orders of magnitude
// slower than a single QP pass, but on smooth models it drives the error of
// attainable interior targets to solver precision, so it serves as the
// near-exact reference in closed-loop checks.
class GaussNewtonAllocator final : public Allocator {
 public:
  GaussNewtonAllocator(const EffectivenessModel& model, const WeightMatrix& w,
                       int max_iters = 25);

  ControlVector allocate(const MomentVector& tau_d,
                         const StateVector& sigma) override;
  std::string name() const override { return "gn-exact"; }
  void reset() override;

 private:
  const EffectivenessModel* model_;
  WeightMatrix w_;
  BoxSet box_;
  ControlVector u_prev_;
  int max_iters_;
};

// Exact inverse of an affine model through the weighted pseudo-inverse,
// projected onto the model box. On a model whose pseudo-inverse solutions
// stay admissible for attainable targets (see make_axis_affine_model) this
// allocates with zero error, which makes it the reference oracle for the
// error and coverage metrics.
class PinvOracleAllocator final : public Allocator {
 public:
  explicit PinvOracleAllocator(const LinearEffectivenessModel& model);

  ControlVector allocate(const MomentVector& tau_d,
                         const StateVector& sigma) override;
  std::string name() const override { return "pinv-oracle"; }

 private:
  Mat35 slope_;
  MomentVector offset_;
  BoxSet box_;
  Mat5 w_;
};

}  // namespace nlca
