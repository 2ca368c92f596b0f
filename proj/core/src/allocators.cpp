#include "nlca/allocators.hpp"

#include <algorithm>
#include <cmath>

#include "nlca/error.hpp"

namespace nlca {

namespace {

std::size_t max_layer_width(const Network& net) {
  std::size_t w = 0;
  for (int width : net.arch.layers) {
    w = std::max(w, static_cast<std::size_t>(width));
  }
  return w;
}

}  // namespace

AnnAllocator::AnnAllocator(Network net)
    : AnnAllocator(std::move(net), {1, 1, 1, 1, 1}) {}

AnnAllocator::AnnAllocator(Network net,
                           const std::array<std::uint8_t, kNumSurfaces>& mask)
    : net_(std::move(net)), mask_(mask) {
  net_.validate();
  theta_t_.reserve(net_.layers.size());
  for (const Layer& l : net_.layers) {
    const std::size_t rows = l.b.size();
    const std::size_t cols = l.theta.size() / rows;
    std::vector<double> t(l.theta.size());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        t[c * rows + r] = l.theta[r * cols + c];
      }
    }
    theta_t_.push_back(std::move(t));
  }
  buf_a_.resize(max_layer_width(net_));
  buf_b_.resize(max_layer_width(net_));
}

ControlVector AnnAllocator::allocate(const MomentVector& tau_d,
                                     const StateVector& sigma) {
  const std::array<double, 5> raw{tau_d.cl, tau_d.cm, tau_d.cn, sigma.alpha,
                                  sigma.beta};
  double* a = buf_a_.data();
  double* z = buf_b_.data();
  for (std::size_t k = 0; k < 5; ++k) {
    a[k] = net_.norm.scale[k] * (raw[k] - net_.norm.offset[k]);
  }
  std::size_t width = 5;
  if (net_.arch.fault_conditioned()) {
    for (std::size_t k = 0; k < kNumSurfaces; ++k) {
      a[5 + k] = static_cast<double>(mask_[k]);
    }
    width = 10;
  }

  // Column-major accumulation: element r still sums b[r] + sum_c w[r,c]*a[c]
  // in increasing c, bit-identical to the row-major pass, but the inner loop
  // runs over independent contiguous elements.
  const std::size_t n_layers = net_.layers.size();
  for (std::size_t li = 0; li < n_layers; ++li) {
    const Layer& l = net_.layers[li];
    const std::size_t rows = l.b.size();
    const double* __restrict wt = theta_t_[li].data();
    const double* __restrict av = a;
    double* __restrict zv = z;
    const double* __restrict bv = l.b.data();
    for (std::size_t r = 0; r < rows; ++r) zv[r] = bv[r];
    for (std::size_t c = 0; c < width; ++c) {
      const double ac = av[c];
      const double* __restrict col = wt + c * rows;
      for (std::size_t r = 0; r < rows; ++r) zv[r] += col[r] * ac;
    }
    if (li + 1 < n_layers) {
      for (std::size_t r = 0; r < rows; ++r) z[r] = z[r] > 0.0 ? z[r] : 0.0;
    }
    std::swap(a, z);
    width = rows;
  }

  ControlVector u;
  for (std::size_t k = 0; k < kNumSurfaces; ++k) u[k] = a[k];
  return project_box(u, net_.output_box);
}

std::string AnnAllocator::name() const { return "ann-" + net_.arch.str(); }

QpBaselineAllocator::QpBaselineAllocator(const EffectivenessModel& model,
                                         const WeightMatrix& w)
    : model_(&model), w_(w), box_(model.box()), u_prev_(box_.center()) {}

void QpBaselineAllocator::reset() {
  u_prev_ = box_.center();
  last_ = QpSolution{};
}

ControlVector QpBaselineAllocator::allocate(const MomentVector& tau_d,
                                            const StateVector& sigma) {
  const AffineLocalModel local = linearize_off_kink(*model_, u_prev_, sigma);
  last_ = solve_box_qp(local, tau_d, w_, box_);
  u_prev_ = last_.u;
  return last_.u;
}

GaussNewtonAllocator::GaussNewtonAllocator(const EffectivenessModel& model,
                                           const WeightMatrix& w,
                                           int max_iters)
    : model_(&model),
      w_(w),
      box_(model.box()),
      u_prev_(box_.center()),
      max_iters_(max_iters) {
  if (max_iters < 1) {
    fail(ErrorCode::invalid_argument, "max_iters must be >= 1");
  }
}

void GaussNewtonAllocator::reset() { u_prev_ = box_.center(); }

ControlVector GaussNewtonAllocator::allocate(const MomentVector& tau_d,
                                             const StateVector& sigma) {
  ControlVector u = u_prev_;
  for (int it = 0; it < max_iters_; ++it) {
    const AffineLocalModel local = linearize_off_kink(*model_, u, sigma);
    const QpSolution sol = solve_box_qp(local, tau_d, w_, box_);
    double move = 0.0;
    for (std::size_t k = 0; k < kNumSurfaces; ++k) {
      move = std::max(move, std::abs(sol.u[k] - u[k]));
    }
    u = sol.u;
    if (move < 1e-14) break;
  }
  u_prev_ = u;
  return u;
}

PinvOracleAllocator::PinvOracleAllocator(const LinearEffectivenessModel& model)
    : slope_(model.slope()),
      offset_(model.offset()),
      box_(model.box()),
      w_(mat5_identity()) {}

ControlVector PinvOracleAllocator::allocate(const MomentVector& tau_d,
                                            const StateVector& /*sigma*/) {
  const ControlVector u = weighted_pinv(slope_, w_, tau_d - offset_);
  return project_box(u, box_);
}

}  // namespace nlca
