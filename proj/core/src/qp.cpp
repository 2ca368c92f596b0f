#include "nlca/qp.hpp"

#include <algorithm>
#include <cmath>

#include "nlca/error.hpp"

namespace nlca {

namespace {

constexpr double kCondLimit = 1e12;
constexpr double kKktTol = 1e-8;
constexpr int kIterLimit = 200;
constexpr double kPinvRelTol = 1e-12;

enum class BoundState { kFree, kAtLower, kAtUpper };

double weighted_objective(const Mat35& g, const MomentVector& tau_bar,
                          const WeightMatrix& w, const ControlVector& u) {
  const Vec3 gu = mat35_vec(g, u.v);
  const MomentVector r{gu[0] - tau_bar.cl, gu[1] - tau_bar.cm,
                       gu[2] - tau_bar.cn};
  return w.quad(r);
}

// 2 G^T W (G u - tau_bar)
Vec5 objective_gradient(const Mat35& g, const MomentVector& tau_bar,
                        const WeightMatrix& w, const ControlVector& u) {
  const Vec3 gu = mat35_vec(g, u.v);
  const Vec3 wr = w.apply(
      Vec3{gu[0] - tau_bar.cl, gu[1] - tau_bar.cm, gu[2] - tau_bar.cn});
  Vec5 grad = mat35_tvec(g, wr);
  for (double& x : grad) x *= 2.0;
  return grad;
}

// Solves the pseudo-inverse system z = (M M^T)^+ y for a 3xf design M.
// Cholesky handles the well-conditioned full-rank case; otherwise eigenvalues
// below kPinvRelTol of the largest are treated as exact zeros, which realizes
// the minimum-norm tie-break.
Vec3 gram_pinv_solve(const Mat3& a, const Vec3& y) {
  Mat3 lower;
  if (cholesky3(a, lower)) {
    const double dmax = std::max({lower[0], lower[4], lower[8]});
    const double dmin = std::min({lower[0], lower[4], lower[8]});
    if (dmin > 1e-7 * dmax) return cholesky3_solve(lower, y);
  }
  Mat3 q;
  Vec3 lam;
  jacobi_eig3(a, q, lam);
  const double lmax =
      std::max({std::abs(lam[0]), std::abs(lam[1]), std::abs(lam[2])});
  Vec3 qy{};
  for (int i = 0; i < 3; ++i) {
    qy[i] = q[i] * y[0] + q[3 + i] * y[1] + q[6 + i] * y[2];
    qy[i] = (lam[i] > kPinvRelTol * lmax) ? qy[i] / lam[i] : 0.0;
  }
  Vec3 z{};
  for (int k = 0; k < 3; ++k) {
    z[k] = q[3 * k] * qy[0] + q[3 * k + 1] * qy[1] + q[3 * k + 2] * qy[2];
  }
  return z;
}

// Minimum-norm minimizer over the free variables of |L^T (G_F x - t)| where
// W = L L^T. Writes the f solution entries into x in free-index order.
void solve_free_subproblem(const Mat35& g, const Mat3& chol, const Vec3& t,
                           const int* free_idx, int f, double* x) {
  // M = L^T G_F (3xf, row stride 5), y = L^T t.
  std::array<double, 15> m{};
  Vec3 y{};
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < f; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += chol[3 * k + i] * g[5 * k + free_idx[c]];
      m[5 * i + c] = acc;
    }
    y[i] = chol[i] * t[0] + chol[3 + i] * t[1] + chol[6 + i] * t[2];
  }
  Mat3 a{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (int c = 0; c < f; ++c) acc += m[5 * i + c] * m[5 * j + c];
      a[3 * i + j] = acc;
      a[3 * j + i] = acc;
    }
  }
  const Vec3 z = gram_pinv_solve(a, y);
  for (int c = 0; c < f; ++c) {
    x[c] = m[c] * z[0] + m[5 + c] * z[1] + m[10 + c] * z[2];
  }
}

}  // namespace

MomentVector AffineLocalModel::evaluate(const ControlVector& u) const {
  const Vec3 y = mat35_vec(slope, u.v);
  return MomentVector{y[0] + offset.cl, y[1] + offset.cm, y[2] + offset.cn};
}

AffineLocalModel linearize(const EffectivenessModel& model,
                           const ControlVector& u0,
                           const StateVector& sigma0) {
  AffineLocalModel out;
  out.slope = model.jacobian_u(u0, sigma0);
  const MomentVector y0 = model.evaluate(u0, sigma0);
  const Vec3 ju = mat35_vec(out.slope, u0.v);
  out.offset = MomentVector{y0.cl - ju[0], y0.cm - ju[1], y0.cn - ju[2]};
  out.box = model.box();
  return out;
}

AffineLocalModel linearize_off_kink(const EffectivenessModel& model,
                                    const ControlVector& u0,
                                    const StateVector& sigma0) {
  try {
    return linearize(model, u0, sigma0);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::pwl_breakpoint) throw;
    const ControlVector c = model.box().center();
    ControlVector nudged = u0;
    for (std::size_t i = 0; i < kNumSurfaces; ++i) {
      nudged[i] += (c[i] >= nudged[i] ? 1e-9 : -1e-9);
    }
    return linearize(model, nudged, sigma0);
  }
}

ControlVector weighted_pinv(const Mat35& g, const Mat5& w,
                            const MomentVector& tau) {
  double scale = 0.0;
  for (double x : w) scale = std::max(scale, std::abs(x));
  const double sym_tol = 1e-12 * std::max(scale, 1.0);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < i; ++j) {
      if (std::abs(w[5 * i + j] - w[5 * j + i]) > sym_tol) {
        fail(ErrorCode::not_positive_definite,
             "control weight is not symmetric");
      }
    }
  }
  Mat5 lower;
  if (!cholesky5(w, lower)) {
    fail(ErrorCode::not_positive_definite,
         "control weight is not positive definite");
  }

  // Columns of X = W^-1 G^T, then the Gram matrix A = G X.
  std::array<Vec5, 3> xcol;
  for (int r = 0; r < 3; ++r) {
    Vec5 grow{g[5 * r], g[5 * r + 1], g[5 * r + 2], g[5 * r + 3],
              g[5 * r + 4]};
    xcol[r] = cholesky5_solve(lower, grow);
  }
  Mat3 a{};
  for (int r = 0; r < 3; ++r) {
    for (int s = 0; s < 3; ++s) {
      double acc = 0.0;
      for (int c = 0; c < 5; ++c) acc += g[5 * r + c] * xcol[s][c];
      a[3 * r + s] = acc;
    }
  }

  Mat3 q;
  Vec3 lam;
  jacobi_eig3(a, q, lam);
  const double lmax = std::max({lam[0], lam[1], lam[2]});
  const double lmin = std::min({lam[0], lam[1], lam[2]});
  if (!(lmin > 0.0) || lmax > kCondLimit * lmin) {
    fail(ErrorCode::rank_deficient,
         "G W^-1 G^T is singular to working precision");
  }

  // z = A^-1 tau through the eigendecomposition already in hand.
  const Vec3 tv = tau.array();
  Vec3 qy{};
  for (int i = 0; i < 3; ++i) {
    qy[i] = (q[i] * tv[0] + q[3 + i] * tv[1] + q[6 + i] * tv[2]) / lam[i];
  }
  Vec3 z{};
  for (int k = 0; k < 3; ++k) {
    z[k] = q[3 * k] * qy[0] + q[3 * k + 1] * qy[1] + q[3 * k + 2] * qy[2];
  }

  ControlVector u;
  for (int c = 0; c < 5; ++c) {
    u[c] = xcol[0][c] * z[0] + xcol[1][c] * z[1] + xcol[2][c] * z[2];
  }
  return u;
}

QpSolution solve_box_qp(const AffineLocalModel& affine,
                        const MomentVector& tau_d, const WeightMatrix& w,
                        const BoxSet& box) {
  box.validate();
  if (!tau_d.finite()) {
    fail(ErrorCode::invalid_argument, "target moments must be finite");
  }
  const Mat35& g = affine.slope;
  const MomentVector tau_bar = tau_d - affine.offset;

  std::array<BoundState, kNumSurfaces> state;
  std::array<bool, kNumSurfaces> pinned;
  ControlVector u = box.center();
  for (std::size_t c = 0; c < kNumSurfaces; ++c) {
    pinned[c] = box.lower[c] == box.upper[c];
    state[c] = pinned[c] ? BoundState::kAtLower : BoundState::kFree;
  }

  ControlVector best_u = u;
  double best_obj = weighted_objective(g, tau_bar, w, u);
  int iter = 0;

  while (iter < kIterLimit) {
    ++iter;

    int free_idx[kNumSurfaces];
    int f = 0;
    Vec3 t = tau_bar.array();
    for (std::size_t c = 0; c < kNumSurfaces; ++c) {
      if (state[c] == BoundState::kFree) {
        free_idx[f++] = static_cast<int>(c);
      } else {
        for (int r = 0; r < 3; ++r) t[r] -= g[5 * r + c] * u[c];
      }
    }

    bool at_subproblem_optimum = true;
    if (f > 0) {
      double x[kNumSurfaces];
      solve_free_subproblem(g, w.chol_lower(), t, free_idx, f, x);

      // Step from u toward the subproblem optimum, clipped at the first
      // bound crossing; everything landing on a bound gets clamped there.
      double alpha = 1.0;
      for (int k = 0; k < f; ++k) {
        const int c = free_idx[k];
        const double d = x[k] - u[c];
        if (d > 0.0 && x[k] > box.upper[c]) {
          alpha = std::min(alpha, (box.upper[c] - u[c]) / d);
        } else if (d < 0.0 && x[k] < box.lower[c]) {
          alpha = std::min(alpha, (box.lower[c] - u[c]) / d);
        }
      }
      alpha = std::max(alpha, 0.0);
      for (int k = 0; k < f; ++k) {
        const int c = free_idx[k];
        u[c] += alpha * (x[k] - u[c]);
      }
      if (alpha < 1.0) {
        at_subproblem_optimum = false;
        for (int k = 0; k < f; ++k) {
          const int c = free_idx[k];
          const double lo_tol = 1e-12 * (1.0 + std::abs(box.lower[c]));
          const double hi_tol = 1e-12 * (1.0 + std::abs(box.upper[c]));
          if (u[c] <= box.lower[c] + lo_tol) {
            u[c] = box.lower[c];
            state[c] = BoundState::kAtLower;
          } else if (u[c] >= box.upper[c] - hi_tol) {
            u[c] = box.upper[c];
            state[c] = BoundState::kAtUpper;
          }
        }
      }
    }

    const double obj = weighted_objective(g, tau_bar, w, u);
    if (obj < best_obj) {
      best_obj = obj;
      best_u = u;
    }
    if (!at_subproblem_optimum) continue;

    const Vec5 grad = objective_gradient(g, tau_bar, w, u);
    double kkt = 0.0;
    for (std::size_t c = 0; c < kNumSurfaces; ++c) {
      if (pinned[c]) continue;
      switch (state[c]) {
        case BoundState::kFree:
          kkt = std::max(kkt, std::abs(grad[c]));
          break;
        case BoundState::kAtLower:
          kkt = std::max(kkt, std::max(0.0, -grad[c]));
          break;
        case BoundState::kAtUpper:
          kkt = std::max(kkt, std::max(0.0, grad[c]));
          break;
      }
    }
    if (kkt <= kKktTol) {
      QpSolution r;
      r.u = u;
      r.objective = obj;
      r.kkt_residual = kkt;
      r.iterations = iter;
      r.iteration_limit = false;
      return r;
    }

    // Release the lowest-index bound whose gradient admits descent.
    int release = -1;
    for (std::size_t c = 0; c < kNumSurfaces && release < 0; ++c) {
      if (pinned[c] || state[c] == BoundState::kFree) continue;
      const double viol =
          state[c] == BoundState::kAtLower ? -grad[c] : grad[c];
      if (viol > kKktTol) release = static_cast<int>(c);
    }
    if (release < 0) break;
    state[release] = BoundState::kFree;
  }

  QpSolution r;
  r.u = best_u;
  r.objective = best_obj;
  const Vec5 grad = objective_gradient(g, tau_bar, w, best_u);
  double kkt = 0.0;
  for (std::size_t c = 0; c < kNumSurfaces; ++c) {
    if (pinned[c]) continue;
    const double lo_tol = 1e-12 * (1.0 + std::abs(box.lower[c]));
    const double hi_tol = 1e-12 * (1.0 + std::abs(box.upper[c]));
    if (best_u[c] <= box.lower[c] + lo_tol) {
      kkt = std::max(kkt, std::max(0.0, -grad[c]));
    } else if (best_u[c] >= box.upper[c] - hi_tol) {
      kkt = std::max(kkt, std::max(0.0, grad[c]));
    } else {
      kkt = std::max(kkt, std::abs(grad[c]));
    }
  }
  r.kkt_residual = kkt;
  r.iterations = iter;
  r.iteration_limit = true;
  return r;
}

ControlVector allocate_affine(const EffectivenessModel& model,
                              const MomentVector& tau_d,
                              const StateVector& sigma,
                              const ControlVector& u_prev,
                              const WeightMatrix& w, const BoxSet& box) {
  const AffineLocalModel local = linearize(model, u_prev, sigma);
  return solve_box_qp(local, tau_d, w, box).u;
}

}  // namespace nlca
