#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "nlca/error.hpp"
#include "nlca/linalg.hpp"

namespace nlca {

inline constexpr std::size_t kNumSurfaces = 5;
inline constexpr std::size_t kNumMoments = 3;

// Surface ordering used everywhere:
// [elevator, clamshell 7 upper, clamshell 7 lower, clamshell 8 upper, clamshell 8 lower]
enum Surface : std::size_t {
  kElevator = 0,
  kClam7U = 1,
  kClam7L = 2,
  kClam8U = 3,
  kClam8L = 4,
};

// Surface deflections in degrees.
struct ControlVector {
  std::array<double, kNumSurfaces> v{};

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  bool finite() const {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }
};

// Flight condition in degrees: angle of attack and sideslip.
struct StateVector {
  double alpha = 0.0;
  double beta = 0.0;

  bool finite() const { return std::isfinite(alpha) && std::isfinite(beta); }
};

// Dimensionless roll/pitch/yaw moment coefficients.
struct MomentVector {
  double cl = 0.0;
  double cm = 0.0;
  double cn = 0.0;

  double operator[](std::size_t i) const {
    return i == 0 ? cl : (i == 1 ? cm : cn);
  }
  double& operator[](std::size_t i) {
    return i == 0 ? cl : (i == 1 ? cm : cn);
  }

  Vec3 array() const { return Vec3{cl, cm, cn}; }
  static MomentVector from_array(const Vec3& a) {
    return MomentVector{a[0], a[1], a[2]};
  }
  bool finite() const {
    return std::isfinite(cl) && std::isfinite(cm) && std::isfinite(cn);
  }
};

inline MomentVector operator-(const MomentVector& a, const MomentVector& b) {
  return MomentVector{a.cl - b.cl, a.cm - b.cm, a.cn - b.cn};
}
inline MomentVector operator+(const MomentVector& a, const MomentVector& b) {
  return MomentVector{a.cl + b.cl, a.cm + b.cm, a.cn + b.cn};
}
inline MomentVector operator*(double s, const MomentVector& a) {
  return MomentVector{s * a.cl, s * a.cm, s * a.cn};
}

inline double norm1(const MomentVector& m) {
  return std::abs(m.cl) + std::abs(m.cm) + std::abs(m.cn);
}
inline double norm2(const MomentVector& m) {
  return std::sqrt(m.cl * m.cl + m.cm * m.cm + m.cn * m.cn);
}

// Admissible deflection ranges, component-wise lower <= upper. The default is
// the flying-wing surface envelope: elevator +-20 deg, upper clamshells
// [0, 40] deg, lower clamshells [-40, 0] deg.
struct BoxSet {
  ControlVector lower{{-20.0, 0.0, -40.0, 0.0, -40.0}};
  ControlVector upper{{20.0, 40.0, 0.0, 40.0, 0.0}};

  BoxSet() = default;
  BoxSet(const ControlVector& lo, const ControlVector& hi)
      : lower(lo), upper(hi) {
    validate();
  }

  void validate() const {
    for (std::size_t i = 0; i < kNumSurfaces; ++i) {
      if (!(lower[i] <= upper[i])) {
        fail(ErrorCode::empty_box, "box has lower > upper in component " +
                                       std::to_string(i));
      }
    }
  }

  bool contains(const ControlVector& u, double tol = 0.0) const {
    for (std::size_t i = 0; i < kNumSurfaces; ++i) {
      if (u[i] < lower[i] - tol || u[i] > upper[i] + tol) return false;
    }
    return true;
  }

  ControlVector center() const {
    ControlVector c;
    for (std::size_t i = 0; i < kNumSurfaces; ++i) {
      c[i] = 0.5 * (lower[i] + upper[i]);
    }
    return c;
  }

  static BoxSet symmetric(double halfwidth) {
    ControlVector lo, hi;
    for (std::size_t i = 0; i < kNumSurfaces; ++i) {
      lo[i] = -halfwidth;
      hi[i] = halfwidth;
    }
    return BoxSet(lo, hi);
  }
};

// Flight-condition envelope; defaults to alpha in [0, 8] deg, beta in
// [-12, 12] deg.
struct StateBox {
  StateVector lower{0.0, -12.0};
  StateVector upper{8.0, 12.0};

  StateBox() = default;
  StateBox(const StateVector& lo, const StateVector& hi) : lower(lo), upper(hi) {
    validate();
  }

  void validate() const {
    if (!(lower.alpha <= upper.alpha) || !(lower.beta <= upper.beta)) {
      fail(ErrorCode::empty_box, "state box has lower > upper");
    }
  }

  bool contains(const StateVector& s, double tol = 0.0) const {
    return s.alpha >= lower.alpha - tol && s.alpha <= upper.alpha + tol &&
           s.beta >= lower.beta - tol && s.beta <= upper.beta + tol;
  }

  StateVector center() const {
    return StateVector{0.5 * (lower.alpha + upper.alpha),
                       0.5 * (lower.beta + upper.beta)};
  }
};

// Symmetric positive definite 3x3 weight on moment-space residuals.
// Definiteness is established at construction via Cholesky and the factor is
// kept for reuse (weighted norms need W = L L^T repeatedly).
class WeightMatrix {
 public:
  WeightMatrix() : w_(mat3_identity()), chol_(mat3_identity()) {}
  explicit WeightMatrix(const Mat3& w);

  const Mat3& m() const { return w_; }
  const Mat3& chol_lower() const { return chol_; }

  // r^T W r
  double quad(const MomentVector& r) const;
  Vec3 apply(const Vec3& r) const;

  static WeightMatrix identity() { return WeightMatrix(); }
  static WeightMatrix diagonal(double wl, double wm, double wn);

 private:
  Mat3 w_;
  Mat3 chol_;
};

}  // namespace nlca
