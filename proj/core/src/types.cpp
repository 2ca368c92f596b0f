#include "nlca/types.hpp"

#include <cmath>

namespace nlca {

WeightMatrix::WeightMatrix(const Mat3& w) : w_(w) {
  double scale = 0.0;
  for (double x : w) scale = std::max(scale, std::abs(x));
  for (int r = 0; r < 3; ++r) {
    for (int c = r + 1; c < 3; ++c) {
      if (std::abs(w[3 * r + c] - w[3 * c + r]) > 1e-12 * std::max(scale, 1.0)) {
        fail(ErrorCode::not_positive_definite, "weight matrix is not symmetric");
      }
    }
  }
  if (!cholesky3(w_, chol_)) {
    fail(ErrorCode::not_positive_definite,
         "weight matrix is not positive definite");
  }
}

double WeightMatrix::quad(const MomentVector& r) const {
  const Vec3 v = r.array();
  const Vec3 wv = mat3_vec(w_, v);
  return v[0] * wv[0] + v[1] * wv[1] + v[2] * wv[2];
}

Vec3 WeightMatrix::apply(const Vec3& r) const { return mat3_vec(w_, r); }

WeightMatrix WeightMatrix::diagonal(double wl, double wm, double wn) {
  return WeightMatrix(Mat3{wl, 0.0, 0.0, 0.0, wm, 0.0, 0.0, 0.0, wn});
}

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::empty_box: return "empty_box";
    case ErrorCode::degenerate_input: return "degenerate_input";
    case ErrorCode::pwl_breakpoint: return "pwl_breakpoint";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::not_positive_definite: return "not_positive_definite";
    case ErrorCode::rank_deficient: return "rank_deficient";
    case ErrorCode::diverged: return "diverged";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::format_error: return "format_error";
    case ErrorCode::insufficient_samples: return "insufficient_samples";
    case ErrorCode::inadmissible: return "inadmissible";
  }
  return "unknown";
}

}  // namespace nlca
