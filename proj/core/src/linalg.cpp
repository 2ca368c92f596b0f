#include "nlca/linalg.hpp"

#include <cmath>

namespace nlca {

Mat3 mat3_identity() {
  return Mat3{1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
}

Vec3 mat3_vec(const Mat3& a, const Vec3& x) {
  Vec3 y{};
  for (int r = 0; r < 3; ++r) {
    y[r] = a[3 * r] * x[0] + a[3 * r + 1] * x[1] + a[3 * r + 2] * x[2];
  }
  return y;
}

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) {
      const double arc = a[3 * r + k];
      for (int col = 0; col < 3; ++col) {
        c[3 * r + col] += arc * b[3 * k + col];
      }
    }
  }
  return c;
}

Mat3 mat3_transpose(const Mat3& a) {
  Mat3 t{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      t[3 * c + r] = a[3 * r + c];
    }
  }
  return t;
}

Vec3 mat35_vec(const Mat35& g, const Vec5& u) {
  Vec3 y{};
  for (int r = 0; r < 3; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 5; ++c) acc += g[5 * r + c] * u[c];
    y[r] = acc;
  }
  return y;
}

Vec5 mat35_tvec(const Mat35& g, const Vec3& y) {
  Vec5 u{};
  for (int c = 0; c < 5; ++c) {
    u[c] = g[c] * y[0] + g[5 + c] * y[1] + g[10 + c] * y[2];
  }
  return u;
}

bool cholesky3(const Mat3& a, Mat3& lower) {
  Mat3 l{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a[3 * i + j];
      for (int k = 0; k < j; ++k) sum -= l[3 * i + k] * l[3 * j + k];
      if (i == j) {
        if (!(sum > 0.0)) return false;
        l[3 * i + j] = std::sqrt(sum);
      } else {
        l[3 * i + j] = sum / l[3 * j + j];
      }
    }
  }
  lower = l;
  return true;
}

Vec3 cholesky3_solve(const Mat3& lower, const Vec3& b) {
  Vec3 y{};
  for (int i = 0; i < 3; ++i) {
    double sum = b[i];
    for (int k = 0; k < i; ++k) sum -= lower[3 * i + k] * y[k];
    y[i] = sum / lower[3 * i + i];
  }
  Vec3 x{};
  for (int i = 2; i >= 0; --i) {
    double sum = y[i];
    for (int k = i + 1; k < 3; ++k) sum -= lower[3 * k + i] * x[k];
    x[i] = sum / lower[3 * i + i];
  }
  return x;
}

Mat5 mat5_identity() {
  Mat5 m{};
  for (int i = 0; i < 5; ++i) m[5 * i + i] = 1.0;
  return m;
}

bool cholesky5(const Mat5& a, Mat5& lower) {
  Mat5 l{};
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a[5 * i + j];
      for (int k = 0; k < j; ++k) sum -= l[5 * i + k] * l[5 * j + k];
      if (i == j) {
        if (!(sum > 0.0)) return false;
        l[5 * i + j] = std::sqrt(sum);
      } else {
        l[5 * i + j] = sum / l[5 * j + j];
      }
    }
  }
  lower = l;
  return true;
}

Vec5 cholesky5_solve(const Mat5& lower, const Vec5& b) {
  Vec5 y{};
  for (int i = 0; i < 5; ++i) {
    double sum = b[i];
    for (int k = 0; k < i; ++k) sum -= lower[5 * i + k] * y[k];
    y[i] = sum / lower[5 * i + i];
  }
  Vec5 x{};
  for (int i = 4; i >= 0; --i) {
    double sum = y[i];
    for (int k = i + 1; k < 5; ++k) sum -= lower[5 * k + i] * x[k];
    x[i] = sum / lower[5 * i + i];
  }
  return x;
}

int jacobi_eig3(const Mat3& a, Mat3& q, Vec3& lam) {
  Mat3 m = a;
  q = mat3_identity();
  const int max_sweeps = 32;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = std::abs(m[1]) + std::abs(m[2]) + std::abs(m[5]);
    double scale = std::abs(m[0]) + std::abs(m[4]) + std::abs(m[8]);
    if (off <= 1e-300 || off <= 1e-15 * scale) break;
    static const int pq[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& idx : pq) {
      const int p = idx[0], r = idx[1];
      const double apq = m[3 * p + r];
      if (apq == 0.0) continue;
      const double app = m[3 * p + p];
      const double aqq = m[3 * r + r];
      const double theta = (aqq - app) / (2.0 * apq);
      const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                       (std::abs(theta) + std::sqrt(theta * theta + 1.0));
      const double c = 1.0 / std::sqrt(t * t + 1.0);
      const double s = t * c;
      // Rotate rows/columns p and r of m, accumulate into q.
      for (int k = 0; k < 3; ++k) {
        const double mkp = m[3 * k + p];
        const double mkq = m[3 * k + r];
        m[3 * k + p] = c * mkp - s * mkq;
        m[3 * k + r] = s * mkp + c * mkq;
      }
      for (int k = 0; k < 3; ++k) {
        const double mpk = m[3 * p + k];
        const double mqk = m[3 * r + k];
        m[3 * p + k] = c * mpk - s * mqk;
        m[3 * r + k] = s * mpk + c * mqk;
      }
      for (int k = 0; k < 3; ++k) {
        const double qkp = q[3 * k + p];
        const double qkq = q[3 * k + r];
        q[3 * k + p] = c * qkp - s * qkq;
        q[3 * k + r] = s * qkp + c * qkq;
      }
    }
  }
  lam = Vec3{m[0], m[4], m[8]};
  return sweep;
}

}  // namespace nlca
