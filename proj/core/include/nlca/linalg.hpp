#pragma once

#include <array>
#include <cstddef>

// Small fixed-size dense helpers for the 3-moment / 5-surface problem.
// Matrices are row-major std::arrays; nothing here allocates.

namespace nlca {

using Vec3 = std::array<double, 3>;
using Vec5 = std::array<double, 5>;
using Mat3 = std::array<double, 9>;    // 3x3 row-major
using Mat35 = std::array<double, 15>;  // 3x5 row-major
using Mat5 = std::array<double, 25>;   // 5x5 row-major

Mat3 mat3_identity();
Vec3 mat3_vec(const Mat3& a, const Vec3& x);
Mat3 mat3_mul(const Mat3& a, const Mat3& b);
Mat3 mat3_transpose(const Mat3& a);

Vec3 mat35_vec(const Mat35& g, const Vec5& u);   // G u
Vec5 mat35_tvec(const Mat35& g, const Vec3& y);  // G^T y

// Cholesky factorization a = L L^T for symmetric positive definite a.
// Returns false when a pivot falls below a small positive floor.
bool cholesky3(const Mat3& a, Mat3& lower);

// Solves L L^T x = b given the lower factor.
Vec3 cholesky3_solve(const Mat3& lower, const Vec3& b);

Mat5 mat5_identity();
bool cholesky5(const Mat5& a, Mat5& lower);
Vec5 cholesky5_solve(const Mat5& lower, const Vec5& b);

// Symmetric 3x3 eigendecomposition by cyclic Jacobi rotations.
// a = q * diag(lam) * q^T with q orthogonal; returns the sweep count.
int jacobi_eig3(const Mat3& a, Mat3& q, Vec3& lam);

}  // namespace nlca
