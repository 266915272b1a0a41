#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>

#include "lqgent/types.hpp"

namespace lqgent {

/// Symplectic eigenvalues (ascending) of a two-mode covariance, from the
/// moduli of the eigenvalues of J * sigma. Vacuum has nu = 1/2.
inline std::array<double, 2> symplectic_eigenvalues(const Mat4& sigma) {
  Eigen::EigenSolver<Mat4> es(symplectic_form() * sigma, false);
  std::array<double, 4> mod{};
  for (int i = 0; i < 4; ++i) mod[i] = std::abs(es.eigenvalues()(i));
  std::sort(mod.begin(), mod.end());
  // Eigenvalues come in pairs +-i nu.
  return {0.5 * (mod[0] + mod[1]), 0.5 * (mod[2] + mod[3])};
}

inline double min_symplectic_eigenvalue(const Mat4& sigma) { return symplectic_eigenvalues(sigma)[0]; }

/// Heisenberg bound sigma + (i/2) J >= 0, checked as nu_min >= 1/2 - tol.
inline bool is_physical(const Mat4& sigma, double tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(symmetrize(sigma), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) return false;
  return min_symplectic_eigenvalue(sigma) >= 0.5 - tol;
}

inline bool is_physical(const CovMatrix& sigma, double tol = 1e-9) { return is_physical(sigma.matrix(), tol); }

/// Smallest eigenvalue of the symmetric part.
inline double min_eigenvalue(const Mat4& m) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace lqgent
