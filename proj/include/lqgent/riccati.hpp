#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <utility>

#include "lqgent/errors.hpp"
#include "lqgent/types.hpp"

// Dense solvers for the small (n <= 8) matrix equations used by the LQG
// pipeline. Everything here is shape-agnostic; solvers.hpp binds them to the
// filter and regulator problems.

namespace lqgent::riccati {

/// Largest real part of the spectrum.
inline double spectral_abscissa(const MatX& a) {
  Eigen::EigenSolver<MatX> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

inline bool is_hurwitz(const MatX& a) { return spectral_abscissa(a) < 0.0; }

/// Solves a X + X a^T + n = 0 through the Kronecker form
/// (I (x) a + a (x) I) vec(X) = -vec(n).
inline MatX solve_lyapunov(const MatX& a, const MatX& n) {
  const Eigen::Index dim = a.rows();
  if (a.cols() != dim || n.rows() != dim || n.cols() != dim)
    throw InputError("solve_lyapunov: dimension mismatch");
  if (!is_hurwitz(a)) {
    std::ostringstream os;
    os << "solve_lyapunov: drift matrix is not Hurwitz (spectral abscissa "
       << spectral_abscissa(a) << ")";
    throw SolverError(os.str());
  }
  const MatX eye = MatX::Identity(dim, dim);
  MatX lhs = MatX::Zero(dim * dim, dim * dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    lhs.block(i * dim, i * dim, dim, dim) += a;
    for (Eigen::Index j = 0; j < dim; ++j) lhs.block(i * dim, j * dim, dim, dim) += a(i, j) * eye;
  }
  const VecX rhs = -Eigen::Map<const VecX>(n.data(), dim * dim);
  const VecX x = lhs.fullPivLu().solve(rhs);
  MatX out = Eigen::Map<const MatX>(x.data(), dim, dim);
  return 0.5 * (out + out.transpose());
}

/// F^T X + X F + Q - X G X = 0 with G, Q symmetric PSD.
struct CareProblem {
  MatX f;
  MatX g;
  MatX q;

  MatX residual(const MatX& x) const {
    return f.transpose() * x + x * f + q - x * g * x;
  }
  MatX closed_loop(const MatX& x) const { return f - g * x; }
};

struct CareSolution {
  MatX value;
  double residual_norm = 0.0;
  int iterations = 0;
};

inline double relative_residual(const CareProblem& p, const MatX& x) {
  const double denom = x.norm() > 0.0 ? x.norm() : 1.0;
  return p.residual(x).norm() / denom;
}

namespace detail {

using CMat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

/// Swaps the adjacent diagonal entries k, k+1 of the upper-triangular t,
/// updating the unitary factor u so that u t u^H is preserved.
inline void swap_schur_entries(CMat& t, CMat& u, Eigen::Index k) {
  const cplx t11 = t(k, k);
  const cplx t22 = t(k + 1, k + 1);
  Eigen::Vector2cd v(t(k, k + 1), t22 - t11);
  const double nv = v.norm();
  if (nv == 0.0) return;
  v /= nv;
  Eigen::Matrix2cd z;
  z.col(0) = v;
  z.col(1) << -std::conj(v(1)), std::conj(v(0));
  t.middleRows(k, 2) = z.adjoint() * t.middleRows(k, 2);
  t.middleCols(k, 2) = t.middleCols(k, 2) * z;
  u.middleCols(k, 2) = u.middleCols(k, 2) * z;
  t(k + 1, k) = 0.0;
  t(k, k) = t22;
  t(k + 1, k + 1) = t11;
}

}  // namespace detail

/// Stabilizing solution from the stable invariant subspace of the
/// Hamiltonian [[F, -G], [-Q, -F^T]], using an ordered complex Schur form.
inline CareSolution solve_care_schur(const CareProblem& p) {
  using detail::CMat;
  const Eigen::Index n = p.f.rows();
  MatX h(2 * n, 2 * n);
  h << p.f, -p.g, -p.q, -p.f.transpose();
  if (!h.allFinite()) throw InputError("solve_care_schur: non-finite Hamiltonian");

  Eigen::ComplexSchur<CMat> schur(h.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success) throw SolverError("solve_care_schur: Schur decomposition failed");
  CMat t = schur.matrixT();
  CMat u = schur.matrixU();

  const double axis_tol = 1e3 * std::numeric_limits<double>::epsilon() * h.norm();
  int stable = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const double re = t(i, i).real();
    if (std::abs(re) <= axis_tol) {
      std::ostringstream os;
      os << "solve_care_schur: Hamiltonian eigenvalue " << t(i, i)
         << " lies on the imaginary axis; no stabilizing solution";
      throw SolverError(os.str());
    }
    if (re < 0.0) ++stable;
  }
  if (stable != n) throw SolverError("solve_care_schur: stable subspace has wrong dimension");

  // Bubble the stable eigenvalues to the leading block.
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    for (Eigen::Index k = 2 * n - 2; k >= i; --k) {
      if (t(k, k).real() >= 0.0 && t(k + 1, k + 1).real() < 0.0) detail::swap_schur_entries(t, u, k);
      if (k == 0) break;
    }
  }

  const CMat u1 = u.topLeftCorner(n, n);
  const CMat u2 = u.bottomLeftCorner(n, n);
  Eigen::FullPivLU<CMat> lu(u1);
  if (!lu.isInvertible()) throw SolverError("solve_care_schur: stable subspace basis is singular");
  const CMat xc = u2 * lu.inverse();
  MatX x = xc.real();
  x = 0.5 * (x + x.transpose());
  if (!x.allFinite()) throw SolverError("solve_care_schur: non-finite solution");

  CareSolution sol{x, relative_residual(p, x), 1};
  return sol;
}

/// Newton-Kleinman iteration from a stabilizing initial guess x0
/// (F - G x0 must be Hurwitz).
inline CareSolution solve_care_newton(const CareProblem& p, const MatX& x0, int max_iter = 100,
                                      double tol = 1e-10) {
  if (!is_hurwitz(p.closed_loop(x0)))
    throw SolverError("solve_care_newton: initial guess is not stabilizing");
  MatX x = x0;
  int it = 0;
  for (; it < max_iter; ++it) {
    const MatX acl = p.closed_loop(x);
    const MatX next = solve_lyapunov(acl.transpose(), p.q + x * p.g * x);
    const double step = (next - x).norm();
    x = next;
    if (step <= 1e-14 * std::max(x.norm(), 1e-300)) {
      ++it;
      break;
    }
  }
  CareSolution sol{x, relative_residual(p, x), it};
  if (!(sol.residual_norm <= tol)) {
    std::ostringstream os;
    os << "solve_care_newton: residual " << sol.residual_norm << " above " << tol << " after "
       << it << " iterations";
    throw ConvergenceError(os.str());
  }
  return sol;
}

/// Seed x0 = c I for passive drifts (F + F^T <= 0); grows c until F - G x0 is Hurwitz.
inline MatX passive_seed(const CareProblem& p) {
  const Eigen::Index n = p.f.rows();
  double c = 1.0;
  for (int i = 0; i < 12; ++i, c *= 10.0) {
    const MatX x0 = c * MatX::Identity(n, n);
    if (is_hurwitz(p.closed_loop(x0))) return x0;
  }
  throw SolverError("passive_seed: no stabilizing scaled-identity seed found");
}

/// Schur solve followed by Newton polishing when the residual is above tol.
inline CareSolution solve_care(const CareProblem& p, double tol = 1e-10) {
  CareSolution sol = solve_care_schur(p);
  if (sol.residual_norm <= tol) return sol;
  if (!is_hurwitz(p.closed_loop(sol.value)))
    throw SolverError("solve_care: Schur solution is not stabilizing");
  CareSolution polished = solve_care_newton(p, sol.value, 20, tol);
  polished.iterations += sol.iterations;
  return polished;
}

}  // namespace lqgent::riccati
