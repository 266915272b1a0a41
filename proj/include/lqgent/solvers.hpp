#pragma once

#include <cmath>
#include <sstream>

#include "lqgent/errors.hpp"
#include "lqgent/gaussian.hpp"
#include "lqgent/model.hpp"
#include "lqgent/riccati.hpp"
#include "lqgent/types.hpp"

namespace lqgent {

/// Steady-state Riccati solution with its defining residual
/// ||R(value)||_F / ||value||_F.
struct RiccatiSolution {
  Mat4 value = Mat4::Zero();
  double residual_norm = 0.0;
  int iterations = 0;
};

enum class CareMethod { HamiltonianSchur, NewtonKleinman };

inline constexpr double kRiccatiTolerance = 1e-10;

namespace detail {

inline RiccatiSolution to_solution(const riccati::CareSolution& s) {
  RiccatiSolution out;
  out.value = symmetrize(Mat4(s.value));
  out.residual_norm = s.residual_norm;
  out.iterations = s.iterations;
  return out;
}

inline RiccatiSolution run_care(const riccati::CareProblem& p, CareMethod method) {
  riccati::CareSolution s;
  if (method == CareMethod::HamiltonianSchur) {
    s = riccati::solve_care(p, kRiccatiTolerance);
  } else {
    s = riccati::solve_care_newton(p, riccati::passive_seed(p), 200, kRiccatiTolerance);
  }
  if (!(s.residual_norm <= kRiccatiTolerance)) {
    std::ostringstream os;
    os << "Riccati residual " << s.residual_norm << " above " << kRiccatiTolerance;
    throw ConvergenceError(os.str());
  }
  return to_solution(s);
}

}  // namespace detail

/// Filter Riccati equation
///   A S + S A^T + V - (S C^T + M) W^-1 (S C^T + M)^T = 0
/// written in regulator form with F = (A - M W^-1 C)^T.
inline riccati::CareProblem filter_problem(const StateSpaceModel& m) {
  const Mat2 w_inv = m.w_mat.inverse();
  const Mat4 a_tilde = m.a_mat - m.m_mat * w_inv * m.c_mat;
  riccati::CareProblem p;
  p.f = a_tilde.transpose();
  p.g = m.c_mat.transpose() * w_inv * m.c_mat;
  p.q = m.v_mat - m.m_mat * w_inv * m.m_mat.transpose();
  return p;
}

/// Conditional covariance: stabilizing solution of the filter Riccati equation.
inline RiccatiSolution solve_filter_care(const StateSpaceModel& m,
                                         CareMethod method = CareMethod::HamiltonianSchur) {
  if (!is_observable(m)) throw SolverError("solve_filter_care: model is not observable");
  return detail::run_care(filter_problem(m), method);
}

inline CovMatrix conditional_covariance(const StateSpaceModel& m,
                                        CareMethod method = CareMethod::HamiltonianSchur) {
  return CovMatrix(solve_filter_care(m, method).value, Basis::NormalMode);
}

inline void validate_effort(const FeedbackConfig& fb) {
  if (!(fb.effort > 0.0) || !std::isfinite(fb.effort))
    throw InputError("control effort q must be > 0");
}

/// Input penalty Q = q / omega0 (scalar per input, omega0 = 1 internally).
inline MatX input_penalty(const FeedbackConfig& fb) {
  validate_effort(fb);
  return fb.effort * MatX::Identity(fb.inputs(), fb.inputs());
}

/// Regulator problem A^T X + X A + P - X B Q^-1 B^T X = 0.
/// G is formed as (B / sqrt(q)) (B / sqrt(q))^T, which stays well scaled for tiny q.
inline riccati::CareProblem control_problem(const StateSpaceModel& m, const Mat4& p_mat,
                                            const FeedbackConfig& fb) {
  if (m.b_mat.cols() != fb.inputs()) throw InputError("control_problem: B does not match feedback mode");
  validate_effort(fb);
  const MatX b_scaled = m.b_mat / std::sqrt(fb.effort);
  riccati::CareProblem p;
  p.f = m.a_mat;
  p.g = b_scaled * b_scaled.transpose();
  p.q = p_mat;
  return p;
}

/// Cost-to-go matrix of the infinite-horizon regulator.
inline RiccatiSolution solve_control_care(const StateSpaceModel& m, const Mat4& p_mat,
                                          const FeedbackConfig& fb,
                                          CareMethod method = CareMethod::HamiltonianSchur) {
  const Mat4 p_sym = symmetrize(p_mat);
  if ((p_mat - p_mat.transpose()).norm() > 1e-12 * std::max(p_mat.norm(), 1.0))
    throw InputError("solve_control_care: cost matrix is not symmetric");
  if (min_eigenvalue(p_sym) < -1e-12 * std::max(p_sym.norm(), 1.0))
    throw InputError("solve_control_care: cost matrix P is indefinite");
  if (!is_controllable(m)) throw SolverError("solve_control_care: (A, B) is not controllable");
  const riccati::CareProblem prob = control_problem(m, p_sym, fb);

  // With zero state cost and a Hurwitz drift, zero is the stabilizing solution.
  if (p_sym.isZero(0.0) && riccati::is_hurwitz(m.a_mat)) return RiccatiSolution{};

  RiccatiSolution sol = detail::run_care(prob, method);
  if (!riccati::is_hurwitz(prob.closed_loop(sol.value)))
    throw SolverError("solve_control_care: solution is not stabilizing");
  return sol;
}

/// Unique solution of a_cl X + X a_cl^T + n = 0 for Hurwitz a_cl.
inline CovMatrix solve_lyapunov(const Mat4& a_cl, const Mat4& n_mat, Basis basis = Basis::NormalMode) {
  return CovMatrix(Mat4(riccati::solve_lyapunov(a_cl, n_mat)), basis);
}

/// Closed-form per-mode conditional covariance (gamma >= 0, Gamma_m > 0).
///
/// sqrt(2 Gm Gt + a^4 W^2) - a^2 W is evaluated as 2 Gm Gt / (R + a^2 W) and
/// the leading difference is rationalized the same way, so small decoherence
/// rates do not cancel.
inline ModeCov closed_form_conditional(Mode s, const StateSpaceModel& m) {
  const double gm = m.gamma_m;
  const double gt = m.gamma_tot;
  const double a = m.alpha(s);
  const double w = m.omega(s);
  const double gam = m.gamma;
  if (!(gm > 0.0)) throw InputError("closed_form_conditional: requires Gamma_m > 0");

  const double a2w = a * a * w;
  const double r = std::sqrt(2.0 * gm * gt + a2w * a2w);
  const double r_minus = 2.0 * gm * gt / (r + a2w);
  const double inner = a * a * gam * gam + 2.0 * w * r_minus;
  // xx = (a / 2Gm) (sqrt(inner) - a gamma)
  const double xx = a * w * r_minus / (gm * (std::sqrt(inner) + a * gam));

  ModeCov c;
  c.xx = xx;
  c.xp = gm / a2w * xx * xx;
  c.pp = (r / a2w - gm * gam / (a2w * w) * xx) * xx;
  return c;
}

/// High-Q, weak-decoherence approximation of the per-mode conditional covariance.
inline ModeCov approx_conditional(Mode s, const StateSpaceModel& m) {
  const double v = std::sqrt(m.gamma_tot / (2.0 * m.gamma_m));
  return {v, m.gamma_tot / (2.0 * m.alpha(s) * m.alpha(s) * m.omega(s)), v};
}

inline CovMatrix closed_form_conditional(const StateSpaceModel& m) {
  return block_diag(closed_form_conditional(Mode::Plus, m).matrix(),
                    closed_form_conditional(Mode::Minus, m).matrix());
}

}  // namespace lqgent
