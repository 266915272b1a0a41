#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lqgent/entanglement.hpp"
#include "lqgent/errors.hpp"
#include "lqgent/model.hpp"
#include "lqgent/riccati.hpp"
#include "lqgent/solvers.hpp"
#include "lqgent/types.hpp"

namespace lqgent {

/// Steady-state LQG loop: estimator, regulator and the resulting
/// conditional / unconditional covariances.
struct ClosedLoop {
  StateSpaceModel model;
  CostKind cost;
  Mat4 cost_mat = Mat4::Zero();
  RiccatiSolution filter;   // Sigma^c
  RiccatiSolution control;  // Omega_ctrl
  MatX k_gain;              // k x 4
  Mat42 kalman_gain = Mat42::Zero();
  Mat4 a_closed = Mat4::Zero();
  CovMatrix sigma_cond;
  CovMatrix xi_excess;
  CovMatrix sigma_uncond;
  std::vector<std::string> warnings;
};

/// K = Q^-1 B^T Omega_ctrl.
inline MatX lqr_gain(const Mat4& omega_ctrl, const StateSpaceModel& m, const FeedbackConfig& fb) {
  validate_effort(fb);
  if (m.b_mat.cols() != fb.inputs()) throw InputError("lqr_gain: B does not match feedback mode");
  return m.b_mat.transpose() * omega_ctrl / fb.effort;
}

/// (Sigma^c C^T + M) W^-1.
inline Mat42 kalman_gain(const Mat4& sigma_cond, const StateSpaceModel& m) {
  return (sigma_cond * m.c_mat.transpose() + m.m_mat) * m.w_mat.inverse();
}

/// Innovation noise intensity k W k^T driving the conditional means.
inline Mat4 innovation_intensity(const Mat42& gain, const StateSpaceModel& m) {
  return symmetrize(gain * m.w_mat * gain.transpose());
}

inline constexpr double kXpZeroThreshold = 1e-8;

/// Assembles the loop from already solved Riccati equations.
inline ClosedLoop assemble_closed_loop(const StateSpaceModel& m, const CostKind& cost,
                                       const RiccatiSolution& filter, const RiccatiSolution& control) {
  ClosedLoop cl;
  cl.model = m;
  cl.cost = cost;
  cl.cost_mat = cost_matrix(cost, m);
  cl.filter = filter;
  cl.control = control;
  cl.k_gain = lqr_gain(control.value, m, m.feedback);
  cl.kalman_gain = kalman_gain(filter.value, m);
  cl.a_closed = m.a_mat - m.b_mat * cl.k_gain;
  if (!riccati::is_hurwitz(cl.a_closed)) throw StabilityError("closed loop A - BK is not Hurwitz");

  const Mat4 sigma_c = filter.value;
  Mat4 xi = solve_lyapunov(cl.a_closed, innovation_intensity(cl.kalman_gain, m)).matrix();
  Mat4 sigma_u = sigma_c + xi;

  // Sigma^u_{x_s p_s} vanishes in steady state; clear round-off so that
  // boundary extraction sees exact zeros.
  for (Mode s : {Mode::Plus, Mode::Minus}) {
    const int o = mode_offset(s);
    const double xp = sigma_u(o, o + 1);
    if (std::abs(xp) <= kXpZeroThreshold) {
      sigma_u(o, o + 1) = sigma_u(o + 1, o) = 0.0;
      xi(o, o + 1) = xi(o + 1, o) = -sigma_c(o, o + 1);
    } else {
      std::ostringstream os;
      os << "unconditional x-p correlation of mode " << (s == Mode::Plus ? '+' : '-') << " is " << xp
         << " (expected 0)";
      cl.warnings.push_back(os.str());
    }
  }
  cl.sigma_cond = CovMatrix(sigma_c, Basis::NormalMode);
  cl.xi_excess = CovMatrix(xi, Basis::NormalMode);
  cl.sigma_uncond = CovMatrix(sigma_u, Basis::NormalMode);
  return cl;
}

inline ClosedLoop closed_loop(const StateSpaceModel& m, const CostKind& cost) {
  if (!is_observable(m)) throw SolverError("closed_loop: model is not observable");
  if (!is_controllable(m)) {
    throw ControllabilityError("closed_loop: " + uncontrollable_reason(m));
  }
  const RiccatiSolution filter = solve_filter_care(m);
  const RiccatiSolution control = solve_control_care(m, cost_matrix(cost, m), m.feedback);
  return assemble_closed_loop(m, cost, filter, control);
}

inline ClosedLoop closed_loop(const PhysicalParams& params, const FeedbackConfig& fb, const CostKind& cost) {
  return closed_loop(build_model(params, fb), cost);
}

// ---------------------------------------------------------------------------
// Small-q expansions of the unconditional covariance (independent feedback).

struct UncondExpansion {
  std::optional<double> xx_plus;
  std::optional<double> pp_plus;
  std::optional<double> xx_minus;
  std::optional<double> pp_minus;
};

/// Power of q of the first neglected term for an expanded entry.
inline double expansion_next_order(const CostKind& cost, Mode s, bool position) {
  if (cost.type == CostKind::Type::Cool) return 1.5;
  const bool theta_zero = std::abs(cost.theta) < 1e-12;
  // EPR: the position entries carry q^(1/4) series, the momentum entries sqrt(q).
  if (theta_zero) return (s == Mode::Plus && position) ? 1.25 : 1.5;
  return (s == Mode::Minus && position) ? 1.25 : 1.5;
}

/// Leading-order small-q unconditional entries in the high-Q limit.
///   Cool:        xx, pp of both modes
///   EPR(0):      xx of (+), pp of (-)
///   EPR(pi):     pp of (+), xx of (-)
inline UncondExpansion uncond_asymptotic(const PhysicalParams& params, const CostKind& cost,
                                         const FeedbackConfig& fb, double q) {
  if (fb.mode != FeedbackMode::Independent)
    throw InputError("uncond_asymptotic: expansions exist only for independent feedback");
  if (!(q > 0.0)) throw InputError("uncond_asymptotic: q must be > 0");
  const StateSpaceModel m = build_model(params, fb);
  const double gm = m.gamma_m;
  const double sq = std::sqrt(q);
  const double q14 = std::pow(q, 0.25);
  const double q34 = std::pow(q, 0.75);

  UncondExpansion out;
  if (cost.type == CostKind::Type::Cool) {
    for (Mode s : {Mode::Plus, Mode::Minus}) {
      const ModeCov c = closed_form_conditional(s, m);
      const double a2 = m.alpha(s) * m.alpha(s);
      const double w = m.omega(s);
      const double base = gm / (a2 * w) * c.xx * c.xx;
      const double q_term = q * gm / a2 * (c.xp * c.xp - 3.0 * c.xx * c.xx);
      const double xx = c.xx + base + sq * 2.0 * gm / (a2 * std::sqrt(w)) * c.xx * (c.xx + c.xp) + q_term;
      const double pp = c.pp + base + sq * gm / (a2 * std::sqrt(w)) * (c.xp * c.xp - c.xx * c.xx) - q_term;
      if (s == Mode::Plus) {
        out.xx_plus = xx;
        out.pp_plus = pp;
      } else {
        out.xx_minus = xx;
        out.pp_minus = pp;
      }
    }
    return out;
  }

  const ModeCov cp = closed_form_conditional(Mode::Plus, m);
  const ModeCov cm = closed_form_conditional(Mode::Minus, m);
  const double am = m.alpha_minus;
  const double two14 = std::pow(2.0, 0.25);
  const double two34 = std::pow(2.0, 0.75);

  if (std::abs(cost.theta) < 1e-12) {
    out.xx_plus = cp.xx + q14 * 3.0 * gm / two34 * cp.xx * cp.xx + sq * std::sqrt(2.0) * gm * cp.xx * cp.xp +
                  q34 * gm / (4.0 * two14) * (2.0 * cp.xp * cp.xp - cp.xx * cp.xx);
    out.pp_minus = cm.pp + sq * gm / (std::sqrt(2.0) * am * am * am) * (cm.xp * cm.xp + cm.xx * cm.xx);
    return out;
  }
  if (std::abs(cost.theta - constants::pi) < 1e-12) {
    out.pp_plus = cp.pp + sq * gm / std::sqrt(2.0) * (cp.xp * cp.xp + cp.xx * cp.xx);
    out.xx_minus = cm.xx + q14 * 3.0 * gm / (two34 * std::pow(am, 2.5)) * cm.xx * cm.xx +
                   sq * std::sqrt(2.0) * gm / am * cm.xx * cm.xp +
                   q34 * std::sqrt(am) * gm / (4.0 * two14) * (2.0 * cm.xp * cm.xp - cm.xx * cm.xx);
    return out;
  }
  throw InputError("uncond_asymptotic: EPR expansions exist only for theta = 0 and theta = pi");
}

}  // namespace lqgent
