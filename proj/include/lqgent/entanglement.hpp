#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "lqgent/constants.hpp"
#include "lqgent/errors.hpp"
#include "lqgent/gaussian.hpp"
#include "lqgent/model.hpp"
#include "lqgent/types.hpp"

namespace lqgent {

struct EntanglementReport {
  double log_negativity = 0.0;  ///< E_N = max(0, -ln 2 nu)
  double symplectic_nu = 0.5;   ///< smallest partial-transpose symplectic eigenvalue
  double epr_variance = 2.0;
  double epr_theta = 0.0;

  bool entangled() const { return symplectic_nu < 0.5; }
};

inline double log_negativity_from_nu(double nu) { return std::max(0.0, -std::log(2.0 * nu)); }

/// theta = pi for attractive coupling, 0 for repulsive.
inline double default_epr_theta(double g) { return g > 0.0 ? constants::pi : 0.0; }

/// Sigma_bare = S^-1 Sigma_normal S^-T.
inline CovMatrix to_bare_basis(const CovMatrix& sigma, const StateSpaceModel& m) {
  if (sigma.basis() != Basis::NormalMode) throw InputError("to_bare_basis: expected a normal-mode covariance");
  const Mat4 s_inv = normal_mode_transform(m).inverse();
  return CovMatrix(s_inv * sigma.matrix() * s_inv.transpose(), Basis::BareMode);
}

inline CovMatrix to_normal_basis(const CovMatrix& sigma, const StateSpaceModel& m) {
  if (sigma.basis() != Basis::BareMode) throw InputError("to_normal_basis: expected a bare-mode covariance");
  const Mat4 s = normal_mode_transform(m);
  return CovMatrix(s * sigma.matrix() * s.transpose(), Basis::NormalMode);
}

namespace detail {

inline void require_physical(const Mat4& sigma, const char* who) {
  const double nu = min_symplectic_eigenvalue(sigma);
  if (!(nu >= 0.5 - 1e-9) || min_eigenvalue(sigma) <= 0.0) {
    std::ostringstream os;
    os << who << ": covariance is not physical (smallest symplectic eigenvalue " << nu << " < 1/2)";
    throw InputError(os.str());
  }
}

}  // namespace detail

/// Delta(x1 + cos t x2 + sin t p2) + Delta(p1 + sin t x2 - cos t p2).
inline double epr_variance(const CovMatrix& sigma_bare, double theta) {
  if (sigma_bare.basis() != Basis::BareMode) throw InputError("epr_variance: expected a bare-mode covariance");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const Vec4 u(1.0, 0.0, c, s);
  const Vec4 v(0.0, 1.0, s, -c);
  const Mat4& m = sigma_bare.matrix();
  return u.dot(m * u) + v.dot(m * v);
}

/// Partial-transpose symplectic eigenvalue of a general two-mode bare-basis
/// covariance, nu^2 = (D - sqrt(D^2 - 4 det S)) / 2 with D = det A + det B - 2 det C.
inline double partial_transpose_nu(const CovMatrix& sigma_bare) {
  const Mat4& m = sigma_bare.matrix();
  const double det_a = m.block<2, 2>(0, 0).determinant();
  const double det_b = m.block<2, 2>(2, 2).determinant();
  const double det_c = m.block<2, 2>(0, 2).determinant();
  const double delta = det_a + det_b - 2.0 * det_c;
  const double disc = std::max(0.0, delta * delta - 4.0 * m.determinant());
  return std::sqrt(std::max(0.0, 0.5 * (delta - std::sqrt(disc))));
}

/// Normal-mode logarithmic negativity for block-diagonal (Sigma+, Sigma-) states.
inline EntanglementReport log_negativity(const CovMatrix& sigma, const StateSpaceModel& m, double theta) {
  if (sigma.basis() != Basis::NormalMode) throw InputError("log_negativity: expected a normal-mode covariance");
  if (!sigma.block_diagonal(1e-12))
    throw InputError("log_negativity: covariance has (+,-) correlations; use entanglement_report");
  detail::require_physical(sigma.matrix(), "log_negativity");

  const Mat2 sp = sigma.block(Mode::Plus);
  const Mat2 sm = sigma.block(Mode::Minus);
  const double ratio = (m.alpha_minus * m.alpha_minus) / (m.alpha_plus * m.alpha_plus);
  const double seralian =
      ratio * sp(0, 0) * sm(1, 1) - 2.0 * sp(0, 1) * sm(0, 1) + sp(1, 1) * sm(0, 0) / ratio;
  const double disc = std::max(0.0, seralian * seralian - 4.0 * sp.determinant() * sm.determinant());
  const double nu = std::sqrt(std::max(0.0, seralian - std::sqrt(disc))) / std::sqrt(2.0);

  EntanglementReport r;
  r.symplectic_nu = nu;
  r.log_negativity = log_negativity_from_nu(nu);
  r.epr_theta = theta;
  r.epr_variance = epr_variance(to_bare_basis(sigma, m), theta);
  return r;
}

inline EntanglementReport log_negativity(const CovMatrix& sigma, const StateSpaceModel& m) {
  return log_negativity(sigma, m, default_epr_theta(m.g));
}

/// Any physical normal-mode covariance: uses the block-diagonal formula when
/// the modes are uncorrelated and the general bare-basis invariant otherwise.
inline EntanglementReport entanglement_report(const CovMatrix& sigma, const StateSpaceModel& m, double theta) {
  if (sigma.block_diagonal(1e-12)) return log_negativity(sigma, m, theta);
  detail::require_physical(sigma.matrix(), "entanglement_report");
  const CovMatrix bare = to_bare_basis(sigma, m);
  EntanglementReport r;
  r.symplectic_nu = partial_transpose_nu(bare);
  r.log_negativity = log_negativity_from_nu(r.symplectic_nu);
  r.epr_theta = theta;
  r.epr_variance = epr_variance(bare, theta);
  return r;
}

inline EntanglementReport entanglement_report(const CovMatrix& sigma, const StateSpaceModel& m) {
  return entanglement_report(sigma, m, default_epr_theta(m.g));
}

/// Smallest symplectic eigenvalue of the partially transposed (p2 -> -p2)
/// bare covariance, from the spectrum of i J Sigma~.
inline double partial_transpose_nu_oracle(const CovMatrix& sigma_bare) {
  if (sigma_bare.basis() != Basis::BareMode)
    throw InputError("partial_transpose_nu_oracle: expected a bare-mode covariance");
  Mat4 flip = Mat4::Identity();
  flip(3, 3) = -1.0;
  const Mat4 pt = flip * sigma_bare.matrix() * flip;
  const Eigen::Matrix4cd ijs = std::complex<double>(0.0, 1.0) * (symplectic_form() * pt).cast<std::complex<double>>();
  Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(ijs, false);
  double nu = std::abs(es.eigenvalues()(0));
  for (int i = 1; i < 4; ++i) nu = std::min(nu, std::abs(es.eigenvalues()(i)));
  return nu;
}

inline double log_negativity_bare_oracle(const CovMatrix& sigma_bare) {
  detail::require_physical(sigma_bare.matrix(), "log_negativity_bare_oracle");
  return log_negativity_from_nu(partial_transpose_nu_oracle(sigma_bare));
}

// ---------------------------------------------------------------------------
// Cost matrices

struct CostKind {
  enum class Type { Cool, Epr };
  Type type = Type::Epr;
  double theta = 0.0;

  static CostKind cool() { return {Type::Cool, 0.0}; }
  static CostKind epr(double theta) { return {Type::Epr, theta}; }
  bool operator==(const CostKind&) const = default;
};

inline std::string to_string(const CostKind& c) {
  if (c.type == CostKind::Type::Cool) return "cool";
  std::ostringstream os;
  os << "epr(theta=" << c.theta << ")";
  return os.str();
}

/// EPR-variance weight of one normal mode,
/// ((1 + cos t) / a^2, sin t; sin t, a^2 (1 - cos t)), rank one for every t.
inline Mat2 epr_mode_weight(double alpha, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat2 p;
  p << (1.0 + c) / (alpha * alpha), s, s, alpha * alpha * (1.0 - c);
  return p;
}

/// Cool: diag(W+, W+, W-, W-). Epr(t): blockdiag(P+(t), P-(t + pi)) (omega0 = 1).
inline Mat4 cost_matrix(const CostKind& kind, const StateSpaceModel& m) {
  Mat4 p = Mat4::Zero();
  if (kind.type == CostKind::Type::Cool) {
    p.diagonal() << m.omega_plus, m.omega_plus, m.omega_minus, m.omega_minus;
    return p;
  }
  p.block<2, 2>(0, 0) = epr_mode_weight(m.alpha_plus, kind.theta);
  p.block<2, 2>(2, 2) = epr_mode_weight(m.alpha_minus, kind.theta + constants::pi);
  p = symmetrize(p);
  if (min_eigenvalue(p) < -1e-12 * std::max(p.norm(), 1.0))
    throw InternalError("cost_matrix: EPR weight is not positive semidefinite");
  return p;
}

// ---------------------------------------------------------------------------
// Analytic thresholds (weak decoherence, high Q). All g values are g/omega0.

struct ConditionalThresholds {
  double g_plus = 0.0;     ///< attractive critical coupling at eta = 1
  double eta_plus = 0.0;   ///< attractive efficiency threshold at params.g
  double g_minus = 0.0;    ///< repulsive critical coupling at eta = 1
  double eta_minus = 0.0;  ///< repulsive efficiency threshold at params.g
};

inline ConditionalThresholds threshold_conditional(const PhysicalParams& params) {
  if (!(params.gamma_ba > 0.0)) throw InputError("threshold_conditional: requires Gamma_ba > 0");
  const double r = params.gamma_tot() / params.gamma_ba;
  const double g = params.g / params.omega0;
  const double root = std::sqrt(std::max(0.0, 1.0 + 4.0 * g));
  ConditionalThresholds t;
  t.g_plus = r * r - 0.25;
  t.eta_plus = root > 0.0 ? 2.0 * r / root : std::numeric_limits<double>::infinity();
  t.g_minus = -0.25 + (1.0 / 16.0) / (r * r);
  t.eta_minus = 2.0 * r * root;
  return t;
}

/// Efficiency threshold relevant for the sign of g.
inline double eta_threshold(const PhysicalParams& params) {
  const ConditionalThresholds t = threshold_conditional(params);
  return params.g >= 0.0 ? t.eta_plus : t.eta_minus;
}

enum class Branch { Attractive, Repulsive };

struct ApproxLogNeg {
  double value = 0.0;    ///< clipped at zero
  double raw = 0.0;      ///< -(1/2) ln(...) before clipping
  bool valid = false;
};

/// Weak-decoherence approximation of the conditional E_N.
///   attractive: -(1/2) ln((2 / a-^2) Gtot / Gm)
///   repulsive:  -(1/2) ln(2 a-^2 Gtot / Gm), valid for a-^4 > sqrt(2 eta) Gtot
inline ApproxLogNeg logneg_approx(const PhysicalParams& params, Branch branch) {
  const double w0 = params.omega0;
  const double g = params.g / w0;
  const double gt = params.gamma_tot() / w0;
  const double gm = params.gamma_m() / w0;
  const double a2 = std::sqrt(std::max(0.0, 1.0 + 4.0 * g));  // alpha_-^2 = Omega_- / Omega0

  ApproxLogNeg out;
  if (branch == Branch::Attractive) {
    out.raw = -0.5 * std::log(2.0 / a2 * gt / gm);
    out.valid = g >= 0.0 && gt < 0.1;
  } else {
    out.raw = -0.5 * std::log(2.0 * a2 * gt / gm);
    out.valid = g <= 0.0 && a2 * a2 > std::sqrt(2.0 * params.eta) * gt;
  }
  out.value = std::max(0.0, out.raw);
  return out;
}

}  // namespace lqgent
