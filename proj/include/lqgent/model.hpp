#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include "lqgent/constants.hpp"
#include "lqgent/errors.hpp"
#include "lqgent/types.hpp"

namespace lqgent {

/// Experiment-level description of the two trapped particles.
///
/// Rates may be given in any unit (rad/s or already divided by omega0) as
/// long as they are consistent; build_model() divides everything by omega0.
struct PhysicalParams {
  double omega0 = 1.0;    ///< trap frequency
  double g = 0.0;         ///< coupling rate, > 0 attractive, < 0 repulsive
  double gamma = 1e-10;   ///< mechanical damping
  double gamma_th = 0.0025;
  double gamma_ba = 0.05;
  double eta = 1.0;       ///< detection efficiency, Gamma_m = eta * Gamma_ba
  double q1 = 3.0;        ///< excess charges (elementary charges, signed)
  double q2 = 1.0;

  double gamma_m() const { return eta * gamma_ba; }
  double gamma_tot() const { return gamma_ba + gamma_th; }

  /// Throws InputError / StabilityError when an invariant is violated.
  void validate() const {
    auto bad = [](const std::string& what) { throw InputError("PhysicalParams: " + what); };
    if (!(omega0 > 0.0) || !std::isfinite(omega0)) bad("omega0 must be > 0");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) bad("gamma must be >= 0");
    if (!(gamma_th >= 0.0) || !std::isfinite(gamma_th)) bad("gamma_th must be >= 0");
    if (!(gamma_ba > 0.0) || !std::isfinite(gamma_ba)) bad("gamma_ba must be > 0");
    if (!(eta > 0.0 && eta <= 1.0)) bad("eta must lie in (0, 1]");
    if (!std::isfinite(g)) bad("g must be finite");
    if (!std::isfinite(q1) || !std::isfinite(q2)) bad("charges must be finite");
    if (!(g / omega0 > -0.25)) {
      std::ostringstream os;
      os << "g/omega0 = " << g / omega0
         << " is at or beyond the repulsive stability edge -1/4 (differential mode unstable)";
      throw StabilityError(os.str());
    }
  }
};

/// Central 1/r^n interaction between the particles.
struct InteractionSpec {
  double c_const = 0.0;  ///< interaction constant C, J m^n (C < 0 attractive)
  double d = 1e-6;       ///< mean separation, m
  int n = 1;             ///< power-law exponent
  double mass = 1e-18;   ///< particle mass, kg
};

/// Coupling rate g = -C x_zpf^2 / (2 hbar d^(n+2) n), x_zpf = sqrt(hbar / (m omega0)).
inline double coupling_rate(const InteractionSpec& spec, double omega0) {
  if (!(spec.d > 0.0) || spec.n < 1 || !(spec.mass > 0.0) || !(omega0 > 0.0))
    throw InputError("coupling_rate: requires d > 0, n >= 1, mass > 0, omega0 > 0");
  const double x_zpf_sq = constants::hbar / (spec.mass * omega0);
  const double d_pow = std::pow(spec.d, spec.n + 2);
  const double g = -spec.c_const * x_zpf_sq / (2.0 * constants::hbar * d_pow * spec.n);
  if (!std::isfinite(g) || d_pow == 0.0 || !std::isfinite(d_pow))
    throw DomainError("coupling_rate: d^(n+2) over/underflowed");
  return g;
}

/// Coulomb constant C = Q1 Q2 / (4 pi eps0) for charges given in elementary charges.
inline double coulomb_constant(double q1_e, double q2_e) {
  const double e = constants::elementary_charge;
  return q1_e * e * q2_e * e / (4.0 * constants::pi * constants::epsilon0);
}

/// Mass of a homogeneous sphere.
inline double sphere_mass(double density, double radius) {
  return density * 4.0 / 3.0 * constants::pi * radius * radius * radius;
}

enum class FeedbackMode { Single, Independent };

constexpr std::string_view to_string(FeedbackMode m) {
  return m == FeedbackMode::Single ? "single" : "independent";
}

struct FeedbackConfig {
  FeedbackMode mode = FeedbackMode::Independent;
  double effort = 0.1;  ///< q; the input penalty matrix is (q / omega0) per input

  int inputs() const { return mode == FeedbackMode::Single ? 1 : 2; }
};

/// Dimensionless (omega0 = 1) normal-mode state-space model.
///
/// State ordering is (x+, p+, x-, p-) everywhere.
struct StateSpaceModel {
  Mat4 a_mat = Mat4::Zero();
  MatX b_mat;  // 4 x k
  Mat24 c_mat = Mat24::Zero();
  Mat4 v_mat = Mat4::Zero();
  Mat2 w_mat = 0.5 * Mat2::Identity();
  Mat42 m_mat = Mat42::Zero();

  double omega_plus = 1.0;
  double omega_minus = 1.0;
  double alpha_plus = 1.0;
  double alpha_minus = 1.0;

  // Dimensionless rates retained for closed forms and reporting.
  double g = 0.0;
  double gamma = 0.0;
  double gamma_m = 0.0;
  double gamma_tot = 0.0;
  double gamma_ba = 0.0;
  double eta = 1.0;
  FeedbackConfig feedback;

  double omega(Mode s) const { return s == Mode::Plus ? omega_plus : omega_minus; }
  double alpha(Mode s) const { return s == Mode::Plus ? alpha_plus : alpha_minus; }
};

/// Assembles A, B, C, V, W, M in units of omega0.
inline StateSpaceModel build_model(const PhysicalParams& params, const FeedbackConfig& fb) {
  params.validate();
  const double w0 = params.omega0;

  StateSpaceModel m;
  m.g = params.g / w0;
  m.gamma = params.gamma / w0;
  m.gamma_ba = params.gamma_ba / w0;
  m.gamma_m = params.gamma_m() / w0;
  m.gamma_tot = params.gamma_tot() / w0;
  m.eta = params.eta;
  m.feedback = fb;

  m.omega_plus = 1.0;
  m.omega_minus = std::sqrt(1.0 + 4.0 * m.g);
  m.alpha_plus = 1.0;
  m.alpha_minus = std::sqrt(m.omega_minus);

  for (Mode s : {Mode::Plus, Mode::Minus}) {
    const int o = mode_offset(s);
    m.a_mat(o, o + 1) = m.omega(s);
    m.a_mat(o + 1, o) = -m.omega(s);
    m.a_mat(o + 1, o + 1) = -m.gamma;
    m.v_mat(o + 1, o + 1) = m.gamma_tot / (m.alpha(s) * m.alpha(s));
  }

  const double sqrt_gm = std::sqrt(m.gamma_m);
  m.c_mat(0, 0) = sqrt_gm / m.alpha_plus;
  m.c_mat(1, 2) = sqrt_gm / m.alpha_minus;

  if (fb.mode == FeedbackMode::Independent) {
    // u+ drives p+, u- drives p-.
    m.b_mat = MatX::Zero(4, 2);
    m.b_mat(1, 0) = 1.0;
    m.b_mat(3, 1) = 1.0;
  } else {
    if (std::abs(params.q1) == std::abs(params.q2)) {
      throw ControllabilityError(
          "single feedback requires |Q1| != |Q2|; with equal charge magnitudes the "
          "differential mode is not actuated and the system is uncontrollable");
    }
    const double ratio = (params.q1 - params.q2) / (params.q1 + params.q2);
    m.b_mat = MatX::Zero(4, 1);
    m.b_mat(1, 0) = 1.0 / m.alpha_plus;
    m.b_mat(3, 0) = ratio / m.alpha_minus;
  }
  return m;
}

/// Symplectic map S with X_normal = S X_bare, X_bare = (x1, p1, x2, p2).
inline Mat4 normal_mode_transform(double alpha_plus, double alpha_minus) {
  const double r = 1.0 / std::sqrt(2.0);
  Mat4 s = Mat4::Zero();
  s(0, 0) = alpha_plus * r;
  s(0, 2) = alpha_plus * r;
  s(1, 1) = r / alpha_plus;
  s(1, 3) = r / alpha_plus;
  s(2, 0) = alpha_minus * r;
  s(2, 2) = -alpha_minus * r;
  s(3, 1) = r / alpha_minus;
  s(3, 3) = -r / alpha_minus;
  return s;
}

inline Mat4 normal_mode_transform(const StateSpaceModel& m) {
  return normal_mode_transform(m.alpha_plus, m.alpha_minus);
}

/// Numerical rank with singular values above rel_tol * sigma_max.
inline int numerical_rank(const MatX& mat, double rel_tol = 1e-9) {
  if (mat.size() == 0) return 0;
  Eigen::JacobiSVD<MatX> svd(mat);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  if (!(smax > 0.0)) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * smax) ++rank;
  return rank;
}

/// [C; CA; CA^2; CA^3]
inline MatX observability_matrix(const Mat4& a, const MatX& c) {
  const Eigen::Index p = c.rows();
  MatX obs(4 * p, 4);
  MatX block = c;
  for (int i = 0; i < 4; ++i) {
    obs.middleRows(i * p, p) = block;
    block = block * a;
  }
  return obs;
}

inline MatX observability_matrix(const StateSpaceModel& m) {
  return observability_matrix(m.a_mat, m.c_mat);
}

inline bool is_observable(const StateSpaceModel& m) {
  return numerical_rank(observability_matrix(m)) == 4;
}

/// [B, AB, A^2 B, A^3 B]
inline MatX controllability_matrix(const Mat4& a, const MatX& b) {
  const Eigen::Index k = b.cols();
  MatX ctrl(4, 4 * k);
  MatX block = b;
  for (int i = 0; i < 4; ++i) {
    ctrl.middleCols(i * k, k) = block;
    block = a * block;
  }
  return ctrl;
}

inline MatX controllability_matrix(const StateSpaceModel& m) {
  return controllability_matrix(m.a_mat, m.b_mat);
}

/// Hautus test: rank [A - lambda I, B] = n at every eigenvalue of A. Unlike
/// the Krylov matrix it stays well scaled when one mode frequency is small.
inline bool is_controllable(const Mat4& a, const MatX& b, double rel_tol = 1e-9) {
  using CMat = Eigen::MatrixXcd;
  const Eigen::EigenSolver<Mat4> es(a, false);
  const double scale = std::max(a.norm(), b.norm());
  if (!(scale > 0.0)) return false;
  CMat pencil(4, 4 + b.cols());
  pencil.rightCols(b.cols()) = b.cast<std::complex<double>>();
  for (Eigen::Index i = 0; i < 4; ++i) {
    pencil.leftCols(4) = a.cast<std::complex<double>>() - es.eigenvalues()(i) * CMat::Identity(4, 4);
    const Eigen::JacobiSVD<CMat> svd(pencil);
    if (!(svd.singularValues()(3) > rel_tol * scale)) return false;
  }
  return true;
}

inline bool is_controllable(const StateSpaceModel& m) { return is_controllable(m.a_mat, m.b_mat); }

/// Reason reported when is_controllable(m) is false.
inline std::string uncontrollable_reason(const StateSpaceModel& m) {
  if (m.feedback.mode == FeedbackMode::Single && m.omega_plus == m.omega_minus)
    return "single feedback is uncontrollable at g = 0: one input cannot steer two degenerate normal modes";
  return "(A, B) is not controllable";
}

}  // namespace lqgent
