#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lqgent/solvers.hpp"

using namespace lqgent;

namespace {

PhysicalParams baseline(double g = 0.0, double eta = 1.0) {
  PhysicalParams p;
  p.g = g;
  p.eta = eta;
  return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

void expect_mode_close(const Mat4& sigma, Mode s, const ModeCov& c, double tol) {
  const int o = mode_offset(s);
  EXPECT_LT(rel_err(sigma(o, o), c.xx), tol);
  EXPECT_LT(rel_err(sigma(o, o + 1), c.xp), tol);
  EXPECT_LT(rel_err(sigma(o + 1, o + 1), c.pp), tol);
}

}  // namespace

TEST(Lyapunov, ZeroNoiseGivesZero) {
  Mat4 a = -0.3 * Mat4::Identity();
  a(0, 1) = 1.0;
  EXPECT_TRUE(solve_lyapunov(a, Mat4::Zero()).matrix().isZero(0.0));
}

TEST(Lyapunov, ScalarBalance) {
  const double kappa = 0.7;
  Mat4 n = Mat4::Random();
  n = n * n.transpose();
  const Mat4 x = solve_lyapunov(-(kappa / 2.0) * Mat4::Identity(), n).matrix();
  EXPECT_LT((x - n / kappa).norm(), 1e-13 * n.norm());
}

TEST(Lyapunov, RandomHurwitzResidual) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    Mat4 a;
    for (int i = 0; i < 16; ++i) a.data()[i] = nd(rng);
    const double shift = riccati::spectral_abscissa(a) + 0.05 + std::abs(nd(rng));
    a -= shift * Mat4::Identity();
    Mat4 l;
    for (int i = 0; i < 16; ++i) l.data()[i] = nd(rng);
    const Mat4 n = l * l.transpose();
    const Mat4 x = solve_lyapunov(a, n).matrix();
    EXPECT_LT((a * x + x * a.transpose() + n).norm() / n.norm(), 1e-10) << trial;
  }
}

TEST(Lyapunov, RejectsUnstableDrift) {
  EXPECT_THROW(solve_lyapunov(Mat4::Identity(), Mat4::Identity()), SolverError);
}

TEST(FilterCare, MatchesClosedFormAtZeroCoupling) {
  const auto m = build_model(baseline(0.0), {});
  const Mat4 s = solve_filter_care(m).value;
  for (Mode mode : {Mode::Plus, Mode::Minus}) expect_mode_close(s, mode, closed_form_conditional(mode, m), 1e-10);
}

TEST(FilterCare, BlockDiagonal) {
  for (double g : {-0.24, -0.1, 0.0, 0.5, 2.0}) {
    const auto m = build_model(baseline(g, 0.6), {});
    const Mat4 s = solve_filter_care(m).value;
    EXPECT_LT(s.topRightCorner(2, 2).cwiseAbs().maxCoeff(), 1e-14 * s.norm()) << g;
  }
}

TEST(FilterCare, OracleGridBothBackends) {
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      const double g = -0.24 + 1.24 * i / 19.0;
      const double eta = 0.1 + 0.9 * j / 19.0;
      const auto m = build_model(baseline(g, eta), {});
      const Mat4 schur = solve_filter_care(m, CareMethod::HamiltonianSchur).value;
      const Mat4 newton = solve_filter_care(m, CareMethod::NewtonKleinman).value;
      EXPECT_LT((schur - newton).norm() / schur.norm(), 1e-9);
      for (Mode mode : {Mode::Plus, Mode::Minus}) expect_mode_close(schur, mode, closed_form_conditional(mode, m), 1e-9);
    }
  }
}

TEST(FilterCare, CorrelationIdentity) {
  for (double g : {-0.2, 0.1, 1.0}) {
    const auto m = build_model(baseline(g, 0.4), {});
    const Mat4 s = solve_filter_care(m).value;
    for (Mode mode : {Mode::Plus, Mode::Minus}) {
      const int o = mode_offset(mode);
      const double a2w = m.alpha(mode) * m.alpha(mode) * m.omega(mode);
      EXPECT_LT(rel_err(s(o, o + 1), m.gamma_m / a2w * s(o, o) * s(o, o)), 1e-9);
    }
  }
}

TEST(FilterCare, WeakDecoherenceApproximation) {
  const auto m = build_model(baseline(0.0), {});
  for (Mode mode : {Mode::Plus, Mode::Minus}) {
    const ModeCov exact = closed_form_conditional(mode, m);
    const ModeCov approx = approx_conditional(mode, m);
    EXPECT_LT(rel_err(exact.xx, approx.xx), 2.0 * m.gamma_tot);
    EXPECT_LT(rel_err(exact.pp, approx.pp), 2.0 * m.gamma_tot);
  }
}

TEST(FilterCare, UnitRatesAgainstNumeric) {
  // gamma = 0, Gamma_tot = Gamma_m, alpha = 1.
  PhysicalParams p = baseline(0.0);
  p.gamma = 0.0;
  p.gamma_th = 0.0;
  p.gamma_ba = 1.0;
  const auto m = build_model(p, {});
  const Mat4 s = solve_filter_care(m).value;
  // xx = (1/2) sqrt(2 (sqrt(3) - 1)) from the closed form at these rates.
  const double expected_xx = 0.5 * std::sqrt(2.0 * (std::sqrt(3.0) - 1.0));
  EXPECT_NEAR(s(0, 0), expected_xx, 1e-12);
  expect_mode_close(s, Mode::Plus, closed_form_conditional(Mode::Plus, m), 1e-12);
}

TEST(FilterCare, WeakDecoherenceLimit) {
  // Gamma_th = 0, eta = 1, gamma = 0, Gamma_ba -> 0: the closed form tends to
  // xx = pp = sqrt(Gamma_tot / 2 Gamma_m) = 1/sqrt(2), xp -> 0.
  PhysicalParams p = baseline(0.0);
  p.gamma = 0.0;
  p.gamma_th = 0.0;
  for (double gba : {1e-3, 1e-5, 1e-7}) {
    p.gamma_ba = gba;
    const auto m = build_model(p, {});
    const Mat4 s = solve_filter_care(m).value;
    const auto nu = symplectic_eigenvalues(s);
    EXPECT_NEAR(s(0, 0), std::sqrt(0.5), 2.0 * gba);
    EXPECT_NEAR(s(1, 1), std::sqrt(0.5), 2.0 * gba);
    EXPECT_NEAR(s(0, 1), 0.0, 2.0 * gba);
    EXPECT_NEAR(nu[0], std::sqrt(0.5), 2.0 * gba);
    const ModeCov cm = closed_form_conditional(Mode::Minus, m);
    EXPECT_LT(rel_err(s(2, 2), cm.xx), 1e-9);
    EXPECT_LT(rel_err(s(3, 3), cm.pp), 1e-9);
    EXPECT_NEAR(s(2, 3), cm.xp, 1e-10);  // absolute: xp is O(Gamma_ba) here

    // Gamma_th = Gamma_ba: Gamma_tot = 2 Gamma_m and the variances tend to 1.
    PhysicalParams q = p;
    q.gamma_th = gba;
    const Mat4 t = solve_filter_care(build_model(q, {})).value;
    EXPECT_NEAR(t(0, 0), 1.0, 4.0 * gba);
    EXPECT_NEAR(t(3, 3), 1.0, 4.0 * gba);
    EXPECT_NEAR(min_symplectic_eigenvalue(t), 1.0, 4.0 * gba);
  }
}

TEST(FilterCare, MonotoneInThermalRate) {
  PhysicalParams p = baseline(-0.15, 0.8);
  Vec4 prev = Vec4::Zero();
  for (double gth : {0.0, 0.001, 0.005, 0.02, 0.1, 0.5}) {
    p.gamma_th = gth;
    const Vec4 d = solve_filter_care(build_model(p, {})).value.diagonal();
    EXPECT_TRUE((d.array() >= prev.array()).all()) << gth;
    prev = d;
  }
}

TEST(FilterCare, PhysicalEverywhere) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> g(-0.2499, 3.0), eta(0.01, 1.0), th(0.0, 0.2);
  for (int i = 0; i < 300; ++i) {
    PhysicalParams p = baseline(g(rng), eta(rng));
    p.gamma_th = th(rng);
    EXPECT_GE(min_symplectic_eigenvalue(solve_filter_care(build_model(p, {})).value), 0.5 - 1e-9);
  }
}

TEST(ControlCare, ZeroCostGivesZero) {
  const auto m = build_model(baseline(-0.1), {});
  EXPECT_TRUE(solve_control_care(m, Mat4::Zero(), m.feedback).value.isZero(0.0));
}

TEST(ControlCare, IndependentCoolIsBlockDiagonal) {
  const auto m = build_model(baseline(-0.2), {FeedbackMode::Independent, 0.1});
  Mat4 p = Mat4::Zero();
  p.diagonal() << 1.0, 1.0, m.omega_minus, m.omega_minus;
  const Mat4 x = solve_control_care(m, p, m.feedback).value;
  EXPECT_LT(x.topRightCorner(2, 2).norm(), 1e-12 * x.norm());
  EXPECT_LT(riccati::relative_residual(control_problem(m, p, m.feedback), x), 1e-10);
}

TEST(ControlCare, BackendsAgree) {
  for (FeedbackMode mode : {FeedbackMode::Single, FeedbackMode::Independent}) {
    const auto m = build_model(baseline(-0.2), {mode, 0.1});
    Mat4 p = Mat4::Zero();
    p(0, 0) = 2.0;
    p(3, 3) = 2.0 * m.alpha_minus * m.alpha_minus;
    const Mat4 a = solve_control_care(m, p, m.feedback, CareMethod::HamiltonianSchur).value;
    const Mat4 b = solve_control_care(m, p, m.feedback, CareMethod::NewtonKleinman).value;
    EXPECT_LT((a - b).norm() / a.norm(), 1e-9);
  }
}

TEST(ControlCare, SmallEffortStaysAccurate) {
  for (double q : {1e-3, 1e-5, 1e-7}) {
    const FeedbackConfig fb{FeedbackMode::Independent, q};
    const auto m = build_model(baseline(-0.22), fb);
    Mat4 p = Mat4::Zero();
    p.diagonal() << 1.0, 1.0, m.omega_minus, m.omega_minus;
    const auto sol = solve_control_care(m, p, fb);
    EXPECT_LT(sol.residual_norm, 1e-10) << q;
  }
}

TEST(ControlCare, InputErrors) {
  const auto m = build_model(baseline(-0.1), {});
  Mat4 p = Mat4::Identity();
  p(0, 1) = 0.5;
  EXPECT_THROW(solve_control_care(m, p, m.feedback), InputError);
  EXPECT_THROW(solve_control_care(m, -Mat4::Identity(), m.feedback), InputError);
  EXPECT_THROW(solve_control_care(m, Mat4::Identity(), {FeedbackMode::Independent, 0.0}), InputError);
}

TEST(ClosedForm, RequiresMeasurement) {
  auto m = build_model(baseline(), {});
  m.gamma_m = 0.0;
  EXPECT_THROW(closed_form_conditional(Mode::Plus, m), InputError);
}
