#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

#include "lqgent/io.hpp"
#include "lqgent/trajectory.hpp"

using namespace lqgent;

namespace {

PhysicalParams baseline(double g = 0.0, double eta = 1.0) {
  PhysicalParams p;
  p.g = g;
  p.eta = eta;
  return p;
}

/// The increments must have variance dt/2; checked once before any test runs.
class WienerConventionCheck : public ::testing::Environment {
 public:
  void SetUp() override {
    const double dt = 0.01;
    std::mt19937_64 engine = substream(12345, 0);
    WienerSource dw(engine, dt);
    const int n = 200000;
    double s0 = 0.0, s1 = 0.0, cross = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec2 w = dw();
      s0 += w(0) * w(0);
      s1 += w(1) * w(1);
      cross += w(0) * w(1);
    }
    const double target = 0.5 * dt;
    const double se = target * std::sqrt(2.0 / n);
    ASSERT_NEAR(s0 / n, target, 5.0 * se);
    ASSERT_NEAR(s1 / n, target, 5.0 * se);
    ASSERT_NEAR(cross / n, 0.0, 5.0 * target / std::sqrt(n));
  }
};

[[maybe_unused]] ::testing::Environment* const kWienerCheck =
    ::testing::AddGlobalTestEnvironment(new WienerConventionCheck);

ClosedLoop fast_loop() {
  // Closed-loop rates between 0.6 and 1.3, so short burn-in and small step bias.
  return closed_loop(baseline(-0.1, 1.0), {FeedbackMode::Independent, 1.0}, CostKind::cool());
}

}  // namespace

TEST(Trajectory, FreeDampedOscillation) {
  PhysicalParams p = baseline(0.0);
  p.gamma = 0.1;
  const auto m = build_model(p, {});
  LinearSde sde;
  sde.drift = m.a_mat;
  sde.c_mat = m.c_mat;
  sde.k_gain = MatX::Zero(2, 4);
  TrajectoryConfig cfg;
  cfg.dt = 1e-4;
  cfg.steps = 100000;
  const Vec4 x0(1.0, 0.0, 0.0, 0.0);
  const auto rec = simulate_sde(sde, x0, cfg);
  ASSERT_EQ(rec.size(), 100000u);
  for (std::size_t n : {std::size_t(0), std::size_t(25000), std::size_t(99999)}) {
    const double t = rec.times[n];
    const Vec4 exact = (m.a_mat * t).exp() * x0;
    EXPECT_LT((rec.x_c[n] - exact).norm(), 2e-3) << t;
  }
  // Envelope exp(-gamma t / 2) and period 2 pi / Omega+.
  const double t_end = rec.times.back();
  const double omega_d = std::sqrt(1.0 - 0.0025);
  const double expected = std::exp(-0.05 * t_end) *
                          (std::cos(omega_d * t_end) + 0.05 / omega_d * std::sin(omega_d * t_end));
  EXPECT_NEAR(rec.x_c.back()(0), expected, 2e-3);
  EXPECT_TRUE(rec.controls.back().isZero(0.0));
}

TEST(Trajectory, BitIdenticalForFixedSeed) {
  const auto cl = fast_loop();
  TrajectoryConfig cfg;
  cfg.dt = 0.005;
  cfg.burn_in = minimum_burn_in(cl, cfg.dt);
  cfg.steps = 2000;
  cfg.seed = 42;
  const auto a = simulate(cl, cfg, 3);
  const auto b = simulate(cl, cfg, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.x_c[i], b.x_c[i]);
    ASSERT_EQ(a.photocurrents[i], b.photocurrents[i]);
    ASSERT_EQ(a.controls[i], b.controls[i]);
  }
  const auto c = simulate(cl, cfg, 4);
  EXPECT_NE(a.x_c.back(), c.x_c.back());
}

TEST(Trajectory, RecordShapesAndDecimation) {
  const auto cl = closed_loop(baseline(-0.2), {FeedbackMode::Single, 0.1}, CostKind::epr(0.0));
  TrajectoryConfig cfg;
  cfg.dt = 0.01;
  cfg.burn_in = minimum_burn_in(cl, cfg.dt);
  cfg.steps = 1000;
  cfg.decimation = 10;
  const auto rec = simulate(cl, cfg);
  EXPECT_EQ(rec.size(), 100u);
  EXPECT_EQ(rec.x_c.size(), rec.photocurrents.size());
  EXPECT_EQ(rec.controls.front().size(), 1);
  EXPECT_NEAR(rec.times[1] - rec.times[0], 0.1, 1e-12);

  std::ostringstream os;
  io::write_trajectory_csv(rec, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\r')), "t,x_plus,p_plus,x_minus,p_minus,I_plus,I_minus,u1");
}

TEST(Trajectory, IndependentCsvHasTwoControls) {
  const auto cl = fast_loop();
  TrajectoryConfig cfg;
  cfg.dt = 0.01;
  cfg.burn_in = minimum_burn_in(cl, cfg.dt);
  cfg.steps = 3;
  std::ostringstream os;
  io::write_trajectory_csv(simulate(cl, cfg), os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\r')), "t,x_plus,p_plus,x_minus,p_minus,I_plus,I_minus,u1,u2");
}

TEST(Trajectory, ConfigValidation) {
  const auto cl = fast_loop();
  TrajectoryConfig cfg;
  cfg.dt = 0.06;
  cfg.burn_in = 1000000;
  EXPECT_THROW(validate_trajectory_config(cl, cfg), InputError);
  cfg.dt = 0.01;
  cfg.burn_in = minimum_burn_in(cl, cfg.dt) - 10;
  EXPECT_THROW(validate_trajectory_config(cl, cfg), InputError);
  cfg.burn_in += 10;
  EXPECT_NO_THROW(validate_trajectory_config(cl, cfg));
}

TEST(Trajectory, DivergenceIsReported) {
  LinearSde sde;
  sde.drift = 0.5 * Mat4::Identity();
  TrajectoryConfig cfg;
  cfg.dt = 0.01;
  cfg.steps = 100000;
  EXPECT_THROW(simulate_sde(sde, Vec4::Ones(), cfg), StabilityError);
}

TEST(Trajectory, InnovationIncrementsHaveHalfDtVariance) {
  const auto cl = fast_loop();
  TrajectoryConfig cfg;
  cfg.dt = 0.01;
  cfg.burn_in = minimum_burn_in(cl, cfg.dt);
  cfg.steps = 100000;
  const auto rec = simulate(cl, cfg);
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t n = 0; n < rec.size(); ++n) {
    const Vec2 dw = (rec.photocurrents[n] - cl.model.c_mat * rec.x_c[n]) * cfg.dt;
    s0 += dw(0) * dw(0);
    s1 += dw(1) * dw(1);
  }
  const double count = static_cast<double>(rec.size());
  const double target = 0.5 * cfg.dt;
  const double se = target * std::sqrt(2.0 / count);
  EXPECT_NEAR(s0 / count, target, 4.0 * se);
  EXPECT_NEAR(s1 / count, target, 4.0 * se);
}

TEST(Ensemble, MeanVanishesAndCovarianceMatches) {
  const auto cl = fast_loop();
  TrajectoryConfig cfg;
  cfg.dt = 0.005;
  cfg.burn_in = minimum_burn_in(cl, cfg.dt);
  cfg.steps = 0;
  cfg.n_traj = 2000;
  const MatX samples = ensemble_terminal_states(cl, cfg, 2);
  const auto cmp = compare_ensemble(samples, cl.xi_excess.matrix(), cfg.seed);
  for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(cmp.mean(i)), 4.0 * cmp.mean_std_error(i)) << i;
  EXPECT_LT(cmp.max_abs_z(), 4.0);
}

TEST(Ensemble, IndependentOfWorkerCount) {
  const auto cl = fast_loop();
  TrajectoryConfig cfg;
  cfg.dt = 0.01;
  cfg.burn_in = minimum_burn_in(cl, cfg.dt);
  cfg.n_traj = 37;
  const MatX a = ensemble_terminal_states(cl, cfg, 1);
  const MatX b = ensemble_terminal_states(cl, cfg, 4);
  EXPECT_EQ(a, b);
}

TEST(Ensemble, HalvingStepWithinMonteCarloError) {
  const auto cl = fast_loop();
  TrajectoryConfig cfg;
  cfg.dt = 0.01;
  cfg.burn_in = minimum_burn_in(cl, cfg.dt);
  cfg.n_traj = 2000;
  const auto coarse = compare_ensemble(ensemble_terminal_states(cl, cfg), cl.xi_excess.matrix(), 1);
  cfg.dt = 0.005;
  cfg.burn_in = minimum_burn_in(cl, cfg.dt);
  cfg.seed = 43;
  const auto fine = compare_ensemble(ensemble_terminal_states(cl, cfg), cl.xi_excess.matrix(), 2);
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      const double se = std::hypot(coarse.std_error(i, j), fine.std_error(i, j));
      EXPECT_LT(std::abs(coarse.estimate(i, j) - fine.estimate(i, j)), 3.0 * se) << i << j;
    }
  }
}
