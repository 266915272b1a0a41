#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "lqgent/control.hpp"
#include "lqgent/errors.hpp"
#include "lqgent/riccati.hpp"
#include "lqgent/types.hpp"

namespace lqgent {

struct TrajectoryConfig {
  double dt = 0.002;            ///< time step in units of 1/omega0
  std::int64_t steps = 1000;    ///< recorded steps after burn-in
  std::int64_t burn_in = 0;
  std::int64_t n_traj = 1;
  std::uint64_t seed = 42;
  std::int64_t decimation = 1;  ///< keep every n-th step in records
  bool stationary_start = true; ///< draw X_c(0) from N(0, Xi_ex)
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Vec4> x_c;
  std::vector<Vec2> photocurrents;
  std::vector<VecX> controls;

  std::size_t size() const { return times.size(); }
};

/// dX = drift X dt + noise_gain dw, I dt = C X dt + dw, u = -K X, E[dw dw^T] = (dt/2) I.
struct LinearSde {
  Mat4 drift = Mat4::Zero();
  Mat42 noise_gain = Mat42::Zero();
  Mat24 c_mat = Mat24::Zero();
  MatX k_gain = MatX::Zero(1, 4);
};

inline LinearSde conditional_mean_sde(const ClosedLoop& cl) {
  return {cl.a_closed, cl.kalman_gain, cl.model.c_mat, cl.k_gain};
}

inline constexpr double kDivergenceNorm = 1e6;

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent substream for trajectory `index` of a run seeded with `seed`.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(index)));
}

/// Wiener increments with E[dW^2] = dt/2 per channel.
class WienerSource {
 public:
  WienerSource(std::mt19937_64& engine, double dt)
      : engine_(engine), dist_(0.0, std::sqrt(0.5 * dt)) {}

  Vec2 operator()() {
    const double a = dist_(engine_);
    const double b = dist_(engine_);
    return {a, b};
  }

 private:
  std::mt19937_64& engine_;
  std::normal_distribution<double> dist_;
};

/// Sample from N(0, cov) for PSD cov (negative eigenvalues clipped).
inline Vec4 sample_gaussian(const Mat4& cov, std::mt19937_64& engine) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(symmetrize(cov));
  const Vec4 scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec4 z;
  for (int i = 0; i < 4; ++i) z(i) = n01(engine);
  return es.eigenvectors() * scale.asDiagonal() * z;
}

// ---------------------------------------------------------------------------
// Integration

namespace detail {

inline void check_finite_state(const Vec4& x, std::int64_t step) {
  if (!(x.norm() <= kDivergenceNorm)) {
    std::ostringstream os;
    os << "trajectory diverged at step " << step << " (|X_c| > " << kDivergenceNorm
       << "); check dt against the closed-loop rates and the feedback gain";
    throw StabilityError(os.str());
  }
}

}  // namespace detail

/// Euler-Maruyama integration of one trajectory from x0. Records `steps`
/// points after `burn_in` unrecorded steps.
inline TrajectoryRecord simulate_sde(const LinearSde& sde, const Vec4& x0, const TrajectoryConfig& cfg,
                                     std::uint64_t traj_index = 0) {
  if (!(cfg.dt > 0.0) || cfg.steps < 0 || cfg.burn_in < 0 || cfg.decimation < 1)
    throw InputError("simulate: invalid trajectory configuration");
  std::mt19937_64 engine = substream(cfg.seed, traj_index);
  return [&] {
    WienerSource dw(engine, cfg.dt);
    const Mat4 step_map = Mat4::Identity() + cfg.dt * sde.drift;
    TrajectoryRecord rec;
    const std::int64_t kept = cfg.steps / cfg.decimation + 1;
    rec.times.reserve(kept);
    rec.x_c.reserve(kept);
    rec.photocurrents.reserve(kept);
    rec.controls.reserve(kept);

    Vec4 x = x0;
    const std::int64_t total = cfg.burn_in + cfg.steps;
    for (std::int64_t n = 0; n < total; ++n) {
      const Vec2 w = dw();
      const std::int64_t rec_idx = n - cfg.burn_in;
      if (rec_idx >= 0 && rec_idx % cfg.decimation == 0) {
        rec.times.push_back(static_cast<double>(n) * cfg.dt);
        rec.x_c.push_back(x);
        rec.photocurrents.push_back(sde.c_mat * x + w / cfg.dt);
        rec.controls.push_back(-sde.k_gain * x);
      }
      x = step_map * x + sde.noise_gain * w;
      detail::check_finite_state(x, n);
    }
    return rec;
  }();
}

/// Validates the trajectory invariants against a closed loop:
/// dt * max(Omega+, Omega-) < 0.05 and burn-in >= 10 closed-loop decay times.
inline void validate_trajectory_config(const ClosedLoop& cl, const TrajectoryConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InputError("trajectory: dt must be > 0");
  const double fastest = std::max(cl.model.omega_plus, cl.model.omega_minus);
  if (!(cfg.dt * fastest < 0.05)) {
    std::ostringstream os;
    os << "trajectory: dt * Omega = " << cfg.dt * fastest << " must be < 0.05";
    throw InputError(os.str());
  }
  const double decay = -riccati::spectral_abscissa(cl.a_closed);
  const double needed = 10.0 / decay;
  if (static_cast<double>(cfg.burn_in) * cfg.dt < needed) {
    std::ostringstream os;
    os << "trajectory: burn-in of " << static_cast<double>(cfg.burn_in) * cfg.dt
       << " is shorter than 10 closed-loop decay times (" << needed << ")";
    throw InputError(os.str());
  }
  if (cfg.steps < 0 || cfg.n_traj < 1 || cfg.decimation < 1)
    throw InputError("trajectory: steps >= 0, n_traj >= 1 and decimation >= 1 required");
}

/// Smallest burn-in (in steps) satisfying the 10-decay-time rule.
inline std::int64_t minimum_burn_in(const ClosedLoop& cl, double dt) {
  const double decay = -riccati::spectral_abscissa(cl.a_closed);
  return static_cast<std::int64_t>(std::ceil(10.0 / decay / dt));
}

inline Vec4 initial_state(const ClosedLoop& cl, const TrajectoryConfig& cfg, std::uint64_t traj_index) {
  if (!cfg.stationary_start) return Vec4::Zero();
  // Separate stream from the Wiener increments of the same trajectory.
  std::mt19937_64 engine = substream(~cfg.seed, traj_index);
  return sample_gaussian(cl.xi_excess.matrix(), engine);
}

/// Single closed-loop trajectory of the conditional means.
inline TrajectoryRecord simulate(const ClosedLoop& cl, const TrajectoryConfig& cfg, std::uint64_t traj_index = 0) {
  validate_trajectory_config(cl, cfg);
  return simulate_sde(conditional_mean_sde(cl), initial_state(cl, cfg, traj_index), cfg, traj_index);
}

inline TrajectoryRecord simulate(const PhysicalParams& params, const FeedbackConfig& fb, const CostKind& cost,
                                 const TrajectoryConfig& cfg, std::uint64_t traj_index = 0) {
  return simulate(closed_loop(params, fb, cost), cfg, traj_index);
}

/// Terminal states X_c(t_end) of n_traj independent trajectories, row i from
/// substream i. Threads only split the index range, so the result does not
/// depend on the worker count.
inline MatX ensemble_terminal_states(const ClosedLoop& cl, const TrajectoryConfig& cfg, unsigned threads = 0) {
  validate_trajectory_config(cl, cfg);
  const LinearSde sde = conditional_mean_sde(cl);
  const Mat4 step_map = Mat4::Identity() + cfg.dt * sde.drift;
  const std::int64_t total = cfg.burn_in + cfg.steps;
  MatX out(cfg.n_traj, 4);

  auto run = [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      const auto idx = static_cast<std::uint64_t>(i);
      std::mt19937_64 engine = substream(cfg.seed, idx);
      WienerSource dw(engine, cfg.dt);
      Vec4 x = initial_state(cl, cfg, idx);
      for (std::int64_t n = 0; n < total; ++n) {
        x = step_map * x + sde.noise_gain * dw();
        if ((n & 1023) == 0) detail::check_finite_state(x, n);
      }
      detail::check_finite_state(x, total);
      out.row(i) = x.transpose();
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, cfg.n_traj));
  if (threads <= 1) {
    run(0, cfg.n_traj);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::int64_t chunk = (cfg.n_traj + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::int64_t b = t * chunk;
    const std::int64_t e = std::min<std::int64_t>(cfg.n_traj, b + chunk);
    pool.emplace_back([&, b, e, t] {
      try {
        run(b, e);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Second-moment matrix (1/N) sum x x^T of the rows.
inline Mat4 second_moment(const MatX& samples) {
  return symmetrize(Mat4(samples.transpose() * samples / static_cast<double>(samples.rows())));
}

struct EnsembleComparison {
  Mat4 estimate = Mat4::Zero();   ///< ensemble E[X_c X_c^T]
  Mat4 reference = Mat4::Zero();  ///< Lyapunov Xi_ex
  Mat4 std_error = Mat4::Zero();  ///< bootstrap standard errors
  Mat4 z_score = Mat4::Zero();
  Vec4 mean = Vec4::Zero();
  Vec4 mean_std_error = Vec4::Zero();

  double max_abs_z() const { return z_score.cwiseAbs().maxCoeff(); }
};

/// Compares the ensemble second moment with a reference covariance using
/// bootstrap standard errors (deterministic resampling stream).
inline EnsembleComparison compare_ensemble(const MatX& samples, const Mat4& reference, std::uint64_t seed,
                                           int resamples = 200) {
  const Eigen::Index n = samples.rows();
  if (n < 2) throw InputError("compare_ensemble: need at least two samples");
  EnsembleComparison c;
  c.estimate = second_moment(samples);
  c.reference = reference;
  c.mean = samples.colwise().mean().transpose();
  const MatX centered = samples.rowwise() - c.mean.transpose();
  c.mean_std_error = (centered.cwiseAbs2().colwise().sum().transpose() / static_cast<double>(n - 1) /
                      static_cast<double>(n))
                         .cwiseSqrt();

  std::mt19937_64 engine = substream(seed, 0xB0075742ULL);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  Mat4 sum = Mat4::Zero();
  Mat4 sum_sq = Mat4::Zero();
  for (int b = 0; b < resamples; ++b) {
    Mat4 acc = Mat4::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec4 x = samples.row(pick(engine)).transpose();
      acc.noalias() += x * x.transpose();
    }
    acc /= static_cast<double>(n);
    sum += acc;
    sum_sq += acc.cwiseAbs2();
  }
  const double r = static_cast<double>(resamples);
  const Mat4 var = (sum_sq - sum.cwiseAbs2() / r) / (r - 1.0);
  c.std_error = var.cwiseMax(0.0).cwiseSqrt();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      c.z_score(i, j) = c.std_error(i, j) > 0.0 ? (c.estimate(i, j) - reference(i, j)) / c.std_error(i, j) : 0.0;
  return c;
}

}  // namespace lqgent
