#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lqgent/lqgent.hpp"

namespace lqgent::cli {

enum ExitCode : int { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
};

inline RunConfig load_config(const Options& opt) {
  RunConfig cfg;
  if (opt.config.empty()) {
    cfg = default_run_config();
  } else {
    std::ifstream in(opt.config);
    if (!in) throw ConfigError("cannot read config file '" + opt.config + "'");
    cfg = parse_run_config(in);
  }
  if (opt.out) cfg.output.dir = *opt.out;
  if (opt.threads) cfg.sweep.threads = *opt.threads;
  if (opt.seed) cfg.trajectory.cfg.seed = *opt.seed;
  if (opt.format) cfg.output.format = parse_format(*opt.format);
  return cfg;
}

inline void print_matrix(std::ostream& os, const std::string& name, const Mat4& m) {
  os << name << ":\n";
  for (int i = 0; i < 4; ++i) {
    os << "  ";
    for (int j = 0; j < 4; ++j) os << std::setw(15) << std::setprecision(8) << m(i, j);
    os << '\n';
  }
}

inline void echo_parameters(std::ostream& os, const RunConfig& c) {
  const PhysicalParams& p = c.physical;
  os << "resolved parameters (omega0 = 1):\n"
     << "  g/omega0        = " << p.g << '\n'
     << "  gamma/omega0    = " << p.gamma << '\n'
     << "  Gamma_ba/omega0 = " << p.gamma_ba << '\n'
     << "  Gamma_th/omega0 = " << p.gamma_th << '\n'
     << "  eta             = " << p.eta << '\n'
     << "  Q1, Q2          = " << p.q1 << ", " << p.q2 << '\n'
     << "  feedback        = " << std::string(to_string(c.feedback.mode)) << ", q = " << c.feedback.effort << '\n'
     << "  cost            = " << to_string(c.cost) << '\n';
  if (c.omega0_si > 0.0) os << "  omega0 [rad/s]  = " << c.omega0_si << '\n';
}

inline std::filesystem::path out_path(const RunConfig& c, const std::string& name) {
  return std::filesystem::path(c.output.dir) / (c.output.prefix + name);
}

inline bool wants_csv(const RunConfig& c) { return c.output.format != OutputFormat::Json; }
inline bool wants_json(const RunConfig& c) { return c.output.format != OutputFormat::Csv; }

inline int cmd_steady(const RunConfig& c, bool write_json, std::ostream& os) {
  echo_parameters(os, c);
  const StateSpaceModel m = build_model(c.physical, c.feedback);
  const ClosedLoop cl = closed_loop(m, c.cost);
  const double theta = c.cost.type == CostKind::Type::Epr ? c.cost.theta : default_epr_theta(m.g);
  const EntanglementReport cond = entanglement_report(cl.sigma_cond, m, theta);
  const EntanglementReport unc = entanglement_report(cl.sigma_uncond, m, theta);
  const ConditionalThresholds t = threshold_conditional(c.physical);

  os << std::setprecision(10);
  print_matrix(os, "Sigma_cond (normal modes)", cl.sigma_cond.matrix());
  print_matrix(os, "Xi_excess (normal modes)", cl.xi_excess.matrix());
  print_matrix(os, "Sigma_uncond (normal modes)", cl.sigma_uncond.matrix());
  os << std::setprecision(10) << "E_N(cond)     = " << cond.log_negativity << "   nu = " << cond.symplectic_nu << '\n'
     << "E_N(uncond)   = " << unc.log_negativity << "   nu = " << unc.symplectic_nu << '\n'
     << "Delta_EPR(theta=" << theta << "): cond = " << cond.epr_variance << ", uncond = " << unc.epr_variance << '\n'
     << "thresholds: g+ = r^2 - 1/4 = " << t.g_plus << ", g- = -1/4 + 1/(16 r^2) = " << t.g_minus
     << "  (r = Gamma_tot/Gamma_ba)\n"
     << "            eta+ = 2r/sqrt(1+4g) = " << t.eta_plus << ", eta- = 2r sqrt(1+4g) = " << t.eta_minus << '\n'
     << "residuals: filter = " << cl.filter.residual_norm << ", control = " << cl.control.residual_norm << '\n';
  for (const auto& w : cl.warnings) os << "warning: " << w << '\n';

  if (write_json) {
    nlohmann::json j{{"schema_version", kSchemaVersion},
                     {"version", kVersion},
                     {"inputs", io::to_json(c.physical)},
                     {"feedback", {{"mode", std::string(to_string(c.feedback.mode))}, {"effort", c.feedback.effort}}},
                     {"cost", to_string(c.cost)},
                     {"sigma_cond", io::to_json(cl.sigma_cond.matrix())},
                     {"xi_excess", io::to_json(cl.xi_excess.matrix())},
                     {"sigma_uncond", io::to_json(cl.sigma_uncond.matrix())},
                     {"cond", {{"log_negativity", cond.log_negativity}, {"nu", cond.symplectic_nu},
                               {"epr_variance", cond.epr_variance}}},
                     {"uncond", {{"log_negativity", unc.log_negativity}, {"nu", unc.symplectic_nu},
                                 {"epr_variance", unc.epr_variance}}},
                     {"epr_theta", theta},
                     {"thresholds", {{"g_plus", t.g_plus}, {"g_minus", t.g_minus},
                                     {"eta_plus", t.eta_plus}, {"eta_minus", t.eta_minus}}}};
    const auto path = out_path(c, "steady.json");
    io::write_file(path, [&](std::ostream& f) { f << j.dump(2) << '\n'; });
    os << "wrote " << path.string() << '\n';
  }
  return kOk;
}

inline void boundary_extent(std::ostream& os, const std::string& name, const std::vector<Polyline>& lines) {
  std::size_t pts = 0;
  double gmin = 1e300, gmax = -1e300, emin = 1e300, emax = -1e300;
  for (const auto& l : lines) {
    for (const auto& p : l) {
      ++pts;
      gmin = std::min(gmin, p.g);
      gmax = std::max(gmax, p.g);
      emin = std::min(emin, p.eta);
      emax = std::max(emax, p.eta);
    }
  }
  os << name << " boundary: " << lines.size() << " polyline(s), " << pts << " points";
  if (pts) os << ", g/omega0 in [" << gmin << ", " << gmax << "], eta in [" << emin << ", " << emax << "]";
  os << '\n';
}

inline int cmd_sweep(const RunConfig& c, std::ostream& os) {
  echo_parameters(os, c);
  const SweepSpec spec = c.sweep_spec();
  os << "grid: g/omega0 in [" << spec.g_over_omega0.min << ", " << spec.g_over_omega0.max << "] x "
     << spec.g_over_omega0.count << ", eta in [" << spec.eta.min << ", " << spec.eta.max << "] x " << spec.eta.count
     << '\n';
  const SweepResult r = run_sweep(spec);

  os << "cells: " << r.meta.ok_cells << " ok, " << r.meta.failed_cells << " failed, " << r.meta.skipped_cells
     << " skipped\n";
  if (!r.meta.first_error.empty()) os << "first failure: " << r.meta.first_error << '\n';
  if (r.values.count(Quantity::NuCond)) os << "conditionally entangled cells: " << count_cells(r, Quantity::NuCond, 0.5) << '\n';
  if (r.values.count(Quantity::NuUncond))
    os << "unconditionally entangled cells: " << count_cells(r, Quantity::NuUncond, 0.5) << '\n';
  boundary_extent(os, "conditional", r.cond_boundary);
  if (spec.wants_closed_loop()) boundary_extent(os, "unconditional", r.uncond_boundary);
  os << "max residuals: filter = " << r.meta.max_filter_residual << ", control = " << r.meta.max_control_residual
     << '\n';

  if (wants_csv(c)) {
    const auto csv = out_path(c, "sweep.csv");
    io::write_file(csv, [&](std::ostream& f) { io::write_sweep_csv(r, f); });
    const auto meta = out_path(c, "sweep_meta.json");
    io::write_file(meta, [&](std::ostream& f) { f << io::sweep_metadata_json(r).dump(2) << '\n'; });
    os << "wrote " << csv.string() << '\n';
  }
  if (wants_json(c)) {
    const auto js = out_path(c, "sweep.json");
    io::write_file(js, [&](std::ostream& f) { f << io::to_json(r).dump(1) << '\n'; });
    os << "wrote " << js.string() << '\n';
  }
  return kOk;
}

inline int cmd_trajectory(const RunConfig& c, unsigned threads, std::ostream& os) {
  echo_parameters(os, c);
  const ClosedLoop cl = closed_loop(c.physical, c.feedback, c.cost);
  TrajectoryConfig t = c.trajectory.cfg;
  if (c.trajectory.auto_burn_in) t.burn_in = minimum_burn_in(cl, t.dt);
  try {
    validate_trajectory_config(cl, t);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  os << "trajectory: dt = " << t.dt << ", burn_in = " << t.burn_in << ", steps = " << t.steps
     << ", n_traj = " << t.n_traj << ", seed = " << t.seed << '\n';

  for (std::int64_t i = 0; i < c.trajectory.record; ++i) {
    const TrajectoryRecord rec = simulate(cl, t, static_cast<std::uint64_t>(i));
    const auto path = out_path(c, "trajectory_" + std::to_string(i) + ".csv");
    io::write_file(path, [&](std::ostream& f) { io::write_trajectory_csv(rec, f); });
    os << "wrote " << path.string() << '\n';
  }

  if (t.n_traj >= 2) {
    const MatX samples = ensemble_terminal_states(cl, t, threads);
    const EnsembleComparison cmp = compare_ensemble(samples, cl.xi_excess.matrix(), t.seed);
    os << "ensemble E[X_c X_c^T] vs Lyapunov Xi_excess (" << t.n_traj << " trajectories):\n"
       << "   i j       ensemble      lyapunov     std_error        z\n";
    std::ostringstream csv;
    csv << "i,j,ensemble,lyapunov,std_error,z\r\n";
    for (int i = 0; i < 4; ++i) {
      for (int j = i; j < 4; ++j) {
        os << "   " << i << ' ' << j << std::setw(14) << std::setprecision(6) << cmp.estimate(i, j) << std::setw(14)
           << cmp.reference(i, j) << std::setw(14) << cmp.std_error(i, j) << std::setw(9) << std::setprecision(3)
           << cmp.z_score(i, j) << '\n';
        csv << i << ',' << j << ',' << io::format_double(cmp.estimate(i, j)) << ','
            << io::format_double(cmp.reference(i, j)) << ',' << io::format_double(cmp.std_error(i, j)) << ','
            << io::format_double(cmp.z_score(i, j)) << "\r\n";
      }
    }
    os << "max |z| = " << cmp.max_abs_z() << '\n';
    const auto path = out_path(c, "ensemble.csv");
    io::write_file(path, [&](std::ostream& f) { f << csv.str(); });
    os << "wrote " << path.string() << '\n';
  }
  return kOk;
}

/// Runs the command line; returns the process exit code.
inline int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Steady-state LQG feedback and entanglement of two levitated particles"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "configuration file");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
    sub->add_option("--seed", opt.seed, "trajectory seed");
    sub->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"csv", "json", "both"}));
  };
  CLI::App* steady = app.add_subcommand("steady", "steady-state covariances and entanglement");
  CLI::App* sweep = app.add_subcommand("sweep", "(g, eta) phase-diagram sweep");
  CLI::App* traj = app.add_subcommand("trajectory", "Monte-Carlo conditional-mean trajectories");
  for (CLI::App* s : {steady, sweep, traj}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  }

  try {
    const RunConfig cfg = load_config(opt);
    if (steady->parsed()) return cmd_steady(cfg, opt.out.has_value(), out);
    if (sweep->parsed()) return cmd_sweep(cfg, out);
    return cmd_trajectory(cfg, opt.threads.value_or(0), out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const ControllabilityError& e) {
    err << "controllability error: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  }
}

}  // namespace lqgent::cli
