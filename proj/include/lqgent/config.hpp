#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lqgent/entanglement.hpp"
#include "lqgent/errors.hpp"
#include "lqgent/model.hpp"
#include "lqgent/sweep.hpp"
#include "lqgent/trajectory.hpp"

// Run configuration: a sectioned key = value document (the flat-table subset
// of TOML), parsed with Boost.PropertyTree's INI reader.
//
//   [physical]   omega0, g | g_over_omega0, gamma | gamma_over_omega0 | quality_factor,
//                gamma_ba | gamma_ba_over_omega0,
//                gamma_th | gamma_th_over_omega0 | gamma_th_over_gamma_ba, eta, q1, q2
//   [feedback]   mode = "single" | "independent", effort
//   [cost]       kind = "epr" | "cool", theta
//   [sweep]      g_min, g_max, g_count, eta_min, eta_max, eta_count, quantities, edge_margin
//   [trajectory] dt, steps, burn_in, n_traj, seed, decimation, record
//   [output]     dir, format = "csv" | "json" | "both", prefix
//
// Plain rate keys are SI (rad/s) and require omega0 in rad/s; the ratio
// forms are dimensionless. Each rate must be given in exactly one form.

namespace lqgent {

enum class OutputFormat { Csv, Json, Both };

inline OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  if (s == "both") return OutputFormat::Both;
  throw ConfigError("output format must be csv, json or both (got '" + s + "')");
}

struct OutputConfig {
  std::string dir = "out";
  std::string prefix;
  OutputFormat format = OutputFormat::Both;
};

struct TrajectorySection {
  TrajectoryConfig cfg;
  bool auto_burn_in = true;  ///< burn_in not given: use the 10-decay-time minimum
  std::int64_t record = 1;   ///< trajectories dumped as CSV
};

struct RunConfig {
  PhysicalParams physical;  ///< dimensionless (omega0 = 1)
  double omega0_si = 0.0;   ///< rad/s, 0 when not given
  FeedbackConfig feedback;
  CostKind cost = CostKind::epr(0.0);
  SweepSpec sweep;
  TrajectorySection trajectory;
  OutputConfig output;

  /// Sweep spec with the physical, feedback and cost sections applied.
  SweepSpec sweep_spec() const {
    SweepSpec s = sweep;
    s.fixed = physical;
    s.fb = feedback;
    s.cost = cost;
    return s;
  }
};

/// Baseline rates: Gamma_ba/omega0 = 0.05, Gamma_th/Gamma_ba = 0.05,
/// Q = 1e10, eta = 1, q = 0.1, Q1/Q2 = 3.
inline RunConfig default_run_config() {
  RunConfig c;
  c.physical.omega0 = 1.0;
  c.physical.g = 0.0;
  c.physical.gamma = 1e-10;
  c.physical.gamma_ba = 0.05;
  c.physical.gamma_th = 0.05 * 0.05;
  c.physical.eta = 1.0;
  c.physical.q1 = 3.0;
  c.physical.q2 = 1.0;
  c.feedback = {FeedbackMode::Independent, 0.1};
  return c;
}

namespace detail {

using boost::property_tree::ptree;

inline std::string clean_value(std::string v) {
  // Trailing comment outside quotes.
  bool quoted = false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '"') quoted = !quoted;
    if (!quoted && v[i] == '#') {
      v.erase(i);
      break;
    }
  }
  const auto b = v.find_first_not_of(" \t");
  const auto e = v.find_last_not_of(" \t\r");
  v = b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return v;
}

class Section {
 public:
  Section(std::string name, const ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) {
    seen_.insert(key);
    return tree_ && tree_->find(key) != tree_->not_found();
  }

  std::string text(const std::string& key) {
    seen_.insert(key);
    return clean_value(tree_->get<std::string>(key));
  }

  double number(const std::string& key) {
    const std::string v = text(key);
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out))
      throw ConfigError(where(key) + ": expected a finite number, got '" + v + "'");
    return out;
  }

  std::int64_t integer(const std::string& key) {
    const std::string v = text(key);
    std::int64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size())
      throw ConfigError(where(key) + ": expected an integer, got '" + v + "'");
    return out;
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    const std::string v = text(key);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size())
      throw ConfigError(where(key) + ": expected a non-negative integer, got '" + v + "'");
    return out;
  }

  std::optional<double> opt_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  /// Value of whichever of `keys` is present; error if more than one.
  std::optional<std::pair<std::string, double>> one_of(const std::vector<std::string>& keys) {
    std::optional<std::pair<std::string, double>> found;
    for (const auto& k : keys) {
      if (!has(k)) continue;
      if (found) throw ConfigError("[" + name_ + "] give only one of '" + found->first + "' and '" + k + "'");
      found = std::make_pair(k, number(k));
    }
    return found;
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!seen_.count(key)) throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
    }
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

 private:
  std::string name_;
  const ptree* tree_;
  std::set<std::string> seen_;
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = clean_value(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Parses a configuration document. Throws ConfigError on any syntax,
/// unknown-key or validation problem.
inline RunConfig parse_run_config(std::istream& in) {
  using detail::ptree;
  ptree root;
  try {
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  static const std::set<std::string> sections{"physical", "feedback", "cost", "sweep", "trajectory", "output"};
  for (const auto& [name, child] : root) {
    if (!sections.count(name)) throw ConfigError("unknown config section or top-level key '" + name + "'");
  }
  auto section = [&](const std::string& name) {
    auto it = root.find(name);
    return detail::Section(name, it == root.not_found() ? nullptr : &it->second);
  };

  RunConfig c = default_run_config();
  try {
    // [physical]
    auto ph = section("physical");
    double w0 = 0.0;
    if (auto v = ph.opt_number("omega0")) {
      if (!(*v > 0.0)) throw ConfigError("[physical] omega0 must be > 0");
      w0 = *v;
      c.omega0_si = w0;
    }
    auto rate = [&](const std::string& si, const std::vector<std::string>& ratios, double current) {
      std::vector<std::string> keys{si};
      keys.insert(keys.end(), ratios.begin(), ratios.end());
      const auto got = ph.one_of(keys);
      if (!got) return current;
      if (got->first == si) {
        if (w0 == 0.0) throw ConfigError("[physical] " + si + " is in rad/s and requires omega0");
        return got->second / w0;
      }
      return got->second;
    };
    c.physical.g = rate("g", {"g_over_omega0"}, c.physical.g);
    c.physical.gamma_ba = rate("gamma_ba", {"gamma_ba_over_omega0"}, c.physical.gamma_ba);
    {
      const auto got = ph.one_of({"gamma", "gamma_over_omega0", "quality_factor"});
      if (got) {
        if (got->first == "gamma") {
          if (w0 == 0.0) throw ConfigError("[physical] gamma is in rad/s and requires omega0");
          c.physical.gamma = got->second / w0;
        } else if (got->first == "quality_factor") {
          if (!(got->second > 0.0)) throw ConfigError("[physical] quality_factor must be > 0");
          c.physical.gamma = 1.0 / got->second;
        } else {
          c.physical.gamma = got->second;
        }
      }
    }
    {
      const auto got = ph.one_of({"gamma_th", "gamma_th_over_omega0", "gamma_th_over_gamma_ba"});
      if (got) {
        if (got->first == "gamma_th") {
          if (w0 == 0.0) throw ConfigError("[physical] gamma_th is in rad/s and requires omega0");
          c.physical.gamma_th = got->second / w0;
        } else if (got->first == "gamma_th_over_gamma_ba") {
          c.physical.gamma_th = got->second * c.physical.gamma_ba;
        } else {
          c.physical.gamma_th = got->second;
        }
      } else {
        c.physical.gamma_th = 0.05 * c.physical.gamma_ba;
      }
    }
    if (auto v = ph.opt_number("eta")) c.physical.eta = *v;
    if (auto v = ph.opt_number("q1")) c.physical.q1 = *v;
    if (auto v = ph.opt_number("q2")) c.physical.q2 = *v;
    ph.reject_unknown();
    c.physical.validate();

    // [feedback]
    auto fb = section("feedback");
    if (fb.has("mode")) {
      const std::string m = fb.text("mode");
      if (m == "single") c.feedback.mode = FeedbackMode::Single;
      else if (m == "independent") c.feedback.mode = FeedbackMode::Independent;
      else throw ConfigError("[feedback] mode must be single or independent (got '" + m + "')");
    }
    if (auto v = fb.opt_number("effort")) c.feedback.effort = *v;
    fb.reject_unknown();
    if (!(c.feedback.effort > 0.0)) throw ConfigError("[feedback] effort must be > 0");

    // [cost]
    auto co = section("cost");
    double theta = 0.0;
    if (auto v = co.opt_number("theta")) theta = *v;
    std::string kind = "epr";
    if (co.has("kind")) kind = co.text("kind");
    if (kind == "epr") c.cost = CostKind::epr(theta);
    else if (kind == "cool") c.cost = CostKind::cool();
    else throw ConfigError("[cost] kind must be epr or cool (got '" + kind + "')");
    co.reject_unknown();

    // [sweep]
    auto sw = section("sweep");
    if (auto v = sw.opt_number("g_min")) c.sweep.g_over_omega0.min = *v;
    if (auto v = sw.opt_number("g_max")) c.sweep.g_over_omega0.max = *v;
    if (sw.has("g_count")) c.sweep.g_over_omega0.count = static_cast<int>(sw.integer("g_count"));
    if (auto v = sw.opt_number("eta_min")) c.sweep.eta.min = *v;
    if (auto v = sw.opt_number("eta_max")) c.sweep.eta.max = *v;
    if (sw.has("eta_count")) c.sweep.eta.count = static_cast<int>(sw.integer("eta_count"));
    if (auto v = sw.opt_number("edge_margin")) c.sweep.edge_margin = *v;
    if (sw.has("quantities")) {
      c.sweep.quantities.clear();
      for (const auto& q : detail::split_list(sw.text("quantities"))) {
        const Quantity parsed = parse_quantity(q);
        if (!c.sweep.wants(parsed)) c.sweep.quantities.push_back(parsed);
      }
    }
    sw.reject_unknown();
    c.sweep.fixed = c.physical;
    c.sweep.fb = c.feedback;
    c.sweep.cost = c.cost;
    c.sweep.validate();

    // [trajectory]
    auto tr = section("trajectory");
    TrajectoryConfig& t = c.trajectory.cfg;
    if (auto v = tr.opt_number("dt")) t.dt = *v;
    if (tr.has("steps")) t.steps = tr.integer("steps");
    if (tr.has("burn_in")) {
      t.burn_in = tr.integer("burn_in");
      c.trajectory.auto_burn_in = false;
    }
    if (tr.has("n_traj")) t.n_traj = tr.integer("n_traj");
    if (tr.has("seed")) t.seed = tr.unsigned_integer("seed");
    if (tr.has("decimation")) t.decimation = tr.integer("decimation");
    if (tr.has("record")) c.trajectory.record = tr.integer("record");
    tr.reject_unknown();
    if (!(t.dt > 0.0) || t.steps < 0 || t.burn_in < 0 || t.n_traj < 1 || t.decimation < 1 ||
        c.trajectory.record < 0 || c.trajectory.record > t.n_traj)
      throw ConfigError("[trajectory] requires dt > 0, steps >= 0, burn_in >= 0, n_traj >= 1, decimation >= 1, "
                        "0 <= record <= n_traj");

    // [output]
    auto out = section("output");
    if (out.has("dir")) c.output.dir = out.text("dir");
    if (out.has("prefix")) c.output.prefix = out.text("prefix");
    if (out.has("format")) c.output.format = parse_format(out.text("format"));
    out.reject_unknown();
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  } catch (const StabilityError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline RunConfig parse_run_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_run_config(is);
}

}  // namespace lqgent
