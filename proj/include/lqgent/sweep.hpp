#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lqgent/control.hpp"
#include "lqgent/entanglement.hpp"
#include "lqgent/errors.hpp"
#include "lqgent/model.hpp"
#include "lqgent/solvers.hpp"

#ifndef LQGENT_VERSION
#define LQGENT_VERSION "0.1.0"
#endif

namespace lqgent {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = LQGENT_VERSION;

struct GridAxis {
  double min = 0.0;
  double max = 0.0;
  int count = 1;

  void validate(const std::string& name) const {
    if (count < 1) throw InputError(name + ": grid count must be >= 1");
    if (!std::isfinite(min) || !std::isfinite(max)) throw InputError(name + ": grid bounds must be finite");
    if (count > 1 && !(max > min)) throw InputError(name + ": grid must be increasing (max > min)");
  }

  double at(int i) const {
    if (count == 1) return min;
    if (i == count - 1) return max;
    return min + (max - min) * static_cast<double>(i) / static_cast<double>(count - 1);
  }

  std::vector<double> values() const {
    std::vector<double> v(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = at(i);
    return v;
  }
};

enum class Quantity { CondEN, UncondEN, NuCond, NuUncond, EprVar, Thresholds };

inline const std::vector<Quantity>& all_quantities() {
  static const std::vector<Quantity> q{Quantity::CondEN,   Quantity::UncondEN, Quantity::NuCond,
                                       Quantity::NuUncond, Quantity::EprVar,   Quantity::Thresholds};
  return q;
}

inline std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::CondEN: return "cond_EN";
    case Quantity::UncondEN: return "uncond_EN";
    case Quantity::NuCond: return "nu_cond";
    case Quantity::NuUncond: return "nu_uncond";
    case Quantity::EprVar: return "epr_var";
    case Quantity::Thresholds: return "thresholds";
  }
  return "?";
}

inline Quantity parse_quantity(const std::string& s) {
  for (Quantity q : all_quantities())
    if (to_string(q) == s) return q;
  throw InputError("unknown sweep quantity '" + s + "'");
}

/// True for quantities that need the feedback loop.
inline bool needs_closed_loop(Quantity q) {
  return q == Quantity::UncondEN || q == Quantity::NuUncond || q == Quantity::EprVar;
}

struct SweepSpec {
  GridAxis g_over_omega0{-0.2499, 1.0, 100};
  GridAxis eta{0.05, 1.0, 100};
  PhysicalParams fixed;
  FeedbackConfig fb;
  CostKind cost = CostKind::epr(0.0);
  std::vector<Quantity> quantities{Quantity::CondEN, Quantity::NuCond};
  unsigned threads = 0;       ///< 0 = hardware concurrency
  double edge_margin = 1e-4;  ///< cells with g/omega0 < -1/4 + margin are skipped

  bool wants(Quantity q) const { return std::find(quantities.begin(), quantities.end(), q) != quantities.end(); }
  bool wants_closed_loop() const {
    return std::any_of(quantities.begin(), quantities.end(), needs_closed_loop);
  }

  void validate() const {
    g_over_omega0.validate("g_over_omega0");
    eta.validate("eta");
    if (!(g_over_omega0.min > -0.25))
      throw InputError("g_over_omega0: grid must stay above the stability edge -1/4");
    if (!(eta.min > 0.0) || !(eta.max <= 1.0)) throw InputError("eta: grid must lie in (0, 1]");
    if (!(edge_margin >= 1e-4)) throw InputError("edge_margin must be >= 1e-4");
    if (quantities.empty()) throw InputError("sweep: no quantities requested");
    fixed.validate();
    validate_effort(fb);
  }
};

enum class CellStatus { Ok, EdgeSkipped, InputFailed, StabilityFailed, ControllabilityFailed, SolverFailed, Failed };

inline std::string to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Ok: return "ok";
    case CellStatus::EdgeSkipped: return "edge_skipped";
    case CellStatus::InputFailed: return "input_error";
    case CellStatus::StabilityFailed: return "stability_error";
    case CellStatus::ControllabilityFailed: return "controllability_error";
    case CellStatus::SolverFailed: return "solver_error";
    case CellStatus::Failed: return "error";
  }
  return "?";
}

struct Point2 {
  double g = 0.0;
  double eta = 0.0;
};
using Polyline = std::vector<Point2>;

struct SweepMetadata {
  double max_filter_residual = 0.0;
  double max_control_residual = 0.0;
  std::size_t ok_cells = 0;
  std::size_t failed_cells = 0;
  std::size_t skipped_cells = 0;
  std::string first_error;
};

/// Quantity matrices have rows indexed by eta and columns by g.
struct SweepResult {
  SweepSpec spec;
  std::vector<double> g_values;
  std::vector<double> eta_values;
  std::map<Quantity, MatX> values;
  std::vector<CellStatus> status;     ///< row-major (eta, g)
  std::vector<std::string> messages;  ///< error text per failed cell
  std::vector<Polyline> cond_boundary;
  std::vector<Polyline> uncond_boundary;
  SweepMetadata meta;

  std::size_t index(int i_eta, int i_g) const {
    return static_cast<std::size_t>(i_eta) * g_values.size() + static_cast<std::size_t>(i_g);
  }
  CellStatus cell_status(int i_eta, int i_g) const { return status[index(i_eta, i_g)]; }
  const MatX& matrix(Quantity q) const {
    auto it = values.find(q);
    if (it == values.end()) throw InputError("sweep result has no quantity " + to_string(q));
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Per-cell evaluation

struct CellResult {
  CellStatus status = CellStatus::Ok;
  std::string message;
  double cond_en = 0.0;
  double nu_cond = 0.0;
  double uncond_en = 0.0;
  double nu_uncond = 0.0;
  double epr_var = 0.0;
  double threshold = 0.0;
  double filter_residual = 0.0;
  double control_residual = 0.0;
};

inline PhysicalParams cell_params(const SweepSpec& spec, double g, double eta) {
  PhysicalParams p = spec.fixed;
  p.g = g * p.omega0;
  p.eta = eta;
  return p;
}

inline CellResult evaluate_cell(const SweepSpec& spec, double g, double eta) {
  CellResult r;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.cond_en = r.nu_cond = r.uncond_en = r.nu_uncond = r.epr_var = r.threshold = nan;
  if (g < -0.25 + spec.edge_margin) {
    r.status = CellStatus::EdgeSkipped;
    r.message = "within margin of the stability edge";
    return r;
  }
  try {
    const PhysicalParams p = cell_params(spec, g, eta);
    const StateSpaceModel m = build_model(p, spec.fb);
    if (spec.wants(Quantity::Thresholds)) r.threshold = eta_threshold(p);

    const RiccatiSolution filter = solve_filter_care(m);
    r.filter_residual = filter.residual_norm;
    const CovMatrix sigma_c(filter.value, Basis::NormalMode);
    const double theta = spec.cost.type == CostKind::Type::Epr ? spec.cost.theta : default_epr_theta(m.g);
    const EntanglementReport cond = entanglement_report(sigma_c, m, theta);
    r.cond_en = cond.log_negativity;
    r.nu_cond = cond.symplectic_nu;

    if (spec.wants_closed_loop()) {
      if (!is_controllable(m)) throw ControllabilityError(uncontrollable_reason(m));
      const RiccatiSolution control = solve_control_care(m, cost_matrix(spec.cost, m), m.feedback);
      r.control_residual = control.residual_norm;
      const ClosedLoop cl = assemble_closed_loop(m, spec.cost, filter, control);
      const EntanglementReport unc = entanglement_report(cl.sigma_uncond, m, theta);
      r.uncond_en = unc.log_negativity;
      r.nu_uncond = unc.symplectic_nu;
      r.epr_var = unc.epr_variance;
    }
  } catch (const ControllabilityError& e) {
    r.status = CellStatus::ControllabilityFailed;
    r.message = e.what();
  } catch (const StabilityError& e) {
    r.status = CellStatus::StabilityFailed;
    r.message = e.what();
  } catch (const SolverError& e) {
    r.status = CellStatus::SolverFailed;
    r.message = e.what();
  } catch (const InputError& e) {
    r.status = CellStatus::InputFailed;
    r.message = e.what();
  } catch (const std::exception& e) {
    r.status = CellStatus::Failed;
    r.message = e.what();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Level-set extraction

namespace detail {

/// Edge identifiers: horizontal edge (i, j)->(i, j+1) and vertical edge (i, j)->(i+1, j).
inline std::int64_t edge_key(int i, int j, bool vertical, int cols) {
  return (static_cast<std::int64_t>(i) * cols + j) * 2 + (vertical ? 1 : 0);
}

struct Segment {
  std::int64_t a = 0;
  std::int64_t b = 0;
};

}  // namespace detail

/// Zero level set of field (rows = y index, cols = x index) by marching
/// squares with linear interpolation along cell edges. Squares touching a
/// non-finite value are skipped. Segments sharing an edge crossing are
/// chained into polylines.
inline std::vector<Polyline> zero_contours(const MatX& field, const std::vector<double>& xs,
                                           const std::vector<double>& ys) {
  const int rows = static_cast<int>(field.rows());
  const int cols = static_cast<int>(field.cols());
  if (rows != static_cast<int>(ys.size()) || cols != static_cast<int>(xs.size()))
    throw InputError("zero_contours: axis size mismatch");
  std::map<std::int64_t, Point2> points;
  std::vector<detail::Segment> segments;
  if (rows < 2 || cols < 2) return {};

  auto crossing = [&](int i0, int j0, int i1, int j1) {
    const double f0 = field(i0, j0);
    const double f1 = field(i1, j1);
    const double t = f0 / (f0 - f1);
    return Point2{xs[j0] + t * (xs[j1] - xs[j0]), ys[i0] + t * (ys[i1] - ys[i0])};
  };
  auto differs = [](double a, double b) { return (a > 0.0) != (b > 0.0); };

  for (int i = 0; i + 1 < rows; ++i) {
    for (int j = 0; j + 1 < cols; ++j) {
      const double f00 = field(i, j), f01 = field(i, j + 1), f10 = field(i + 1, j), f11 = field(i + 1, j + 1);
      if (!std::isfinite(f00) || !std::isfinite(f01) || !std::isfinite(f10) || !std::isfinite(f11)) continue;
      // Edges in cyclic order: bottom, right, top, left.
      std::vector<std::int64_t> hits;
      if (differs(f00, f01)) {
        const auto k = detail::edge_key(i, j, false, cols);
        points.emplace(k, crossing(i, j, i, j + 1));
        hits.push_back(k);
      }
      if (differs(f01, f11)) {
        const auto k = detail::edge_key(i, j + 1, true, cols);
        points.emplace(k, crossing(i, j + 1, i + 1, j + 1));
        hits.push_back(k);
      }
      if (differs(f10, f11)) {
        const auto k = detail::edge_key(i + 1, j, false, cols);
        points.emplace(k, crossing(i + 1, j, i + 1, j + 1));
        hits.push_back(k);
      }
      if (differs(f00, f10)) {
        const auto k = detail::edge_key(i, j, true, cols);
        points.emplace(k, crossing(i, j, i + 1, j));
        hits.push_back(k);
      }
      if (hits.size() == 2) {
        segments.push_back({hits[0], hits[1]});
      } else if (hits.size() == 4) {
        // Saddle: the cell-centre average decides which corners connect.
        const double centre = 0.25 * (f00 + f01 + f10 + f11);
        if ((centre > 0.0) == (f00 > 0.0)) {
          segments.push_back({hits[0], hits[1]});
          segments.push_back({hits[2], hits[3]});
        } else {
          segments.push_back({hits[0], hits[3]});
          segments.push_back({hits[1], hits[2]});
        }
      }
    }
  }

  std::map<std::int64_t, std::vector<std::size_t>> by_point;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    by_point[segments[s].a].push_back(s);
    by_point[segments[s].b].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  auto next_from = [&](std::int64_t key) -> std::optional<std::size_t> {
    for (std::size_t s : by_point[key])
      if (!used[s]) return s;
    return std::nullopt;
  };
  auto walk = [&](std::int64_t start, std::vector<std::int64_t>& chain) {
    std::int64_t cur = start;
    while (auto s = next_from(cur)) {
      used[*s] = true;
      cur = segments[*s].a == cur ? segments[*s].b : segments[*s].a;
      chain.push_back(cur);
    }
  };

  std::vector<Polyline> out;
  // Open chains first (start at endpoints of degree one), then closed loops.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (used[s]) continue;
      const std::int64_t a = segments[s].a;
      if (pass == 0 && by_point[a].size() != 1 && by_point[segments[s].b].size() != 1) continue;
      const std::int64_t start = (pass == 0 && by_point[a].size() != 1) ? segments[s].b : a;
      std::vector<std::int64_t> chain{start};
      walk(start, chain);
      Polyline line;
      line.reserve(chain.size());
      for (auto k : chain) line.push_back(points.at(k));
      out.push_back(std::move(line));
    }
  }
  return out;
}

/// Polylines of nu = 1/2 from a nu matrix.
inline std::vector<Polyline> separability_boundary(const MatX& nu, const std::vector<double>& g_values,
                                                   const std::vector<double>& eta_values) {
  const MatX field = (0.5 - nu.array()).matrix();
  return zero_contours(field, g_values, eta_values);
}

// ---------------------------------------------------------------------------

/// Evaluates every (g, eta) cell. Cells are independent; workers fill
/// disjoint slots of an indexed result, so the output is the same for any
/// worker count.
inline SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  SweepResult res;
  res.spec = spec;
  res.g_values = spec.g_over_omega0.values();
  res.eta_values = spec.eta.values();
  const int ng = spec.g_over_omega0.count;
  const int ne = spec.eta.count;
  const std::size_t cells = static_cast<std::size_t>(ng) * static_cast<std::size_t>(ne);
  std::vector<CellResult> out(cells);

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t c = begin; c < cells; c += stride) {
      const int ie = static_cast<int>(c / static_cast<std::size_t>(ng));
      const int ig = static_cast<int>(c % static_cast<std::size_t>(ng));
      out[c] = evaluate_cell(spec, res.g_values[ig], res.eta_values[ie]);
    }
  };
  unsigned threads = spec.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : spec.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cells));
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  MatX cond_en = MatX::Constant(ne, ng, nan), nu_cond = cond_en, uncond_en = cond_en, nu_uncond = cond_en,
       epr = cond_en, thr = cond_en;
  res.status.resize(cells);
  res.messages.resize(cells);
  for (int ie = 0; ie < ne; ++ie) {
    for (int ig = 0; ig < ng; ++ig) {
      const std::size_t c = res.index(ie, ig);
      const CellResult& r = out[c];
      res.status[c] = r.status;
      res.messages[c] = r.message;
      thr(ie, ig) = r.threshold;
      if (r.status == CellStatus::EdgeSkipped) {
        ++res.meta.skipped_cells;
        continue;
      }
      if (r.status != CellStatus::Ok) {
        ++res.meta.failed_cells;
        if (res.meta.first_error.empty()) res.meta.first_error = r.message;
        continue;
      }
      ++res.meta.ok_cells;
      cond_en(ie, ig) = r.cond_en;
      nu_cond(ie, ig) = r.nu_cond;
      uncond_en(ie, ig) = r.uncond_en;
      nu_uncond(ie, ig) = r.nu_uncond;
      epr(ie, ig) = r.epr_var;
      res.meta.max_filter_residual = std::max(res.meta.max_filter_residual, r.filter_residual);
      res.meta.max_control_residual = std::max(res.meta.max_control_residual, r.control_residual);
    }
  }
  if (res.meta.ok_cells == 0) {
    throw SweepError("sweep: every cell failed; first cause: " +
                     (res.meta.first_error.empty() ? std::string("all cells skipped") : res.meta.first_error));
  }

  const std::map<Quantity, const MatX*> all{{Quantity::CondEN, &cond_en},     {Quantity::NuCond, &nu_cond},
                                            {Quantity::UncondEN, &uncond_en}, {Quantity::NuUncond, &nu_uncond},
                                            {Quantity::EprVar, &epr},         {Quantity::Thresholds, &thr}};
  for (Quantity q : spec.quantities) res.values[q] = *all.at(q);
  res.cond_boundary = separability_boundary(nu_cond, res.g_values, res.eta_values);
  if (spec.wants_closed_loop()) res.uncond_boundary = separability_boundary(nu_uncond, res.g_values, res.eta_values);
  return res;
}

/// Number of successfully evaluated cells with value < limit (or > limit when below == false).
inline std::size_t count_cells(const SweepResult& r, Quantity q, double limit, bool below = true) {
  const MatX& m = r.matrix(q);
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (std::isfinite(m(i, j)) && (below ? m(i, j) < limit : m(i, j) > limit)) ++n;
  return n;
}

}  // namespace lqgent
