#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"  // nlohmann::json, vendored

#include "lqgent/errors.hpp"
#include "lqgent/sweep.hpp"
#include "lqgent/trajectory.hpp"
#include "lqgent/types.hpp"

namespace lqgent::io {

/// Shortest representation that round-trips; empty for NaN.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) throw InternalError("format_double: to_chars failed");
  return std::string(buf, res.ptr);
}

inline nlohmann::json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline nlohmann::json to_json(const Mat4& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < 4; ++j) row.push_back(json_number(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json to_json(const PhysicalParams& p) {
  return {{"omega0", p.omega0},          {"g_over_omega0", p.g / p.omega0},
          {"gamma_over_omega0", p.gamma / p.omega0},
          {"gamma_th_over_omega0", p.gamma_th / p.omega0},
          {"gamma_ba_over_omega0", p.gamma_ba / p.omega0},
          {"eta", p.eta},                {"q1", p.q1},
          {"q2", p.q2}};
}


inline nlohmann::json to_json(const SweepSpec& s) {
  nlohmann::json q = nlohmann::json::array();
  for (Quantity x : s.quantities) q.push_back(to_string(x));
  return {{"g_over_omega0", {{"min", s.g_over_omega0.min}, {"max", s.g_over_omega0.max}, {"count", s.g_over_omega0.count}}},
          {"eta", {{"min", s.eta.min}, {"max", s.eta.max}, {"count", s.eta.count}}},
          {"fixed", to_json(s.fixed)},
          {"feedback", {{"mode", std::string(to_string(s.fb.mode))}, {"effort", s.fb.effort}}},
          {"cost", {{"kind", s.cost.type == CostKind::Type::Cool ? "cool" : "epr"}, {"theta", s.cost.theta}}},
          {"quantities", q},
          {"edge_margin", s.edge_margin}};
}

/// Long-format CSV: g,eta,quantity,value,status. Failed cells have an empty value.
inline void write_sweep_csv(const SweepResult& r, std::ostream& os) {
  os << "g,eta,quantity,value,status\r\n";
  for (std::size_t ie = 0; ie < r.eta_values.size(); ++ie) {
    for (std::size_t ig = 0; ig < r.g_values.size(); ++ig) {
      const CellStatus st = r.cell_status(static_cast<int>(ie), static_cast<int>(ig));
      for (Quantity q : r.spec.quantities) {
        const double v = r.matrix(q)(static_cast<Eigen::Index>(ie), static_cast<Eigen::Index>(ig));
        os << format_double(r.g_values[ig]) << ',' << format_double(r.eta_values[ie]) << ',' << to_string(q) << ','
           << format_double(v) << ',' << to_string(st) << "\r\n";
      }
    }
  }
}

inline nlohmann::json polylines_json(const std::vector<Polyline>& lines) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& l : lines) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : l) pts.push_back({p.g, p.eta});
    out.push_back(pts);
  }
  return out;
}

inline nlohmann::json sweep_metadata_json(const SweepResult& r) {
  return {{"schema_version", kSchemaVersion},
          {"version", kVersion},
          {"inputs", to_json(r.spec)},
          {"max_filter_residual", r.meta.max_filter_residual},
          {"max_control_residual", r.meta.max_control_residual},
          {"ok_cells", r.meta.ok_cells},
          {"failed_cells", r.meta.failed_cells},
          {"skipped_cells", r.meta.skipped_cells},
          {"first_error", r.meta.first_error}};
}

inline nlohmann::json to_json(const SweepResult& r) {
  nlohmann::json j = sweep_metadata_json(r);
  j["g_values"] = r.g_values;
  j["eta_values"] = r.eta_values;
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [quantity, m] : r.values) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(json_number(m(i, k)));
      rows.push_back(row);
    }
    q[to_string(quantity)] = rows;
  }
  j["quantities_data"] = q;
  nlohmann::json status = nlohmann::json::array();
  for (std::size_t ie = 0; ie < r.eta_values.size(); ++ie) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t ig = 0; ig < r.g_values.size(); ++ig)
      row.push_back(to_string(r.cell_status(static_cast<int>(ie), static_cast<int>(ig))));
    status.push_back(row);
  }
  j["status"] = status;
  nlohmann::json errors = nlohmann::json::array();
  for (std::size_t c = 0; c < r.messages.size(); ++c)
    if (r.status[c] != CellStatus::Ok && r.status[c] != CellStatus::EdgeSkipped)
      errors.push_back({{"cell", c}, {"message", r.messages[c]}});
  j["errors"] = errors;
  j["boundary"] = {{"cond", polylines_json(r.cond_boundary)}, {"uncond", polylines_json(r.uncond_boundary)}};
  return j;
}

/// Header t,x_plus,p_plus,x_minus,p_minus,I_plus,I_minus[,u1[,u2]].
inline void write_trajectory_csv(const TrajectoryRecord& rec, std::ostream& os) {
  const Eigen::Index k = rec.controls.empty() ? 0 : rec.controls.front().size();
  os << "t,x_plus,p_plus,x_minus,p_minus,I_plus,I_minus";
  for (Eigen::Index i = 0; i < k; ++i) os << ",u" << (i + 1);
  os << "\r\n";
  for (std::size_t n = 0; n < rec.size(); ++n) {
    os << format_double(rec.times[n]);
    for (int i = 0; i < 4; ++i) os << ',' << format_double(rec.x_c[n](i));
    for (int i = 0; i < 2; ++i) os << ',' << format_double(rec.photocurrents[n](i));
    for (Eigen::Index i = 0; i < k; ++i) os << ',' << format_double(rec.controls[n](i));
    os << "\r\n";
  }
}

/// Writes text produced by fn to path, throwing IoError on failure.
template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  fn(os);
  os.flush();
  if (!os) throw IoError("write to " + path.string() + " failed");
}

}  // namespace lqgent::io
