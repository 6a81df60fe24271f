#pragma once

// Plot-ready report files for an experiment run:
//   trajectory.csv       estimated trajectory
//   localizability.jsonl one JSON object per scan, fixed key order
//   categories.csv       category timeline, one row per scan
//   histogram.csv        L_f / L_u per scan and direction, split by residual type
//   summary.json         run totals and trajectory error
// Wall-clock timings are deliberately left out so files are byte-reproducible.

#include "lpicp/experiment.hpp"
#include "lpicp/io.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace lpicp {

namespace detail {

using Json = nlohmann::ordered_json;

inline Json to_json(const Vector6d& v) {
  Json a = Json::array();
  for (int i = 0; i < 6; ++i) a.push_back(v[i]);
  return a;
}

inline Json to_json(const Pose6D& p) { return to_json(wrapped(p).vector()); }

inline Json category_json(const std::optional<Categories>& c) {
  if (!c) return nullptr;
  Json a = Json::array();
  for (auto x : *c) a.push_back(to_string(x));
  return a;
}

inline Json scan_record_json(const ScanRecord& s, Method method) {
  const RegistrationResult& r = s.result;
  Json j;
  j["scan"] = s.index;
  j["t"] = s.stamp;
  j["method"] = to_string(method);
  j["converged"] = r.converged;
  j["iterations"] = r.iterations();
  j["failure"] = s.failure ? Json(to_string(*s.failure)) : Json(nullptr);
  j["scan_points"] = s.scan_points;
  j["edge_features"] = s.edge_features;
  j["planar_features"] = s.planar_features;
  j["x0"] = to_json(s.x0);
  j["estimate"] = to_json(s.estimate);
  j["ground_truth"] = to_json(s.ground_truth);
  if (r.report) {
    j["eigenvalues"] = to_json(r.report->basis.eigenvalues());
    j["l_f"] = to_json(r.report->l_f);
    j["l_u"] = to_json(r.report->l_u);
    j["num_edge"] = r.report->num_edge;
    j["num_planar"] = r.report->num_planar;
    j["coupling_norm"] = r.report->coupling_norm;
  } else if (r.degeneracy) {
    j["eigenvalues"] = to_json(r.degeneracy->eigenvalues);
    j["l_f"] = nullptr;
    j["l_u"] = nullptr;
  } else {
    j["eigenvalues"] = nullptr;
    j["l_f"] = nullptr;
    j["l_u"] = nullptr;
  }
  j["categories"] = category_json(detail::categories_of(r));
  j["k_n"] = r.k_n();
  j["k_p"] = r.k_p();
  j["hard_residual"] = r.hard_residual;
  j["soft_residuals"] = r.soft_residuals;
  j["final_rms"] = r.trace.empty() ? 0.0 : r.trace.back().rms_residual;
  return j;
}

}  // namespace detail

inline void emit_reports(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  using io::format_double;

  io::write_trajectory(dir / "trajectory.csv", report.estimate);

  {
    auto out = io::detail::open_out(dir / "localizability.jsonl");
    for (const auto& s : report.scans) out << detail::scan_record_json(s, report.method).dump() << '\n';
  }
  {
    auto out = io::detail::open_out(dir / "categories.csv");
    out << "scan,t,r1,r2,r3,t1,t2,t3\n";
    for (const auto& s : report.scans) {
      out << s.index << ',' << format_double(s.stamp);
      const auto c = scan_categories(s);
      for (int j = 0; j < 6; ++j) out << ',' << (c ? to_string((*c)[static_cast<std::size_t>(j)]) : "");
      out << '\n';
    }
  }
  {
    auto out = io::detail::open_out(dir / "histogram.csv");
    out << "scan,direction,eigenvalue,l_f,l_u,l_f_edge,l_u_edge,l_f_planar,l_u_planar\n";
    static constexpr const char* kNames[6] = {"r1", "r2", "r3", "t1", "t2", "t3"};
    for (const auto& s : report.scans) {
      if (!s.result.report) continue;
      const auto& r = *s.result.report;
      const Vector6d ev = r.basis.eigenvalues();
      for (int j = 0; j < 6; ++j) {
        out << s.index << ',' << kNames[j] << ',' << format_double(ev[j]) << ','
            << format_double(r.l_f[j]) << ',' << format_double(r.l_u[j]) << ','
            << format_double(r.l_f_edge[j]) << ',' << format_double(r.l_u_edge[j]) << ','
            << format_double(r.l_f[j] - r.l_f_edge[j]) << ','
            << format_double(r.l_u[j] - r.l_u_edge[j]) << '\n';
      }
    }
  }
  {
    detail::Json j;
    j["method"] = to_string(report.method);
    j["scans"] = report.scans.size();
    j["failures"] = report.failures();
    std::size_t converged = 0;
    for (const auto& s : report.scans) converged += s.result.converged ? 1 : 0;
    j["converged"] = converged;
    if (report.ate) {
      j["ate_rmse"] = report.ate->rmse;
      j["ate_axis_rmse"] = {report.ate->axis_rmse.x(), report.ate->axis_rmse.y(),
                            report.ate->axis_rmse.z()};
    } else {
      j["ate_rmse"] = nullptr;
      j["ate_axis_rmse"] = nullptr;
    }
    auto out = io::detail::open_out(dir / "summary.json");
    out << j.dump(2) << '\n';
  }
}

}  // namespace lpicp
