#pragma once

// Plain-text file formats: XYZ and ASCII PLY point clouds, CSV trajectories.
// Numbers are written with 17 significant digits so a write/read cycle is exact.

#include "lpicp/core.hpp"
#include "lpicp/trajectory.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lpicp::io {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  return out;
}

inline std::vector<double> parse_numbers(const std::string& line, char sep,
                                         const std::string& where) {
  std::vector<double> values;
  std::string token;
  std::istringstream ss(line);
  const auto take = [&](std::string t) {
    const auto b = t.find_first_not_of(" \t\r");
    if (b == std::string::npos) return;
    t = t.substr(b, t.find_last_not_of(" \t\r") - b + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
      throw Error(ErrorCode::kIo, where + ": cannot parse number '" + t + "'");
    }
    values.push_back(v);
  };
  if (sep == ' ') {
    while (ss >> token) take(token);
  } else {
    while (std::getline(ss, token, sep)) take(token);
  }
  return values;
}

}  // namespace detail

/// One "x y z [ring]" line per point. Blank lines and lines starting with '#' are
/// skipped. Ring metadata is kept only when every point carries it.
inline PointCloud read_xyz(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  bool all_rings = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto v = detail::parse_numbers(line, ' ', path.string() + ":" + std::to_string(line_no));
    if (v.size() != 3 && v.size() != 4) {
      throw Error(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) +
                                      ": expected 3 or 4 columns");
    }
    cloud.points.emplace_back(v[0], v[1], v[2]);
    if (v.size() == 4) {
      cloud.ring.push_back(static_cast<int>(v[3]));
    } else {
      all_rings = false;
    }
  }
  if (!all_rings) cloud.ring.clear();
  return cloud;
}

inline void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = detail::open_out(path);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z());
    if (cloud.has_rings()) out << ' ' << cloud.ring[i];
    out << '\n';
  }
}

/// ASCII PLY with a vertex element carrying x, y, z and optionally ring. Other
/// vertex properties are ignored; other elements must follow the vertices.
inline PointCloud read_ply(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw Error(ErrorCode::kIo, path.string() + ": missing ply magic");
  }
  std::size_t vertices = 0;
  bool in_vertex = false;
  std::vector<std::string> props;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw Error(ErrorCode::kIo, path.string() + ": only ascii PLY is supported");
    } else if (kw == "element") {
      std::string name;
      ss >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ss >> vertices;
    } else if (kw == "property" && in_vertex) {
      std::string type, name;
      ss >> type >> name;
      props.push_back(name);
    } else if (kw == "end_header") {
      break;
    }
  }
  int ix = -1, iy = -1, iz = -1, ir = -1;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    const auto& p = props[static_cast<std::size_t>(i)];
    if (p == "x") ix = i;
    if (p == "y") iy = i;
    if (p == "z") iz = i;
    if (p == "ring") ir = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorCode::kIo, path.string() + ": no x/y/z properties");
  PointCloud cloud;
  for (std::size_t k = 0; k < vertices; ++k) {
    if (!std::getline(in, line)) throw Error(ErrorCode::kIo, path.string() + ": truncated vertex list");
    const auto v = detail::parse_numbers(line, ' ', path.string());
    if (v.size() < props.size()) throw Error(ErrorCode::kIo, path.string() + ": short vertex line");
    cloud.points.emplace_back(v[static_cast<std::size_t>(ix)], v[static_cast<std::size_t>(iy)],
                              v[static_cast<std::size_t>(iz)]);
    if (ir >= 0) cloud.ring.push_back(static_cast<int>(v[static_cast<std::size_t>(ir)]));
  }
  return cloud;
}

/// Dispatches on the extension: .ply, otherwise XYZ.
inline PointCloud read_point_cloud(const std::filesystem::path& path) {
  return path.extension() == ".ply" ? read_ply(path) : read_xyz(path);
}

inline constexpr const char* kTrajectoryHeader = "t,roll,pitch,yaw,tx,ty,tz";

inline void write_trajectory(std::ostream& out, const Trajectory& traj) {
  out << kTrajectoryHeader << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Pose6D p = wrapped(traj.poses[i]);
    out << format_double(traj.stamps[i]);
    for (int k = 0; k < 3; ++k) out << ',' << format_double(p.rotation[k]);
    for (int k = 0; k < 3; ++k) out << ',' << format_double(p.translation[k]);
    out << '\n';
  }
}

inline void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  auto out = detail::open_out(path);
  write_trajectory(out, traj);
}

/// CSV with columns t,roll,pitch,yaw,tx,ty,tz. A first line that does not start
/// with a number is treated as a header.
inline Trajectory read_trajectory(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    if (line_no == 1 && !(std::isdigit(static_cast<unsigned char>(line[b])) || line[b] == '-' ||
                          line[b] == '+' || line[b] == '.')) {
      continue;
    }
    const auto v = detail::parse_numbers(line, ',', path.string() + ":" + std::to_string(line_no));
    if (v.size() != 7) {
      throw Error(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) +
                                      ": expected 7 columns");
    }
    traj.push_back(v[0], Pose6D::from_values(v[1], v[2], v[3], v[4], v[5], v[6]));
  }
  return traj;
}

/// "r,p,y,tx,ty,tz" as used on the command line.
inline Pose6D parse_pose(const std::string& text) {
  const auto v = detail::parse_numbers(text, ',', "pose");
  if (v.size() != 6) throw Error(ErrorCode::kInvalidInput, "pose needs 6 comma-separated values");
  return Pose6D::from_values(v[0], v[1], v[2], v[3], v[4], v[5]);
}

}  // namespace lpicp::io
