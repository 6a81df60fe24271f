#pragma once

// Synthetic scenes built from analytic surfaces, with seeded map sampling and a
// ring-organized ray-casting LiDAR simulator.
//
// Random draws use std::mt19937_64 (fully specified by the standard) with
// hand-written uniform and Box-Muller transforms, so clouds do not depend on the
// standard library's distribution implementations.

#include "lpicp/core.hpp"
#include "lpicp/localizability.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace lpicp {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class SceneKind { kPlane, kCorridor, kTunnel, kCubeRoom, kOpenTerrain, kLShape };

inline const char* to_string(SceneKind k) {
  switch (k) {
    case SceneKind::kPlane: return "plane";
    case SceneKind::kCorridor: return "corridor";
    case SceneKind::kTunnel: return "tunnel";
    case SceneKind::kCubeRoom: return "cuberoom";
    case SceneKind::kOpenTerrain: return "openterrain";
    case SceneKind::kLShape: return "lshape";
  }
  return "plane";
}

inline SceneKind parse_scene_kind(const std::string& s) {
  for (auto k : {SceneKind::kPlane, SceneKind::kCorridor, SceneKind::kTunnel, SceneKind::kCubeRoom,
                 SceneKind::kOpenTerrain, SceneKind::kLShape}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorCode::kConfig, "unknown scene kind '" + s + "'");
}

/// Dimensions are interpreted per kind; zero or negative values select the kind's
/// default. length: plane side, corridor/tunnel/arm length, room x extent, terrain
/// side. width: corridor/arm width, room y extent, tunnel radius. height: wall or
/// room height, terrain amplitude.
struct SceneSpec {
  SceneKind kind = SceneKind::kPlane;
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  double density = 25.0;  // points per m^2
  double sigma = 0.0;     // map noise along the surface normal
  std::uint64_t seed = 1;
  double terrain_wavelength = 8.0;

  void validate() const {
    if (!(density > 0.0)) throw Error(ErrorCode::kConfig, "density must be > 0");
    if (!(sigma >= 0.0)) throw Error(ErrorCode::kConfig, "sigma must be >= 0");
  }

  SceneSpec resolved() const {
    SceneSpec s = *this;
    const auto pick = [](double v, double d) { return v > 0.0 ? v : d; };
    switch (kind) {
      case SceneKind::kPlane: s.length = pick(length, 20.0); break;
      case SceneKind::kCorridor:
        s.length = pick(length, 40.0);
        s.width = pick(width, 2.5);
        s.height = pick(height, 3.0);
        break;
      case SceneKind::kTunnel:
        s.length = pick(length, 40.0);
        s.width = pick(width, 2.0);
        break;
      case SceneKind::kCubeRoom:
        s.length = pick(length, 8.0);
        s.width = pick(width, 6.0);
        s.height = pick(height, 3.0);
        break;
      case SceneKind::kOpenTerrain:
        s.length = pick(length, 40.0);
        s.height = pick(height, 0.3);
        break;
      case SceneKind::kLShape:
        s.length = pick(length, 12.0);
        s.width = pick(width, 3.0);
        s.height = pick(height, 3.0);
        break;
    }
    return s;
  }
};

/// Finite rectangle c + a u + b v, |a| <= half_u, |b| <= half_v, normal u x v.
struct Rectangle {
  Point3 center;
  Eigen::Vector3d u, v;
  double half_u = 0.0, half_v = 0.0;

  Eigen::Vector3d normal() const { return u.cross(v); }
  double area() const { return 4.0 * half_u * half_v; }
};

/// Open cylinder of the given radius around the x axis, x in [x_min, x_max].
struct Cylinder {
  double radius = 1.0;
  double x_min = 0.0, x_max = 0.0;

  double area() const { return 2.0 * std::numbers::pi * radius * (x_max - x_min); }
};

/// z = amplitude * sin(k x) * cos(k y) with k = 2 pi / wavelength over the square
/// |x|, |y| <= half_extent.
struct Heightfield {
  double half_extent = 10.0;
  double amplitude = 0.3;
  double wavelength = 8.0;

  double k() const { return 2.0 * std::numbers::pi / wavelength; }
  double height(double x, double y) const { return amplitude * std::sin(k() * x) * std::cos(k() * y); }
  double area() const { return 4.0 * half_extent * half_extent; }  // projected area
};

using Surface = std::variant<Rectangle, Cylinder, Heightfield>;

/// Expected category per pose axis (roll, pitch, yaw, tx, ty, tz) at the canonical
/// viewpoint, and the analytically unconstrained axes as unit 6-vectors.
struct SceneAnnotation {
  Categories expected{};
  std::vector<Vector6d> null_directions;
};

struct Scene {
  SceneSpec spec;
  std::vector<Surface> surfaces;
  PointCloud map;
  SceneAnnotation annotation;
  Pose6D canonical_pose;
};

namespace detail {

inline Rectangle rect(Point3 c, Eigen::Vector3d u, Eigen::Vector3d v, double hu, double hv) {
  return Rectangle{c, u, v, hu, hv};
}

inline SceneAnnotation annotate(std::initializer_list<int> null_axes,
                                std::initializer_list<int> partial_axes = {}) {
  SceneAnnotation a;
  a.expected.fill(Category::kFull);
  for (int i : partial_axes) a.expected[static_cast<std::size_t>(i)] = Category::kPartial;
  for (int i : null_axes) {
    a.expected[static_cast<std::size_t>(i)] = Category::kNone;
    Vector6d e = Vector6d::Zero();
    e[i] = 1.0;
    a.null_directions.push_back(e);
  }
  return a;
}

inline void sample_surface(const Surface& s, double density, double sigma, Rng& rng,
                           std::vector<Point3>& out) {
  std::visit(
      [&](const auto& surf) {
        using T = std::decay_t<decltype(surf)>;
        const auto n = static_cast<std::size_t>(std::llround(surf.area() * density));
        for (std::size_t i = 0; i < n; ++i) {
          if constexpr (std::is_same_v<T, Rectangle>) {
            const double a = rng.uniform(-surf.half_u, surf.half_u);
            const double b = rng.uniform(-surf.half_v, surf.half_v);
            Point3 p = surf.center + a * surf.u + b * surf.v;
            if (sigma > 0.0) p += sigma * rng.normal() * surf.normal();
            out.push_back(p);
          } else if constexpr (std::is_same_v<T, Cylinder>) {
            const double x = rng.uniform(surf.x_min, surf.x_max);
            const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
            double r = surf.radius;
            if (sigma > 0.0) r += sigma * rng.normal();
            out.emplace_back(x, r * std::cos(th), r * std::sin(th));
          } else {
            const double x = rng.uniform(-surf.half_extent, surf.half_extent);
            const double y = rng.uniform(-surf.half_extent, surf.half_extent);
            double z = surf.height(x, y);
            if (sigma > 0.0) z += sigma * rng.normal();
            out.emplace_back(x, y, z);
          }
        }
      },
      s);
}

}  // namespace detail

/// Builds the surfaces, samples the map cloud and attaches the analytic annotation
/// for the kind's canonical viewpoint (identity orientation).
inline Scene generate_scene(const SceneSpec& input) {
  input.validate();
  Scene scene;
  scene.spec = input.resolved();
  const SceneSpec& s = scene.spec;
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(),
                        ez = Eigen::Vector3d::UnitZ();
  auto& surf = scene.surfaces;
  using detail::rect;

  switch (s.kind) {
    case SceneKind::kPlane:
      surf.push_back(rect({0, 0, 0}, ex, ey, s.length / 2, s.length / 2));
      scene.canonical_pose = Pose6D::from_values(0, 0, 0, 0, 0, 1.5);
      scene.annotation = detail::annotate({2, 3, 4});
      break;
    case SceneKind::kCorridor: {
      const double hl = s.length / 2, hw = s.width / 2, hh = s.height / 2;
      surf.push_back(rect({0, 0, 0}, ex, ey, hl, hw));
      surf.push_back(rect({0, -hw, hh}, ex, ez, hl, hh));
      surf.push_back(rect({0, hw, hh}, ex, ez, hl, hh));
      scene.canonical_pose = Pose6D::from_values(0, 0, 0, 0, 0, 1.2);
      scene.annotation = detail::annotate({3});
      break;
    }
    case SceneKind::kTunnel:
      surf.push_back(Cylinder{s.width, -s.length / 2, s.length / 2});
      scene.canonical_pose = Pose6D::identity();
      scene.annotation = detail::annotate({0, 3});
      break;
    case SceneKind::kCubeRoom: {
      const double hx = s.length / 2, hy = s.width / 2, hz = s.height / 2;
      surf.push_back(rect({0, 0, 0}, ex, ey, hx, hy));
      surf.push_back(rect({0, 0, s.height}, ex, ey, hx, hy));
      surf.push_back(rect({-hx, 0, hz}, ey, ez, hy, hz));
      surf.push_back(rect({hx, 0, hz}, ey, ez, hy, hz));
      surf.push_back(rect({0, -hy, hz}, ex, ez, hx, hz));
      surf.push_back(rect({0, hy, hz}, ex, ez, hx, hz));
      scene.canonical_pose = Pose6D::from_values(0.05, 0.25, 0.3, 0.7, -0.4, 1.3);
      scene.annotation = detail::annotate({});
      break;
    }
    case SceneKind::kOpenTerrain:
      surf.push_back(Heightfield{s.length / 2, s.height, s.terrain_wavelength});
      scene.canonical_pose = Pose6D::from_values(0, 0, 0, 0, 0, 2.0);
      scene.annotation = detail::annotate({}, {2, 3, 4});
      break;
    case SceneKind::kLShape: {
      // Arm A runs along -x from the corner, arm B along +y; the corner square is
      // centred on the origin.
      const double l = s.length, w = s.width, hw = w / 2, hh = s.height / 2;
      surf.push_back(rect({(-l + hw) / 2, 0, 0}, ex, ey, (l + hw) / 2, hw));
      surf.push_back(rect({0, (l + hw) / 2, 0}, ex, ey, hw, (l - hw) / 2));
      surf.push_back(rect({(-l + hw) / 2, -hw, hh}, ex, ez, (l + hw) / 2, hh));
      surf.push_back(rect({hw, (l - hw) / 2, hh}, ey, ez, (l + hw) / 2, hh));
      surf.push_back(rect({(-l - hw) / 2, hw, hh}, ex, ez, (l - hw) / 2, hh));
      surf.push_back(rect({-hw, (l + hw) / 2, hh}, ey, ez, (l - hw) / 2, hh));
      scene.canonical_pose = Pose6D::from_values(0, 0, 0, 0, 0, 1.2);
      scene.annotation = detail::annotate({});
      break;
    }
  }

  Rng rng(s.seed);
  for (const auto& sf : surf) detail::sample_surface(sf, s.density, s.sigma, rng, scene.map.points);
  return scene;
}

struct SensorModel {
  int rings = 16;
  double vfov_min_deg = -15.0;
  double vfov_max_deg = 15.0;
  double h_res_deg = 0.2;
  double min_range = 0.3;
  double max_range = 30.0;
  double range_sigma = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (rings < 1) throw Error(ErrorCode::kConfig, "sensor needs at least one ring");
    if (!(h_res_deg > 0.0)) throw Error(ErrorCode::kConfig, "h_res_deg must be > 0");
    if (!(0.0 <= min_range && min_range < max_range)) {
      throw Error(ErrorCode::kConfig, "require 0 <= min_range < max_range");
    }
  }

  double elevation(int ring) const {
    if (rings == 1) return (vfov_min_deg + vfov_max_deg) / 2.0 * std::numbers::pi / 180.0;
    return (vfov_min_deg + (vfov_max_deg - vfov_min_deg) * ring / (rings - 1)) * std::numbers::pi /
           180.0;
  }
  int columns() const { return static_cast<int>(std::llround(360.0 / h_res_deg)); }
};

namespace detail {

constexpr double kNoHit = std::numeric_limits<double>::infinity();

inline double intersect(const Rectangle& r, const Point3& o, const Eigen::Vector3d& d) {
  const Eigen::Vector3d n = r.normal();
  const double denom = d.dot(n);
  if (std::abs(denom) < 1e-12) return kNoHit;
  const double t = (r.center - o).dot(n) / denom;
  if (t <= 0.0) return kNoHit;
  const Eigen::Vector3d rel = o + t * d - r.center;
  if (std::abs(rel.dot(r.u)) > r.half_u || std::abs(rel.dot(r.v)) > r.half_v) return kNoHit;
  return t;
}

inline double intersect(const Cylinder& c, const Point3& o, const Eigen::Vector3d& d) {
  const double a = d.y() * d.y() + d.z() * d.z();
  if (a < 1e-15) return kNoHit;
  const double b = 2.0 * (o.y() * d.y() + o.z() * d.z());
  const double cc = o.y() * o.y() + o.z() * o.z() - c.radius * c.radius;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return kNoHit;
  const double sq = std::sqrt(disc);
  for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (t <= 0.0) continue;
    const double x = o.x() + t * d.x();
    if (x >= c.x_min && x <= c.x_max) return t;
  }
  return kNoHit;
}

/// Marches the ray in fixed steps and refines the first sign change of
/// z - height(x, y) by bisection.
inline double intersect(const Heightfield& h, const Point3& o, const Eigen::Vector3d& d,
                        double t_max) {
  const auto g = [&](double t) {
    const Point3 p = o + t * d;
    return p.z() - h.height(p.x(), p.y());
  };
  const auto inside = [&](double t) {
    const Point3 p = o + t * d;
    return std::abs(p.x()) <= h.half_extent && std::abs(p.y()) <= h.half_extent;
  };
  const double step = 0.05;
  double t0 = 0.0, g0 = g(0.0);
  for (double t1 = step; t1 <= t_max + step; t1 += step) {
    const double g1 = g(t1);
    if ((g0 > 0.0) != (g1 > 0.0)) {
      double lo = t0, hi = t1;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        ((g(mid) > 0.0) == (g0 > 0.0) ? lo : hi) = mid;
      }
      const double t = 0.5 * (lo + hi);
      return inside(t) ? t : kNoHit;
    }
    t0 = t1;
    g0 = g1;
  }
  return kNoHit;
}

}  // namespace detail

/// Nearest-surface range along a world-frame ray, or +inf.
inline double cast_ray(const std::vector<Surface>& surfaces, const Point3& origin,
                       const Eigen::Vector3d& dir, double max_range) {
  double best = detail::kNoHit;
  for (const auto& s : surfaces) {
    const double t = std::visit(
        [&](const auto& surf) {
          using T = std::decay_t<decltype(surf)>;
          if constexpr (std::is_same_v<T, Heightfield>) {
            return detail::intersect(surf, origin, dir, max_range);
          } else {
            return detail::intersect(surf, origin, dir);
          }
        },
        s);
    best = std::min(best, t);
  }
  return best;
}

/// Casts rings x columns rays from the sensor pose. Points are returned in the
/// sensor frame, ring by ring in azimuth order, with ring metadata.
inline PointCloud simulate_scan(const std::vector<Surface>& surfaces, const Pose6D& sensor_pose,
                                const SensorModel& sensor = {}) {
  sensor.validate();
  if (!sensor_pose.finite()) throw Error(ErrorCode::kInvalidInput, "sensor pose is not finite");
  const Eigen::Matrix3d r = euler_to_rotation(sensor_pose);
  const int cols = sensor.columns();
  Rng rng(sensor.seed);
  PointCloud out;
  for (int ring = 0; ring < sensor.rings; ++ring) {
    const double el = sensor.elevation(ring);
    for (int c = 0; c < cols; ++c) {
      const double az = -std::numbers::pi + 2.0 * std::numbers::pi * c / cols;
      const Eigen::Vector3d d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      const double range = cast_ray(surfaces, sensor_pose.translation, r * d, sensor.max_range);
      if (!(range >= sensor.min_range && range <= sensor.max_range)) continue;
      const double noisy = sensor.range_sigma > 0.0 ? range + sensor.range_sigma * rng.normal() : range;
      out.points.push_back(noisy * d);
      out.ring.push_back(ring);
    }
  }
  return out;
}

inline PointCloud simulate_scan(const Scene& scene, const Pose6D& sensor_pose,
                                const SensorModel& sensor = {}) {
  return simulate_scan(scene.surfaces, sensor_pose, sensor);
}

}  // namespace lpicp
