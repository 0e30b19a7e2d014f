#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "zolr/common.hpp"

namespace zolr {

// Synthetic scenes: one object sampled as a noisy surface point cloud in a
// sensor frame whose origin is the sensor. Objects sit in front of the sensor
// (positive x).

enum class SceneShape : std::uint8_t { box = 0, sphere = 1, plane_composite = 2 };

inline std::string to_string(SceneShape s) {
  switch (s) {
    case SceneShape::box: return "box";
    case SceneShape::sphere: return "sphere";
    case SceneShape::plane_composite: return "plane-composite";
  }
  return "?";
}

inline SceneShape parse_scene_shape(const std::string& s) {
  if (s == "box") return SceneShape::box;
  if (s == "sphere") return SceneShape::sphere;
  if (s == "plane-composite" || s == "plane_composite") return SceneShape::plane_composite;
  throw InvalidArgument("unknown scene shape '" + s + "'");
}

using Point3 = std::array<double, 3>;

// Ground truth of a scene. `extent` is the half-size along each axis (the
// radii for a sphere).
struct SceneParams {
  Point3 centroid{};
  Point3 extent{1.0, 1.0, 1.0};
  SceneShape shape = SceneShape::box;

  // Regression target: centroid followed by extent.
  Vec target() const {
    return {centroid[0], centroid[1], centroid[2], extent[0], extent[1], extent[2]};
  }
  bool operator==(const SceneParams&) const = default;
};

inline constexpr std::size_t kTargetDim = 6;

struct PointCloud {
  std::vector<Point3> points;
  SceneParams scene;
};

inline constexpr std::size_t kScenePoints = 256;
inline constexpr std::size_t kMinPoints = 16;
inline constexpr double kSurfaceNoise = 0.01;

inline double range_of(const Point3& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }

inline SceneParams sample_scene_params(SceneShape shape, Rng& rng) {
  std::uniform_real_distribution<double> ux(6.0, 14.0), uy(-4.0, 4.0), uz(-0.5, 0.5),
      ue(0.5, 2.0);
  SceneParams p;
  p.shape = shape;
  p.centroid = {ux(rng), uy(rng), uz(rng)};
  p.extent = {ue(rng), ue(rng), ue(rng)};
  return p;
}

// 256 surface samples of the given object plus N(0, 0.01 m) noise per axis.
inline PointCloud generate_scene(const SceneParams& params, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto& c = params.centroid;
  const auto& e = params.extent;
  PointCloud pc;
  pc.scene = params;
  pc.points.reserve(kScenePoints);
  for (std::size_t i = 0; i < kScenePoints; ++i) {
    Point3 p{};
    switch (params.shape) {
      case SceneShape::box: {
        // Face chosen proportionally to its area.
        const std::array<double, 3> area{e[1] * e[2], e[0] * e[2], e[0] * e[1]};
        const double total = area[0] + area[1] + area[2];
        double pick = (u(rng) + 1.0) * 0.5 * total;
        std::size_t axis = 0;
        while (axis < 2 && pick > area[axis]) pick -= area[axis++];
        for (std::size_t k = 0; k < 3; ++k) p[k] = u(rng) * e[k];
        p[axis] = (u(rng) < 0.0 ? -1.0 : 1.0) * e[axis];
        break;
      }
      case SceneShape::sphere: {
        double n2 = 0.0;
        Point3 d{};
        do {
          for (auto& v : d) v = gauss(rng);
          n2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        } while (n2 == 0.0);
        const double inv = 1.0 / std::sqrt(n2);
        for (std::size_t k = 0; k < 3; ++k) p[k] = d[k] * inv * e[k];
        break;
      }
      case SceneShape::plane_composite: {
        // Ground patch plus a vertical back wall.
        if (i % 2 == 0) {
          p = {u(rng) * e[0], u(rng) * e[1], -e[2]};
        } else {
          p = {e[0], u(rng) * e[1], u(rng) * e[2]};
        }
        break;
      }
    }
    for (std::size_t k = 0; k < 3; ++k) p[k] += c[k] + kSurfaceNoise * gauss(rng);
    pc.points.push_back(p);
  }
  return pc;
}

inline PointCloud generate_scene(SceneShape shape, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5CE9E));
  return generate_scene(sample_scene_params(shape, rng), seed);
}

// Scene with a shape drawn uniformly from the three kinds.
inline PointCloud generate_random_scene(std::uint64_t seed) {
  const auto shape = static_cast<SceneShape>(derive_seed(seed, 0x5AA9E) % 3);
  return generate_scene(shape, seed);
}

// ---------------------------------------------------------------------------
// Corruptions

enum class CorruptionKind : std::uint8_t {
  fog = 0,
  snow,
  rain,
  motion_blur,
  beam_missing,
  incomplete_echo,
  cross_sensor,
  crosstalk,
};

inline constexpr std::array<CorruptionKind, 8> kAllCorruptions{
    CorruptionKind::fog,          CorruptionKind::snow,         CorruptionKind::rain,
    CorruptionKind::motion_blur,  CorruptionKind::beam_missing, CorruptionKind::incomplete_echo,
    CorruptionKind::cross_sensor, CorruptionKind::crosstalk};

inline std::string to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::fog: return "fog";
    case CorruptionKind::snow: return "snow";
    case CorruptionKind::rain: return "rain";
    case CorruptionKind::motion_blur: return "motion_blur";
    case CorruptionKind::beam_missing: return "beam_missing";
    case CorruptionKind::incomplete_echo: return "incomplete_echo";
    case CorruptionKind::cross_sensor: return "cross_sensor";
    case CorruptionKind::crosstalk: return "crosstalk";
  }
  return "?";
}

inline CorruptionKind parse_corruption_kind(const std::string& s) {
  for (auto k : kAllCorruptions)
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown corruption kind '" + s + "'");
}

enum class Severity : std::uint8_t { moderate = 0, heavy = 1 };

inline std::string to_string(Severity s) { return s == Severity::heavy ? "heavy" : "moderate"; }

inline Severity parse_severity(const std::string& s) {
  if (s == "heavy") return Severity::heavy;
  if (s == "moderate") return Severity::moderate;
  throw InvalidArgument("unknown severity '" + s + "'");
}

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::fog;
  Severity severity = Severity::moderate;
  std::uint64_t seed = 0;
  // Replaces the severity multiplier (moderate = 1, heavy = 2) when set.
  std::optional<double> magnitude_override;

  double magnitude() const {
    if (magnitude_override) return *magnitude_override;
    return severity == Severity::heavy ? 2.0 : 1.0;
  }
  std::string label() const { return to_string(kind) + "|" + to_string(severity); }
};

// Moderate-severity magnitudes; every one scales linearly with magnitude().
struct CorruptionTable {
  static constexpr double fog_range_sigma = 0.02;
  static constexpr double fog_drop = 0.05;
  static constexpr double snow_impulse = 0.05;
  static constexpr double snow_range_sigma = 0.01;
  static constexpr double snow_impulse_radius = 2.0;  // m around the sensor
  static constexpr double rain_range_sigma = 0.015;
  static constexpr double rain_drop = 0.03;
  static constexpr double motion_sigma = 0.05;  // m
  static constexpr double beam_drop = 0.25;
  static constexpr std::size_t beam_bands = 16;
  static constexpr double echo_drop = 0.25;
  static constexpr double cross_sensor_dup = 0.15;
  static constexpr double cross_sensor_offset = 0.3;  // m, along +x
  static constexpr double crosstalk_outliers = 0.10;
  static constexpr double crosstalk_box_scale = 3.0;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::size_t fraction_count(double frac, std::size_t n) {
  return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
}

inline std::vector<Point3> drop_indices(const std::vector<Point3>& pts,
                                        const std::vector<std::size_t>& drop) {
  std::vector<char> keep(pts.size(), 1);
  for (auto i : drop) keep[i] = 0;
  std::vector<Point3> out;
  out.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (keep[i]) out.push_back(pts[i]);
  return out;
}

inline std::vector<Point3> drop_random(const std::vector<Point3>& pts, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(count, idx.size()));
  return drop_indices(pts, idx);
}

inline void range_jitter(std::vector<Point3>& pts, double rel_sigma, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& p : pts) {
    const double s = rel_sigma * range_of(p);
    for (auto& v : p) v += s * g(rng);
  }
}

}  // namespace detail

// Applies the synthetic corruption. The ground truth is left untouched.
inline PointCloud corrupt(const PointCloud& pc, const CorruptionSpec& spec) {
  const double m = spec.magnitude();
  require(m >= 0.0 && std::isfinite(m), "corrupt: magnitude must be finite and >= 0");
  using T = CorruptionTable;
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.kind) + 1));
  std::normal_distribution<double> gauss(0.0, 1.0);
  PointCloud out;
  out.scene = pc.scene;
  auto pts = pc.points;
  const std::size_t n = pts.size();

  switch (spec.kind) {
    case CorruptionKind::fog:
      pts = detail::drop_random(pts, detail::fraction_count(T::fog_drop * m, n), rng);
      detail::range_jitter(pts, T::fog_range_sigma * m, rng);
      break;
    case CorruptionKind::snow: {
      detail::range_jitter(pts, T::snow_range_sigma * m, rng);
      const std::size_t add = detail::fraction_count(T::snow_impulse * m, n);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (std::size_t i = 0; i < add; ++i) {
        Point3 p{};
        do {
          for (auto& v : p) v = u(rng);
        } while (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] > 1.0);
        for (auto& v : p) v *= T::snow_impulse_radius;
        pts.push_back(p);
      }
      break;
    }
    case CorruptionKind::rain:
      pts = detail::drop_random(pts, detail::fraction_count(T::rain_drop * m, n), rng);
      detail::range_jitter(pts, T::rain_range_sigma * m, rng);
      break;
    case CorruptionKind::motion_blur: {
      Point3 dir{};
      double n2 = 0.0;
      do {
        for (auto& v : dir) v = gauss(rng);
        n2 = dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2];
      } while (n2 == 0.0);
      for (auto& v : dir) v /= std::sqrt(n2);
      for (auto& p : pts) {
        const double t = T::motion_sigma * m * gauss(rng);
        for (std::size_t k = 0; k < 3; ++k) p[k] += t * dir[k];
      }
      break;
    }
    case CorruptionKind::beam_missing: {
      // Sort by elevation, cut into equal bands, drop whole bands in random
      // order until the count is reached (the last band may be partial).
      const std::size_t count = std::min(n, detail::fraction_count(T::beam_drop * m, n));
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      auto elevation = [&](std::size_t i) {
        const auto& p = pts[i];
        return std::atan2(p[2], std::hypot(p[0], p[1]));
      };
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return elevation(a) < elevation(b); });
      const std::size_t band = (n + T::beam_bands - 1) / T::beam_bands;
      std::vector<std::size_t> bands(T::beam_bands);
      std::iota(bands.begin(), bands.end(), 0);
      std::shuffle(bands.begin(), bands.end(), rng);
      std::vector<std::size_t> drop;
      for (auto b : bands) {
        for (std::size_t j = b * band; j < std::min(n, (b + 1) * band) && drop.size() < count; ++j)
          drop.push_back(order[j]);
        if (drop.size() == count) break;
      }
      pts = detail::drop_indices(pts, drop);
      break;
    }
    case CorruptionKind::incomplete_echo: {
      // Returns weaker than the median (range beyond the median range) are
      // candidates for loss.
      Vec ranges(n);
      for (std::size_t i = 0; i < n; ++i) ranges[i] = range_of(pts[i]);
      Vec sorted = ranges;
      std::sort(sorted.begin(), sorted.end());
      const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      std::vector<std::size_t> weak;
      for (std::size_t i = 0; i < n; ++i)
        if (ranges[i] > median) weak.push_back(i);
      std::shuffle(weak.begin(), weak.end(), rng);
      weak.resize(std::min(weak.size(), detail::fraction_count(T::echo_drop * m, n)));
      pts = detail::drop_indices(pts, weak);
      break;
    }
    case CorruptionKind::cross_sensor: {
      const std::size_t dup = std::min(n, detail::fraction_count(T::cross_sensor_dup * m, n));
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t j = 0; j < dup; ++j) {
        Point3 p = pts[idx[j]];
        p[0] += T::cross_sensor_offset * m;
        pts.push_back(p);
      }
      break;
    }
    case CorruptionKind::crosstalk: {
      if (n == 0) break;
      Point3 lo = pts[0], hi = pts[0];
      for (const auto& p : pts)
        for (std::size_t k = 0; k < 3; ++k) {
          lo[k] = std::min(lo[k], p[k]);
          hi[k] = std::max(hi[k], p[k]);
        }
      const std::size_t add = detail::fraction_count(T::crosstalk_outliers * m, n);
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      for (std::size_t i = 0; i < add; ++i) {
        Point3 p{};
        for (std::size_t k = 0; k < 3; ++k)
          p[k] = 0.5 * (lo[k] + hi[k]) + u(rng) * T::crosstalk_box_scale * (hi[k] - lo[k]);
        pts.push_back(p);
      }
      break;
    }
  }
  if (pts.size() < kMinPoints)
    throw CorruptionError("corrupt: " + spec.label() + " left " + std::to_string(pts.size()) +
                          " points (minimum " + std::to_string(kMinPoints) + ")");
  out.points = std::move(pts);
  return out;
}

}  // namespace zolr
