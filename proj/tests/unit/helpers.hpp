#pragma once

#include "lockit/cloud.hpp"
#include "lockit/geometry.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace lockit::test {

inline PointCloud random_cloud(std::size_t n, double half_extent, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-half_extent, half_extent);
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

/// Flat square grid at height z with the given pitch.
inline std::vector<Vec3> grid_plane(double half, double pitch, double z) {
  std::vector<Vec3> out;
  for (double x = -half; x <= half + 1e-9; x += pitch)
    for (double y = -half; y <= half + 1e-9; y += pitch) out.emplace_back(x, y, z);
  return out;
}

/// Three orthogonal walls plus a few boxes and a pole: well conditioned for
/// point-to-plane alignment in all six degrees of freedom.
inline PointCloud structured_scene(double pitch = 0.25) {
  PointCloud c;
  auto add = [&](const Vec3& p) { c.points.push_back(p); };
  for (double a = -8; a <= 8 + 1e-9; a += pitch)
    for (double z = 0; z <= 3 + 1e-9; z += pitch) {
      add({a, 8.0, z});   // north wall
      add({-8.0, a, z});  // west wall
      if (a < 2) add({8.0, a, z});  // part of the east wall
    }
  // Boxes of different heights.
  struct Box { double cx, cy, hx, hy, h; };
  for (const Box& b : {Box{2, 3, 1.0, 0.6, 1.2}, Box{-4, -3, 0.8, 1.5, 0.8}, Box{4, -5, 1.2, 1.2, 2.0}}) {
    for (double x = b.cx - b.hx; x <= b.cx + b.hx + 1e-9; x += pitch)
      for (double y = b.cy - b.hy; y <= b.cy + b.hy + 1e-9; y += pitch) add({x, y, b.h});
    for (double z = 0; z <= b.h + 1e-9; z += pitch) {
      for (double x = b.cx - b.hx; x <= b.cx + b.hx + 1e-9; x += pitch) {
        add({x, b.cy - b.hy, z});
        add({x, b.cy + b.hy, z});
      }
      for (double y = b.cy - b.hy; y <= b.cy + b.hy + 1e-9; y += pitch) {
        add({b.cx - b.hx, y, z});
        add({b.cx + b.hx, y, z});
      }
    }
  }
  for (double z = 0; z <= 4 + 1e-9; z += pitch)
    for (int k = 0; k < 12; ++k) {
      const double a = 2 * std::numbers::pi * k / 12;
      add({-2 + 0.3 * std::cos(a), 5 + 0.3 * std::sin(a), z});
    }
  // Sloped ramp pins down roll and pitch together with the box tops.
  for (double x = -6; x <= -2 + 1e-9; x += pitch)
    for (double y = 0; y <= 2 + 1e-9; y += pitch) add({x, y, 0.25 * (x + 6)});
  return c;
}

inline double planar_translation_error(const RigidTransform3& a, const RigidTransform3& b) {
  return (a.translation - b.translation).head<2>().norm();
}

inline double yaw_error_deg(const RigidTransform3& a, const RigidTransform3& b) {
  return std::abs(rad2deg(wrap_angle(a.yaw() - b.yaw())));
}

/// Upper 99% quantile of the chi-square law with `dof` degrees of freedom
/// (Wilson-Hilferty; relative error well under 1% for dof >= 10).
inline double chi2_quantile_99(double dof) {
  const double z = 2.3263478740408408;
  const double a = 2.0 / (9.0 * dof);
  return dof * std::pow(1.0 - a + z * std::sqrt(a), 3);
}

/// Pearson statistic of observed counts against expected counts.
inline double chi2_statistic(const std::vector<double>& observed, const std::vector<double>& expected) {
  double s = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    s += d * d / expected[i];
  }
  return s;
}

}  // namespace lockit::test
