#pragma once

#include "lightfit/renderer.hpp"
#include "lightfit/random.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace testing {

using namespace lightfit;

inline double deg(double radians) { return radians * 180.0 / M_PI; }

inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Camera at (0, 0, height) looking straight down at the origin.
inline Camera top_camera(int w, int h, double height = 2.0, double fov = 50.0) {
  return Camera::look_at(Vec3(0, 0, height), Vec3::Zero(), Vec3(0, 1, 0), fov, w, h);
}

/// Camera-space constant depth: a fronto-parallel plane.
inline DepthMap constant_depth(int w, int h, double d) {
  return DepthMap{Grid<double>(w, h, d), Mask(w, h, 1)};
}

inline Scene make_scene(const DepthMap& depth, const Camera& cam, double kd = 1.0,
                        double ks = 1.0, double alpha = 10.0) {
  Scene s;
  s.camera = cam;
  s.cloud = depth_to_cloud(depth, cam);
  s.materials = MaterialMaps::uniform(depth.width(), depth.height(), kd, ks, alpha);
  return s;
}

/// Ground plane z = 0 seen from a tilted camera, plus an optional box
/// [-b, b]^2 x [0, 2b] traced analytically.
inline DepthMap ray_traced_depth(const Camera& cam, double box_half) {
  DepthMap d{Grid<double>(cam.width, cam.height, 0.0), Mask(cam.width, cam.height, 0)};
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 dir = cam.backproject(x, y, 1.0) - cam.center();
      const Vec3 o = cam.center();
      double best = std::numeric_limits<double>::infinity();
      if (dir.z() < 0.0) {
        const double t = -o.z() / dir.z();
        const Vec3 p = o + t * dir;
        if (std::abs(p.x()) < 1.5 && std::abs(p.y()) < 1.5) {
          best = t;
        }
      }
      if (box_half > 0.0) {
        const Vec3 lo(-box_half, -box_half, 0.0);
        const Vec3 hi(box_half, box_half, 2.0 * box_half);
        double t0 = 0.0;
        double t1 = std::numeric_limits<double>::infinity();
        bool hit = true;
        for (int k = 0; k < 3; ++k) {
          const double inv = 1.0 / dir[k];
          double a = (lo[k] - o[k]) * inv;
          double b = (hi[k] - o[k]) * inv;
          if (a > b) std::swap(a, b);
          t0 = std::max(t0, a);
          t1 = std::min(t1, b);
          hit = hit && t0 <= t1;
        }
        if (hit && t0 > 0.0) best = std::min(best, t0);
      }
      if (std::isfinite(best)) {
        d.depth(x, y) = best;  // dir has unit camera z
        d.valid(x, y) = 1;
      }
    }
  }
  return d;
}

inline Camera oblique_camera(int w, int h) {
  return Camera::look_at(Vec3(1.2, -2.2, 1.8), Vec3(0, 0, 0.2), Vec3(0, 0, 1), 50.0, w, h);
}

inline Vec3 random_unit(SplitMix64& rng) {
  for (;;) {
    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (v.norm() > 1e-3 && v.norm() <= 1.0) return v.normalized();
  }
}

}  // namespace testing
