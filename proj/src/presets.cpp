#include "lightfit/presets.hpp"

#include "lightfit/random.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cmath>
#include <limits>

namespace lightfit {

std::optional<double> Primitive::intersect(const Vec3& o, const Vec3& d, double t_min) const {
  switch (kind) {
    case Kind::GroundSquare: {
      if (d.z() == 0.0) {
        return std::nullopt;
      }
      const double t = -o.z() / d.z();
      if (!(t > t_min)) {
        return std::nullopt;
      }
      const Vec3 p = o + t * d;
      if (p.x() < min.x() || p.x() > max.x() || p.y() < min.y() || p.y() > max.y()) {
        return std::nullopt;
      }
      return t;
    }
    case Kind::Box: {
      double t0 = -std::numeric_limits<double>::infinity();
      double t1 = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
          if (o[a] < min[a] || o[a] > max[a]) {
            return std::nullopt;
          }
          continue;
        }
        double ta = (min[a] - o[a]) / d[a];
        double tb = (max[a] - o[a]) / d[a];
        if (ta > tb) {
          std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
      if (t0 > t1) {
        return std::nullopt;
      }
      if (t0 > t_min) {
        return t0;
      }
      if (t1 > t_min) {
        return t1;
      }
      return std::nullopt;
    }
    case Kind::Sphere: {
      const Vec3 oc = o - center;
      const double a = d.squaredNorm();
      const double b = oc.dot(d);
      const double c = oc.squaredNorm() - radius * radius;
      const double disc = b * b - a * c;
      if (disc < 0.0) {
        return std::nullopt;
      }
      const double s = std::sqrt(disc);
      const double ta = (-b - s) / a;
      const double tb = (-b + s) / a;
      if (ta > t_min) {
        return ta;
      }
      if (tb > t_min) {
        return tb;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<std::pair<double, int>> cast_ray(std::span<const Primitive> prims, const Vec3& o,
                                               const Vec3& d, double t_min) {
  std::optional<std::pair<double, int>> best;
  for (std::size_t i = 0; i < prims.size(); ++i) {
    if (auto t = prims[i].intersect(o, d, t_min); t && (!best || *t < best->first)) {
      best = std::make_pair(*t, static_cast<int>(i));
    }
  }
  return best;
}

namespace {

Primitive ground() {
  Primitive p;
  p.kind = Primitive::Kind::GroundSquare;
  p.min = Vec3(-1.0, -1.0, 0.0);
  p.max = Vec3(1.0, 1.0, 0.0);
  return p;
}

Primitive box(const Vec3& lo, const Vec3& hi) {
  Primitive p;
  p.kind = Primitive::Kind::Box;
  p.min = lo;
  p.max = hi;
  return p;
}

Primitive sphere(const Vec3& c, double r) {
  Primitive p;
  p.kind = Primitive::Kind::Sphere;
  p.center = c;
  p.radius = r;
  return p;
}

std::vector<Primitive> build_primitives(std::string_view preset, SplitMix64& rng) {
  std::vector<Primitive> prims{ground()};
  if (preset == "plane-box") {
    const double cx = rng.uniform(-0.15, 0.15);
    const double cy = rng.uniform(-0.15, 0.15);
    const double hx = rng.uniform(0.2, 0.3);
    const double hy = rng.uniform(0.2, 0.3);
    const double height = rng.uniform(0.35, 0.55);
    prims.push_back(box(Vec3(cx - hx, cy - hy, 0.0), Vec3(cx + hx, cy + hy, height)));
  } else if (preset == "plane-spheres") {
    const int count = 2 + static_cast<int>(rng.next() % 2);
    while (static_cast<int>(prims.size()) < count + 1) {
      const double r = rng.uniform(0.15, 0.28);
      const Vec3 c(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), r);
      bool overlaps = false;
      for (std::size_t i = 1; i < prims.size(); ++i) {
        overlaps |= (prims[i].center - c).norm() < prims[i].radius + r + 0.05;
      }
      if (!overlaps) {
        prims.push_back(sphere(c, r));
      }
    }
  } else if (preset == "steps") {
    const int steps = 3 + static_cast<int>(rng.next() % 2);
    const double half_width = rng.uniform(0.45, 0.65);
    const double rise = rng.uniform(0.1, 0.15);
    const double run = 1.2 / steps;
    for (int i = 0; i < steps; ++i) {
      const double y0 = -0.6 + i * run;
      prims.push_back(box(Vec3(-half_width, y0, 0.0), Vec3(half_width, 0.6, (i + 1) * rise)));
    }
  } else {
    throw PreconditionError(fmt::format("unknown preset '{}' (valid presets: {})", preset,
                                        fmt::join(kPresetNames, ", ")));
  }
  return prims;
}

}  // namespace

double ground_shadow_fraction(const GeneratedScene& g, const Vec3& light) {
  const auto& cloud = g.scene.cloud;
  std::size_t ground_pixels = 0;
  std::size_t shadowed = 0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.valid[i] || g.labels[i] != 0) {
      continue;
    }
    ++ground_pixels;
    const Vec3 x = cloud.points[i];
    const Vec3 d = light - x;
    // Only occluders other than the ground itself; start just off the surface.
    for (std::size_t p = 1; p < g.primitives.size(); ++p) {
      if (auto t = g.primitives[p].intersect(x, d, 1e-6); t && *t < 1.0) {
        ++shadowed;
        break;
      }
    }
  }
  return ground_pixels == 0 ? 0.0 : static_cast<double>(shadowed) / ground_pixels;
}

GeneratedScene gen_scene(std::string_view preset, std::uint64_t seed, int resolution) {
  if (resolution < 8) {
    throw PreconditionError("scene resolution must be at least 8");
  }
  SplitMix64 rng(seed ^ 0x5eed5eed5eedULL);
  GeneratedScene g;
  g.primitives = build_primitives(preset, rng);

  // Seeded camera azimuth off the y axis, so that the axis-aligned edges of
  // the scene do not project parallel to pixel rows.
  const double yaw = (rng.next() % 2 == 0 ? 1.0 : -1.0) * rng.uniform(12.0, 35.0) * M_PI / 180.0;
  const Vec3 eye(2.0 * std::sin(yaw), -2.0 * std::cos(yaw), 1.6);
  const Camera camera = Camera::look_at(eye, Vec3(0.0, 0.0, 0.15), Vec3(0.0, 0.0, 1.0), 55.0,
                                        resolution, resolution);
  g.depth = DepthMap{Grid<double>(resolution, resolution, 0.0), Mask(resolution, resolution, 0)};
  g.labels = Grid<int>(resolution, resolution, -1);
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const Vec3 dir = camera.rotation * Vec3((x - camera.cx) / camera.fx,
                                              (y - camera.cy) / camera.fy, 1.0);
      if (auto hit = cast_ray(g.primitives, camera.center(), dir)) {
        g.depth.depth(x, y) = hit->first;
        g.depth.valid(x, y) = 1;
        g.labels(x, y) = hit->second;
      }
    }
  }

  g.scene.camera = camera;
  g.scene.cloud = depth_to_cloud(g.depth, camera);
  g.scene.materials = MaterialMaps::uniform(resolution, resolution, 1.0, 1.0, 10.0);
  g.ambient = 0.5;

  constexpr int kLights = 6;
  constexpr double kMinCoverage = 0.05;
  for (int k = 0; k < kLights; ++k) {
    Vec3 best = Vec3::Zero();
    double best_coverage = -1.0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double azimuth = 2.0 * M_PI * k / kLights + rng.uniform(-0.3, 0.3);
      const double elevation = rng.uniform(25.0, 50.0) * M_PI / 180.0;
      const double radius = rng.uniform(1.4, 1.8);
      const Vec3 p = radius * Vec3(std::cos(elevation) * std::cos(azimuth),
                                   std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
      const double coverage = ground_shadow_fraction(g, p);
      if (coverage > best_coverage) {
        best = p;
        best_coverage = coverage;
      }
      if (coverage >= kMinCoverage) {
        break;
      }
    }
    g.lights.push_back(PointLight{best, 0.5});
  }
  return g;
}

}  // namespace lightfit
