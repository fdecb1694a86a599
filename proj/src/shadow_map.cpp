#include "lightfit/renderer.hpp"

#include <Eigen/Geometry>
#include <fmt/format.h>

#include <algorithm>
#include <limits>

namespace lightfit {

namespace {

// Face f looks along +axis (even f) or -axis (odd f), axis = f / 2. Texel
// coordinates (u, v) run along the two remaining axes in cyclic order.

int to_texel(double coord, int resolution) {
  const int t = static_cast<int>(std::floor((coord + 1.0) * 0.5 * resolution));
  return std::clamp(t, 0, resolution - 1);
}

// Direction through the centre of texel (u, v) of the face along `axis`;
// u or v outside [0, resolution) extend the face plane past its edge.
Vec3 texel_direction(int axis, double sign, int u, int v, int resolution) {
  Vec3 dir;
  dir[axis] = sign;
  dir[(axis + 1) % 3] = (u + 0.5) * 2.0 / resolution - 1.0;
  dir[(axis + 2) % 3] = (v + 0.5) * 2.0 / resolution - 1.0;
  return dir;
}

}  // namespace

void ShadowConfig::validate() const {
  if (resolution < 16) {
    throw PreconditionError("shadow map resolution must be at least 16");
  }
  if (splat < 1) {
    throw PreconditionError("shadow splat size must be at least 1");
  }
  if (!(bias_fraction >= 0.0) || !std::isfinite(bias_fraction) || !(slope_bias >= 0.0) ||
      !std::isfinite(slope_bias)) {
    throw PreconditionError("shadow bias must be finite and >= 0");
  }
  if (!(surfel_scale >= 0.0) || !std::isfinite(surfel_scale)) {
    throw PreconditionError("surfel scale must be finite and >= 0");
  }
}

double shadow_bias(const OrientedPointCloud& cloud, const ShadowConfig& cfg) {
  return cfg.bias_fraction * bounding_box(cloud).diagonal();
}

ShadowMap::ShadowMap(const Vec3& light, int resolution, double bias, double slope_bias)
    : light_(light), resolution_(resolution), bias_(bias), slope_bias_(slope_bias) {
  if (resolution < 16) {
    throw PreconditionError("shadow map resolution must be at least 16");
  }
  if (!(bias >= 0.0) || !(slope_bias >= 0.0)) {
    throw PreconditionError("shadow map bias must be >= 0");
  }
  const std::size_t texels = static_cast<std::size_t>(resolution) * resolution;
  for (int f = 0; f < 6; ++f) {
    points_[f].assign(texels, std::numeric_limits<double>::infinity());
  }
}

ShadowMap::Texel ShadowMap::texel_of(const Vec3& d) const {
  const Vec3 a = d.cwiseAbs();
  int axis = 0;
  if (a.y() > a.x() && a.y() >= a.z()) {
    axis = 1;
  } else if (a.z() > a.x() && a.z() > a.y()) {
    axis = 2;
  }
  const double major = a[axis];
  const double u = d[(axis + 1) % 3] / major;
  const double v = d[(axis + 2) % 3] / major;
  return {2 * axis + (d[axis] < 0.0 ? 1 : 0), to_texel(u, resolution_), to_texel(v, resolution_)};
}

double ShadowMap::lookup(const Vec3& p) const { return stored(texel_of(p - light_)); }

double ShadowMap::bias_at(const Vec3& p, const Vec3& n) const {
  const Vec3 to_light = light_ - p;
  const double d = to_light.norm();
  return receiver_bias(bias_, slope_bias_, resolution_, d, d > 0.0 ? n.dot(to_light) / d : 1.0);
}

bool ShadowMap::occluded(const Vec3& p, const Vec3& n) const {
  if (!finalized_) {
    throw std::logic_error("ShadowMap::finalize() must run before occlusion queries");
  }
  const Vec3 d = p - light_;
  const double distance = d.norm();
  const Texel t = texel_of(d);
  if (distance > points_[t.face][index(t)] + bias_at(p, n)) {
    return true;
  }
  const double limit = distance - bias_;
  const Vec3 w = d / distance;
  for (std::uint32_t id : candidates(t)) {
    if (disc_hit(discs_[id], w) < limit) {
      return true;
    }
  }
  return false;
}

std::span<const std::uint32_t> ShadowMap::candidates(const Texel& t) const {
  if (!finalized_) {
    throw std::logic_error("ShadowMap::finalize() must run before occlusion queries");
  }
  if (offsets_.empty()) {
    return {};
  }
  const std::size_t g = global_index(t);
  return {listed_.data() + offsets_[g], listed_.data() + offsets_[g + 1]};
}

void ShadowMap::finalize() {
  if (finalized_) {
    return;
  }
  // Counting sort by texel; within a texel, discs keep insertion order.
  const std::size_t texels = 6 * static_cast<std::size_t>(resolution_) * resolution_;
  offsets_.assign(texels + 1, 0);
  for (const auto& [texel, id] : pending_) {
    ++offsets_[texel + 1];
  }
  for (std::size_t i = 0; i < texels; ++i) {
    offsets_[i + 1] += offsets_[i];
  }
  listed_.resize(pending_.size());
  std::vector<std::uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [texel, id] : pending_) {
    listed_[cursor[texel]++] = id;
  }
  pending_.clear();
  pending_.shrink_to_fit();
  finalized_ = true;
}

void ShadowMap::store_min(const Texel& t, double distance) {
  double& slot = points_[t.face][index(t)];
  slot = std::min(slot, distance);
}

double ShadowMap::disc_hit(const Disc& disc, const Vec3& w) const {
  const double denom = disc.normal.dot(w);
  if (std::abs(denom) < 1e-12) {
    return std::numeric_limits<double>::infinity();
  }
  const double hit = disc.normal.dot(disc.center - light_) / denom;
  if (hit > 0.0 && (light_ + hit * w - disc.center).squaredNorm() <= disc.radius * disc.radius) {
    return hit;
  }
  return std::numeric_limits<double>::infinity();
}

double ShadowMap::stored(const Texel& t) const {
  double best = points_[t.face][index(t)];
  const auto list = candidates(t);
  if (!list.empty()) {
    const int axis = t.face / 2;
    const double sign = (t.face % 2 == 0) ? 1.0 : -1.0;
    const Vec3 w = texel_direction(axis, sign, t.u, t.v, resolution_).normalized();
    for (std::uint32_t id : list) {
      best = std::min(best, disc_hit(discs_[id], w));
    }
  }
  return best;
}

void ShadowMap::splat(const Vec3& p, int size) {
  const Vec3 d = p - light_;
  const double distance = d.norm();
  const Texel center = texel_of(d);
  const int lo = -(size / 2);
  const int hi = lo + size - 1;
  const int axis = center.face / 2;
  const double sign = (center.face % 2 == 0) ? 1.0 : -1.0;
  for (int dv = lo; dv <= hi; ++dv) {
    for (int du = lo; du <= hi; ++du) {
      const int u = center.u + du;
      const int v = center.v + dv;
      // Off the face: re-project the texel center direction onto its cube face.
      const Texel t = (u >= 0 && v >= 0 && u < resolution_ && v < resolution_)
                          ? Texel{center.face, u, v}
                          : texel_of(texel_direction(axis, sign, u, v, resolution_));
      store_min(t, distance);
    }
  }
}

void ShadowMap::splat_disc(const Vec3& p, const Vec3& n, double radius) {
  if (!(radius > 0.0)) {
    return;
  }
  const Vec3 d = p - light_;
  const Texel center = texel_of(d);
  const int axis = center.face / 2;
  const double sign = (center.face % 2 == 0) ? 1.0 : -1.0;
  // Texel bounds from the projected corners of the disc's bounding square;
  // perspective keeps the projection inside their convex hull as long as
  // every corner lies in front of the face.
  const Vec3 t1 = n.unitOrthogonal() * radius;
  const Vec3 t2 = n.cross(t1);
  double u_lo = std::numeric_limits<double>::infinity();
  double u_hi = -u_lo;
  double v_lo = u_lo;
  double v_hi = u_hi;
  bool in_front = true;
  const std::array<Vec3, 4> corners = {Vec3(d + t1 + t2), Vec3(d + t1 - t2), Vec3(d - t1 + t2),
                                       Vec3(d - t1 - t2)};
  for (const Vec3& c : corners) {
    const double along = sign * c[axis];
    if (along < 1e-3 * c.norm()) {
      in_front = false;
      break;
    }
    const double u = (c[(axis + 1) % 3] / along + 1.0) * 0.5 * resolution_ - 0.5;
    const double v = (c[(axis + 2) % 3] / along + 1.0) * 0.5 * resolution_ - 0.5;
    u_lo = std::min(u_lo, u);
    u_hi = std::max(u_hi, u);
    v_lo = std::min(v_lo, v);
    v_hi = std::max(v_hi, v);
  }
  const auto id = static_cast<std::uint32_t>(discs_.size());
  discs_.push_back({p, n, radius});
  finalized_ = false;
  if (!in_front) {
    // The disc reaches behind the face plane: register it in every texel
    // whose direction falls inside the disc's bounding cone, widened by the
    // largest texel half-diagonal.
    const double distance = d.norm();
    const double half = radius >= distance ? M_PI : std::asin(radius / distance);
    const double reach = std::cos(std::min(M_PI, half + std::sqrt(2.0) / resolution_));
    const Vec3 c = d / distance;
    for (int face = 0; face < 6; ++face) {
      for (int v = 0; v < resolution_; ++v) {
        for (int u = 0; u < resolution_; ++u) {
          const Vec3 w = texel_direction(face / 2, face % 2 == 0 ? 1.0 : -1.0, u, v, resolution_);
          if (w.dot(c) >= reach * w.norm()) {
            pending_.emplace_back(static_cast<std::uint32_t>(global_index(Texel{face, u, v})), id);
          }
        }
      }
    }
    return;
  }
  const int u0 = std::max(center.u - resolution_, static_cast<int>(std::floor(u_lo)));
  const int u1 = std::min(center.u + resolution_, static_cast<int>(std::ceil(u_hi)));
  const int v0 = std::max(center.v - resolution_, static_cast<int>(std::floor(v_lo)));
  const int v1 = std::min(center.v + resolution_, static_cast<int>(std::ceil(v_hi)));
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const Texel texel = (u >= 0 && v >= 0 && u < resolution_ && v < resolution_)
                              ? Texel{center.face, u, v}
                              : texel_of(texel_direction(axis, sign, u, v, resolution_));
      pending_.emplace_back(static_cast<std::uint32_t>(global_index(texel)), id);
    }
  }
}

Surfels make_surfels(const OrientedPointCloud& cloud, double scale) {
  Surfels out{Grid<double>(cloud.width(), cloud.height(), 0.0),
              Mask(cloud.width(), cloud.height(), 0)};
  const auto usable = [&](int x, int y) { return cloud.valid.contains(x, y) && cloud.valid(x, y); };
  const auto gap = [&](int x0, int y0, int x1, int y1) {
    return (cloud.points(x1, y1) - cloud.points(x0, y0)).norm();
  };
  // Nearer valid neighbour spacing along one image axis (infinite when there
  // is none or the only neighbour lies across a depth jump) and a jump flag.
  // A lone neighbour is judged against the spacing just beyond it.
  const auto spacing = [&](int x, int y, int dx, int dy) {
    const bool before = usable(x - dx, y - dy);
    const bool after = usable(x + dx, y + dy);
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (before && after) {
      const double a = gap(x, y, x - dx, y - dy);
      const double b = gap(x, y, x + dx, y + dy);
      return std::pair{std::min(a, b), std::max(a, b) > kSurfelJumpRatio * std::min(a, b)};
    }
    if (!before && !after) {
      return std::pair{inf, false};
    }
    const int s = after ? 1 : -1;
    const double d = gap(x, y, x + s * dx, y + s * dy);
    if (usable(x + 2 * s * dx, y + 2 * s * dy) &&
        d > kSurfelJumpRatio * gap(x + s * dx, y + s * dy, x + 2 * s * dx, y + 2 * s * dy)) {
      return std::pair{inf, true};
    }
    return std::pair{d, false};
  };
  for (int y = 0; y < cloud.height(); ++y) {
    for (int x = 0; x < cloud.width(); ++x) {
      if (!cloud.valid(x, y)) {
        continue;
      }
      auto [sx, jx] = spacing(x, y, 1, 0);
      auto [sy, jy] = spacing(x, y, 0, 1);
      // Central-difference normals straddling a depth jump are unreliable.
      out.facing_light(x, y) = jx || jy;
      if (std::isinf(sx) && std::isinf(sy)) {
        continue;
      }
      if (std::isinf(sx)) {
        sx = sy;
      } else if (std::isinf(sy)) {
        sy = sx;
      }
      out.radius(x, y) = scale * 0.5 * std::hypot(sx, sy);
    }
  }
  return out;
}

ShadowMap render_shadow_map(const OrientedPointCloud& cloud, const Vec3& light,
                            const ShadowConfig& cfg) {
  return render_shadow_map(cloud, make_surfels(cloud, cfg.surfel_scale), light, cfg);
}

ShadowMap render_shadow_map(const OrientedPointCloud& cloud, const Surfels& surfels,
                            const Vec3& light, const ShadowConfig& cfg) {
  cfg.validate();
  if (!surfels.radius.same_shape(cloud.valid) || !surfels.facing_light.same_shape(cloud.valid)) {
    throw PreconditionError("surfels do not match the point cloud dimensions");
  }
  if (cloud.valid_count() == 0) {
    throw PreconditionError("cannot render a shadow map from an empty point cloud");
  }
  ShadowMap map(light, cfg.resolution, shadow_bias(cloud, cfg), cfg.slope_bias);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.valid[i]) {
      continue;
    }
    if ((cloud.points[i] - light).norm() < kCoincidenceEpsilon) {
      throw PreconditionError(fmt::format(
          "light at ({}, {}, {}) coincides with scene point {}", light.x(), light.y(),
          light.z(), i));
    }
    if (cfg.surfel_scale == 0.0) {
      map.splat(cloud.points[i], cfg.splat);
      continue;
    }
    // The s x s footprint survives as a lower bound on the disc's angular size.
    const Vec3 to_light = light - cloud.points[i];
    const double distance = to_light.norm();
    const double radius = std::max(surfels.radius[i], cfg.splat * distance / cfg.resolution);
    map.splat_disc(cloud.points[i],
                   surfels.facing_light[i] ? Vec3(to_light / distance) : cloud.normals[i],
                   radius);
  }
  map.finalize();
  return map;
}

Mask shadow_term(const ShadowMap& map, const OrientedPointCloud& cloud) {
  Mask lit(cloud.width(), cloud.height(), 1);
  parallel_for(cloud.points.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (!cloud.valid[i]) {
        continue;
      }
      lit[i] = map.occluded(cloud.points[i], cloud.normals[i]) ? 0 : 1;
    }
  });
  return lit;
}

}  // namespace lightfit
