#include "lightfit/scene.hpp"

#include <Eigen/Geometry>
#include <fmt/format.h>

#include <cmath>

namespace lightfit {

Vec3 Camera::backproject(double u, double v, double depth) const {
  const Vec3 local((u - cx) / fx * depth, (v - cy) / fy * depth, depth);
  return rotation * local + translation;
}

Vec2 Camera::project(const Vec3& world) const {
  const Vec3 local = rotation.transpose() * (world - translation);
  return {fx * local.x() / local.z() + cx, fy * local.y() / local.z() + cy};
}

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw PreconditionError("camera invariant violated: focal lengths must be strictly positive");
  }
  if (width <= 0 || height <= 0) {
    throw PreconditionError("camera invariant violated: image dimensions must be positive");
  }
  if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(cx) ||
      !std::isfinite(cy)) {
    throw PreconditionError("camera invariant violated: parameters must be finite");
  }
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || std::abs(rotation.determinant() - 1.0) > 1e-6) {
    throw PreconditionError(
        "camera invariant violated: rotation must be orthonormal with determinant +1");
  }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint,
                       double horizontal_fov_deg, int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up_hint).normalized();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = forward;
  cam.translation = eye;
  cam.width = width;
  cam.height = height;
  const double half = 0.5 * horizontal_fov_deg * M_PI / 180.0;
  cam.fx = 0.5 * width / std::tan(half);
  cam.fy = cam.fx;
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  return cam;
}

void DepthMap::validate() const {
  if (!depth.same_shape(valid)) {
    throw PreconditionError("depth map invariant violated: depth and mask dimensions differ");
  }
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (valid[i] && !(std::isfinite(depth[i]) && depth[i] > 0.0)) {
      throw PreconditionError(
          fmt::format("depth map invariant violated: valid depth must be finite and strictly "
                      "positive (pixel {}, value {})",
                      i, depth[i]));
    }
  }
}

std::size_t OrientedPointCloud::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid.values()) {
    n += v ? 1 : 0;
  }
  return n;
}

void OrientedPointCloud::validate() const {
  if (!points.same_shape(normals) || !points.same_shape(valid)) {
    throw PreconditionError(
        "point cloud invariant violated: points, normals and mask dimensions differ");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!valid[i]) {
      continue;
    }
    if (!points[i].allFinite()) {
      throw PreconditionError(fmt::format(
          "point cloud invariant violated: valid point {} is not finite", i));
    }
    if (!normals[i].allFinite() || std::abs(normals[i].norm() - 1.0) > 1e-6) {
      throw PreconditionError(fmt::format(
          "point cloud invariant violated: normal {} must have unit norm (got norm {})", i,
          normals[i].norm()));
    }
  }
}

MaterialMaps MaterialMaps::uniform(int width, int height, double kd, double ks,
                                   double shininess) {
  return {Grid<double>(width, height, kd), Grid<double>(width, height, ks), shininess};
}

void MaterialMaps::validate() const {
  if (!diffuse.same_shape(specular)) {
    throw PreconditionError("material invariant violated: reflectance maps differ in size");
  }
  if (!(shininess > 0.0) || !std::isfinite(shininess)) {
    throw PreconditionError("material invariant violated: shininess must be > 0");
  }
  for (std::size_t i = 0; i < diffuse.size(); ++i) {
    if (!(std::isfinite(diffuse[i]) && diffuse[i] >= 0.0 && std::isfinite(specular[i]) &&
          specular[i] >= 0.0)) {
      throw PreconditionError(fmt::format(
          "material invariant violated: reflectance at pixel {} must be finite and non-negative",
          i));
    }
  }
}

void Scene::validate() const {
  camera.validate();
  cloud.validate();
  materials.validate();
  if (!cloud.points.same_shape(materials.diffuse)) {
    throw PreconditionError(
        "scene invariant violated: material maps must align with the point cloud");
  }
}

BoundingBox bounding_box(const OrientedPointCloud& cloud) {
  BoundingBox box;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (cloud.valid[i]) {
      box.extend(cloud.points[i]);
    }
  }
  return box;
}

OrientedPointCloud depth_to_cloud(const DepthMap& depth, const Camera& camera) {
  if (depth.width() != camera.width || depth.height() != camera.height) {
    throw PreconditionError(fmt::format("depth map is {}x{} but camera expects {}x{}",
                                        depth.width(), depth.height(), camera.width,
                                        camera.height));
  }
  depth.validate();
  const int w = depth.width();
  const int h = depth.height();

  Grid<Vec3> points(w, h, Vec3::Zero());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (depth.valid(x, y)) {
        points(x, y) = camera.backproject(x, y, depth.depth(x, y));
      }
    }
  }

  OrientedPointCloud cloud{points, Grid<Vec3>(w, h, Vec3::Zero()), Mask(w, h, 0)};
  const Vec3 eye = camera.center();
  std::size_t kept = 0;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (!depth.valid(x, y) || !depth.valid(x - 1, y) || !depth.valid(x + 1, y) ||
          !depth.valid(x, y - 1) || !depth.valid(x, y + 1)) {
        continue;
      }
      const Vec3 du = points(x + 1, y) - points(x - 1, y);
      const Vec3 dv = points(x, y + 1) - points(x, y - 1);
      Vec3 n = du.cross(dv);
      const double len = n.norm();
      if (!(len > 0.0) || !std::isfinite(len)) {
        continue;
      }
      n /= len;
      if (n.dot(eye - points(x, y)) < 0.0) {
        n = -n;
      }
      cloud.normals(x, y) = n;
      cloud.valid(x, y) = 1;
      ++kept;
    }
  }
  if (kept == 0) {
    throw PreconditionError("depth map has no valid pixel with a valid 4-neighborhood");
  }
  return cloud;
}

Scene transform_scene(const Scene& scene, const SimilarityTransform& transform) {
  Scene out = scene;
  for (std::size_t i = 0; i < out.cloud.points.size(); ++i) {
    if (out.cloud.valid[i]) {
      out.cloud.points[i] = transform.apply(out.cloud.points[i]);
    }
  }
  out.camera.translation = transform.apply(scene.camera.translation);
  return out;
}

std::pair<Scene, SimilarityTransform> normalize_scene(const Scene& scene) {
  const BoundingBox box = bounding_box(scene.cloud);
  if (box.empty()) {
    throw PreconditionError("cannot normalize a scene without valid points");
  }
  if ((box.min.array() >= -0.5 - 1e-12).all() && (box.max.array() <= 0.5 + 1e-12).all()) {
    return {scene, SimilarityTransform{}};
  }
  const double extent = (box.max - box.min).maxCoeff();
  SimilarityTransform t;
  t.scale = extent > 0.0 ? 1.0 / extent : 1.0;
  t.translation = -t.scale * box.center();
  return {transform_scene(scene, t), t};
}

}  // namespace lightfit
