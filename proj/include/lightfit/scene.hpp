#pragma once

#include "lightfit/common.hpp"

#include <limits>
#include <utility>

namespace lightfit {

/// Pinhole camera. Camera coordinates follow the usual vision convention:
/// +x right, +y down, +z forward. `rotation` and `translation` map camera
/// coordinates to world coordinates, so the camera center is `translation`.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 center() const { return translation; }
  Vec3 up() const { return -rotation.col(1); }
  Vec3 forward() const { return rotation.col(2); }

  /// World point seen at pixel (u, v) with camera-frame z equal to depth.
  Vec3 backproject(double u, double v, double depth) const;
  /// Pixel coordinates of a world point; undefined for points behind the camera.
  Vec2 project(const Vec3& world) const;

  /// Throws PreconditionError naming the violated invariant.
  void validate() const;

  /// Camera at `eye` looking at `target`, with horizontal field of view in
  /// degrees and the principal point at the image center.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint,
                        double horizontal_fov_deg, int width, int height);
};

/// Per-pixel camera-frame z depth. Invalid pixels carry no depth.
struct DepthMap {
  Grid<double> depth;
  Mask valid;

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  void validate() const;
  bool operator==(const DepthMap&) const = default;
};

/// Pixel-aligned oriented point cloud; element (x, y) is the surface point
/// seen through pixel (x, y).
struct OrientedPointCloud {
  Grid<Vec3> points;
  Grid<Vec3> normals;
  Mask valid;

  int width() const { return points.width(); }
  int height() const { return points.height(); }
  std::size_t valid_count() const;
  void validate() const;
};

struct MaterialMaps {
  Grid<double> diffuse;
  Grid<double> specular;
  double shininess = 10.0;

  static MaterialMaps uniform(int width, int height, double kd, double ks, double shininess);
  void validate() const;
  bool operator==(const MaterialMaps&) const = default;
};

struct Scene {
  OrientedPointCloud cloud;
  Camera camera;
  MaterialMaps materials;

  int width() const { return cloud.width(); }
  int height() const { return cloud.height(); }
  void validate() const;
};

struct BoundingBox {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  bool empty() const { return !(min.array() <= max.array()).all(); }
  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return empty() ? 0.0 : (max - min).norm(); }
};

BoundingBox bounding_box(const OrientedPointCloud& cloud);

/// x' = scale * x + translation.
struct SimilarityTransform {
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * p + translation; }
  Vec3 invert(const Vec3& p) const { return (p - translation) / scale; }
  bool is_identity() const { return scale == 1.0 && translation.isZero(0.0); }
};

/// Backprojects every valid pixel and estimates normals from central
/// differences of the neighboring points, oriented toward the camera.
/// Pixels without a full valid 4-neighborhood are marked invalid.
OrientedPointCloud depth_to_cloud(const DepthMap& depth, const Camera& camera);

/// Maps the scene so that its valid points fit the unit cube centered at the
/// origin. Scenes already inside that cube get the identity transform.
std::pair<Scene, SimilarityTransform> normalize_scene(const Scene& scene);

/// Applies a similarity to points and camera pose; normals are unchanged.
Scene transform_scene(const Scene& scene, const SimilarityTransform& transform);

}  // namespace lightfit
