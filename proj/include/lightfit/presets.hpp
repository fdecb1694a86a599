#pragma once

#include "lightfit/renderer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lightfit {

/// Analytic primitives the procedural presets are built from.
struct Primitive {
  enum class Kind { GroundSquare, Box, Sphere };
  Kind kind = Kind::Box;
  Vec3 min = Vec3::Zero();  // box corners; ground square uses min/max x, y at z = 0
  Vec3 max = Vec3::Zero();
  Vec3 center = Vec3::Zero();  // sphere
  double radius = 0.0;

  /// Smallest ray parameter t > t_min at which origin + t * dir hits the primitive.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir, double t_min) const;
};

/// Nearest hit over all primitives: (t, primitive index).
std::optional<std::pair<double, int>> cast_ray(std::span<const Primitive> prims,
                                               const Vec3& origin, const Vec3& dir,
                                               double t_min = 1e-9);

struct GeneratedScene {
  Scene scene;
  DepthMap depth;
  /// Ground-truth lights, one experiment each; every light has I_L = 0.5.
  std::vector<PointLight> lights;
  double ambient = 0.5;
  std::vector<Primitive> primitives;
  /// Index of the primitive each pixel sees, -1 for background. Index 0 is the ground.
  Grid<int> labels;
};

inline constexpr std::array<std::string_view, 3> kPresetNames = {"plane-box", "plane-spheres",
                                                                  "steps"};

/// Deterministic procedural scene: analytic depth from the camera, ideal
/// materials (kd = ks = 1, alpha = 10), ambient 0.5 and six lights placed
/// around the scene so that each shadows at least 5% of the ground pixels.
GeneratedScene gen_scene(std::string_view preset, std::uint64_t seed, int resolution = 128);

/// Fraction of valid ground pixels whose segment to `light` hits another
/// primitive (exact analytic test).
double ground_shadow_fraction(const GeneratedScene& g, const Vec3& light);

}  // namespace lightfit
