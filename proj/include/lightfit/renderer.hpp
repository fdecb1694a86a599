#pragma once

#include "lightfit/common.hpp"
#include "lightfit/image.hpp"
#include "lightfit/scene.hpp"

#include <array>
#include <cmath>
#include <string>
#include <string_view>

namespace lightfit {

struct PointLight {
  Vec3 position = Vec3::Zero();
  double intensity = 0.5;
};

/// Illumination parameters: point lights plus an ambient term.
struct LightParams {
  std::vector<PointLight> lights;
  double ambient = 0.5;

  void validate() const;
};

/// Which terms of the shading model take part in rendering and gradients.
///  - DiffuseAmbient: ambient + diffuse.
///  - DiffuseSpecular: ambient + diffuse + specular.
///  - FullShadows: all terms gated by cast shadows.
enum class ModelKind { DiffuseAmbient, DiffuseSpecular, FullShadows };

inline bool has_specular(ModelKind m) { return m != ModelKind::DiffuseAmbient; }
inline bool has_shadows(ModelKind m) { return m == ModelKind::FullShadows; }

std::string_view to_string(ModelKind m);
/// Accepts "diffuse", "specular", "full" and the enumerator spellings.
ModelKind parse_model_kind(std::string_view name);
inline constexpr std::array<ModelKind, 3> kAllModels = {
    ModelKind::DiffuseAmbient, ModelKind::DiffuseSpecular, ModelKind::FullShadows};

/// Per-pixel geometry of one light. Dot products are clamped to [0, 1].
/// `half_norm` is |light_dir + view_dir| before normalization.
struct ShadingFrame {
  Grid<Vec3> light_dir;
  Grid<Vec3> view_dir;
  Grid<Vec3> halfway;
  Grid<double> n_dot_l;
  Grid<double> n_dot_h;
  Grid<double> distance;
  Grid<double> half_norm;
  Mask valid;

  int width() const { return valid.width(); }
  int height() const { return valid.height(); }
};

/// Pixels closer than this to the light or the camera are left unshaded.
inline constexpr double kCoincidenceEpsilon = 1e-9;

ShadingFrame build_shading_frame(const Scene& scene, const PointLight& light);

struct ShadowConfig {
  int resolution = 256;        // texels per cube face side
  int splat = 3;               // splat footprint in texels per side
  double bias_fraction = 0.02; // depth bias as a fraction of the scene diagonal
  /// Slope-scaled bias in texels: adds slope_bias * texel_size * tan(theta)
  /// at the receiver, theta being the angle between normal and light
  /// direction. Zero gives the plain constant-bias test.
  double slope_bias = 2.5;
  /// Points are splatted as discs of radius surfel_scale * half the diagonal
  /// of their grid cell (see make_surfels), so sparse occluders cast
  /// hole-free shadows. Zero selects plain s x s texel splats.
  double surfel_scale = 1.25;

  void validate() const;
};

double shadow_bias(const OrientedPointCloud& cloud, const ShadowConfig& cfg);

/// Largest tangent used by the slope-scaled bias (about 84 degrees).
inline constexpr double kMaxBiasSlope = 10.0;

/// Bias applied to a receiver at `distance` from the light whose normal
/// makes cos_theta with the light direction.
inline double receiver_bias(double constant_bias, double slope_bias, int resolution,
                            double distance, double cos_theta) {
  if (slope_bias == 0.0) {
    return constant_bias;
  }
  const double c = std::abs(cos_theta);
  const double tan_theta =
      c <= 1.0 / kMaxBiasSlope ? kMaxBiasSlope
                               : std::min(kMaxBiasSlope, std::sqrt(std::max(0.0, 1.0 - c * c)) / c);
  const double texel = 2.0 * distance / resolution;
  return constant_bias + slope_bias * texel * tan_theta;
}

/// Cube shadow map around a point light: six 90-degree faces, each texel
/// holding the smallest distance to the light among the points splatted on
/// it, +infinity where nothing landed.
///
/// Two kinds of splat feed it. splat() covers an s x s texel block at the
/// point's own distance; the occlusion test for these is the texel compare
/// d > stored + bias. splat_disc() adds an oriented disc: its texels store the
/// distance along their centre rays, and the disc is also listed in every
/// texel its projection may touch, so occluded() can intersect the receiver's
/// exact ray with it instead of the texel-centre ray. Call finalize() after
/// the last disc and before occluded().
class ShadowMap {
 public:
  struct Texel {
    int face;
    int u;
    int v;
  };
  struct Disc {
    Vec3 center;
    Vec3 normal;
    double radius;
  };

  ShadowMap(const Vec3& light, int resolution, double bias, double slope_bias = 0.0);

  const Vec3& light() const { return light_; }
  int resolution() const { return resolution_; }
  double bias() const { return bias_; }
  double slope_bias() const { return slope_bias_; }
  /// Bias of the texel compare for a receiver at p with unit normal n. Disc
  /// intersections use the constant bias alone: their depth is exact along
  /// the receiver's ray.
  double bias_at(const Vec3& p, const Vec3& n) const;
  /// True when a point splat's texel holds an occluder nearer than
  /// |p - light| - bias_at, or the segment from the light to p crosses a disc
  /// nearer than |p - light| - bias.
  bool occluded(const Vec3& p, const Vec3& n) const;

  /// Distance stored in the texel that the direction `p - light` hits.
  double lookup(const Vec3& p) const;
  /// Splats a point over an s x s texel block, spilling across cube edges.
  void splat(const Vec3& p, int size);
  /// Splats the disc of `radius` centred at p with normal n.
  void splat_disc(const Vec3& p, const Vec3& n, double radius);
  /// Builds the per-texel disc lists.
  void finalize();

  Texel texel_of(const Vec3& direction) const;
  /// Smallest distance stored in texel t: point splats, and discs met by the
  /// texel's centre ray (requires finalize()).
  double stored(const Texel& t) const;
  const std::vector<Disc>& discs() const { return discs_; }
  /// Discs listed for texel t (requires finalize()).
  std::span<const std::uint32_t> candidates(const Texel& t) const;

 private:
  std::size_t index(const Texel& t) const {
    return static_cast<std::size_t>(t.v) * resolution_ + t.u;
  }
  std::size_t global_index(const Texel& t) const {
    return static_cast<std::size_t>(t.face) * resolution_ * resolution_ + index(t);
  }
  void store_min(const Texel& t, double distance);
  /// Distance along unit direction w from the light to the disc, +inf on a miss.
  double disc_hit(const Disc& disc, const Vec3& w) const;

  Vec3 light_;
  int resolution_;
  double bias_;
  double slope_bias_;
  std::array<std::vector<double>, 6> points_;  // point splats only
  std::vector<Disc> discs_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pending_;  // (texel, disc)
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> listed_;
  bool finalized_ = true;
};

/// Per-pixel occluder discs for the shadow map.
///  - radius: scale * 0.5 * hypot(sx, sy), sx and sy being the distances to the
///    nearer valid grid neighbour along each image axis (the nearer one, so a
///    depth jump does not inflate the disc). A lone neighbour farther than
///    kSurfelJumpRatio times the spacing just beyond it counts as missing; a
///    missing axis takes the other axis' spacing. 0 for invalid pixels.
///  - facing_light: set where the two neighbours along an axis differ in
///    spacing by more than kSurfelJumpRatio, or a lone neighbour was dropped;
///    the central-difference normal is unreliable there, so the disc faces
///    the light instead.
struct Surfels {
  Grid<double> radius;
  Mask facing_light;
};
inline constexpr double kSurfelJumpRatio = 3.0;
Surfels make_surfels(const OrientedPointCloud& cloud, double scale);

ShadowMap render_shadow_map(const OrientedPointCloud& cloud, const Vec3& light,
                            const ShadowConfig& cfg);
/// Same, with surfels precomputed by make_surfels (reused across light moves).
/// With surfel_scale > 0 every point becomes a disc of radius
/// max(surfel radius, splat * distance / resolution); with surfel_scale = 0
/// every point is a plain s x s splat.
ShadowMap render_shadow_map(const OrientedPointCloud& cloud, const Surfels& surfels,
                            const Vec3& light, const ShadowConfig& cfg);

/// 1 where the pixel sees the light, 0 where it is occluded. Invalid pixels
/// are reported lit.
Mask shadow_term(const ShadowMap& map, const OrientedPointCloud& cloud);

/// One binary visibility mask per light.
struct ShadowBuffer {
  std::vector<Mask> lit;

  static ShadowBuffer all_lit(int width, int height, std::size_t lights);
};

ShadowBuffer compute_shadows(const Scene& scene, const LightParams& lights,
                             const ShadowConfig& cfg);

/// Unshadowed direct response of one pixel to a unit-intensity light:
/// kd * n_dot_l + ks * n_dot_h^alpha (the specular part only when enabled).
inline double direct_response(double kd, double ks, double shininess, double n_dot_l,
                              double n_dot_h, bool specular) {
  double r = kd * n_dot_l;
  if (specular && ks != 0.0 && n_dot_h > 0.0) {
    r += ks * std::pow(n_dot_h, shininess);
  }
  return r;
}

/// Blinn-Phong shading with the given per-light visibility.
Image shade(const Scene& scene, const LightParams& lights, const ShadowBuffer& shadows,
            ModelKind model = ModelKind::FullShadows);
Image shade(const Scene& scene, const LightParams& lights, std::span<const ShadingFrame> frames,
            const ShadowBuffer& shadows, ModelKind model = ModelKind::FullShadows);

struct RenderResult {
  Image image;
  ShadowBuffer shadows;
};

/// Shadow maps, shadow terms, then shading. Models without shadows use an
/// all-lit buffer.
RenderResult render(const Scene& scene, const LightParams& lights, const ShadowConfig& cfg,
                    ModelKind model = ModelKind::FullShadows);

}  // namespace lightfit
