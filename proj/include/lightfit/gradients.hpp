#pragma once

#include "lightfit/renderer.hpp"

namespace lightfit {

/// Per-pixel derivatives of the rendered intensity with respect to one light.
struct PixelJacobian {
  Grid<Vec3> d_position;
  Grid<double> d_intensity;
  Mask valid;

  static PixelJacobian zeros(int width, int height);
  int width() const { return valid.width(); }
  int height() const { return valid.height(); }
};

/// d(diffuse)/d(light position): kd * I_L * S * N^T (Id - wl wl^T) / |L - X|,
/// zero where the diffuse dot is clamped or the pixel is shadowed.
PixelJacobian grad_diffuse(const Scene& scene, const PointLight& light, const ShadingFrame& frame,
                           const Mask& lit);

/// d(specular)/d(light position) through the halfway vector,
/// ks * I_L * S * alpha * (H^T N)^(alpha-1) * N^T dH/dL, with
/// dH/dL = (Id - H H^T) / |wl + wv| * (Id - wl wl^T) / |L - X|.
PixelJacobian grad_specular(const Scene& scene, const PointLight& light,
                            const ShadingFrame& frame, const Mask& lit);

/// dI/dI_L = S * (kd * (N^T wl)+ + ks * (H^T N)+^alpha). Exact, since the
/// model is linear in the light intensity.
Grid<double> grad_intensity(const Scene& scene, const ShadingFrame& frame, const Mask& lit,
                            ModelKind model = ModelKind::FullShadows);

/// Central finite differences of the binary shadow term: six shadow maps at
/// L +- h e_k. Each component is one of -1/(2h), 0, +1/(2h).
PixelJacobian grad_shadow_fd(const Scene& scene, const PointLight& light,
                             const ShadowConfig& cfg, double h);

/// Unshadowed direct light I_L * (kd * (N^T wl)+ + ks * (H^T N)+^alpha),
/// i.e. I_d + I_s before the shadow gate.
Grid<double> unshadowed_direct(const Scene& scene, const PointLight& light,
                               const ShadingFrame& frame,
                               ModelKind model = ModelKind::FullShadows);

/// dI/dL = dI_d/dL + dI_s/dL + (I_d + I_s) * dS/dL. The diffuse and specular
/// parts already carry the current shadow gate. `shadow` may be null for
/// models without shadows; `intensity` may be null when intensity is fixed.
PixelJacobian assemble_image_jacobian(const PixelJacobian& diffuse,
                                      const PixelJacobian& specular,
                                      const PixelJacobian* shadow,
                                      const Grid<double>& direct,
                                      const Grid<double>* intensity);

struct GradientConfig {
  ShadowConfig shadow;
  /// Finite-difference step of the shadow Jacobian, in scene units.
  double shadow_step = 0.01;
};

struct EnergyGradient {
  double energy = 0.0;
  std::vector<Vec3> d_position;
  std::vector<double> d_intensity;
  double d_ambient = 0.0;
  /// Image rendered at the evaluated parameters.
  Image rendered;
  std::size_t pixels = 0;
};

/// E = sum over jointly valid pixels of (I - I*)^2 and its gradient
/// 2 (I - I*)^T dI/dL under the chosen model.
EnergyGradient energy_and_gradient(const Scene& scene, const LightParams& lights,
                                   const Image& target, ModelKind model,
                                   const GradientConfig& cfg);

/// Energy alone; one render, no Jacobians.
double energy_at(const Scene& scene, const LightParams& lights, const Image& target,
                 ModelKind model, const ShadowConfig& cfg);

}  // namespace lightfit
