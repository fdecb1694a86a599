#pragma once

#include "lightfit/gradients.hpp"

#include <cstdint>
#include <optional>

namespace lightfit {

struct GradCheckOptions {
  /// Pixels compared per term (a seeded subset when more are eligible).
  int samples = 1000;
  double step = 1e-5;  // normalized scene units
  double tolerance = 1e-4;
  /// Pixels whose clamped dots fall below this are skipped.
  double boundary = 1e-3;
  /// Gradients smaller than this count as absolute errors.
  double floor = 1e-3;
  std::uint64_t seed = 0;
  /// Directional check of the full Jacobian (full model only).
  double shadow_tolerance = 0.1;
  ShadowConfig shadow;
  double shadow_step_fraction = 0.03;
};

struct TermCheck {
  int checked = 0;
  double max_error = 0.0;
  int worst_x = -1;
  int worst_y = -1;
  Vec3 analytic = Vec3::Zero();
  Vec3 numeric = Vec3::Zero();
  double n_dot_l = 0.0;
  double n_dot_h = 0.0;
};

struct DirectionalCheck {
  Vec3 direction = Vec3::Zero();
  double epsilon = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  TermCheck diffuse;
  TermCheck specular;
  std::optional<DirectionalCheck> shadow;
  bool passed = false;
};

/// Compares the analytic diffuse and specular Jacobians of the first light
/// with central differences on the normalized scene. Errors are
/// |a - f| / max(|a|, |f|, floor). For the full model it also compares the
/// image-sum directional derivative of the assembled Jacobian against a
/// central difference of the rendered image along a seeded direction.
GradCheckReport check_gradients(const Scene& scene, const PointLight& light, ModelKind model,
                                const GradCheckOptions& opts = {});

}  // namespace lightfit
