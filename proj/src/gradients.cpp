#include "lightfit/gradients.hpp"

#include "lightfit/estimator.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

namespace lightfit {

PixelJacobian PixelJacobian::zeros(int width, int height) {
  return {Grid<Vec3>(width, height, Vec3::Zero()), Grid<double>(width, height, 0.0),
          Mask(width, height, 0)};
}

namespace {

void check_frame(const Scene& scene, const ShadingFrame& frame, const Mask& lit) {
  if (frame.width() != scene.width() || frame.height() != scene.height() ||
      !lit.same_shape(frame.valid)) {
    throw PreconditionError("shading frame and shadow mask must match the scene size");
  }
}

Mat3 tangent_projector(const Vec3& dir) { return Mat3::Identity() - dir * dir.transpose(); }

}  // namespace

PixelJacobian grad_diffuse(const Scene& scene, const PointLight& light, const ShadingFrame& frame,
                           const Mask& lit) {
  check_frame(scene, frame, lit);
  PixelJacobian jac = PixelJacobian::zeros(scene.width(), scene.height());
  const auto& n = scene.cloud.normals;
  const auto& kd = scene.materials.diffuse;
  for (std::size_t i = 0; i < jac.valid.size(); ++i) {
    if (!frame.valid[i]) {
      continue;
    }
    jac.valid[i] = 1;
    if (!lit[i] || frame.n_dot_l[i] <= 0.0) {
      continue;
    }
    const Vec3& wl = frame.light_dir[i];
    const Vec3 row = tangent_projector(wl).transpose() * n[i] / frame.distance[i];
    jac.d_position[i] = kd[i] * light.intensity * row;
  }
  return jac;
}

PixelJacobian grad_specular(const Scene& scene, const PointLight& light,
                            const ShadingFrame& frame, const Mask& lit) {
  check_frame(scene, frame, lit);
  PixelJacobian jac = PixelJacobian::zeros(scene.width(), scene.height());
  const auto& n = scene.cloud.normals;
  const auto& ks = scene.materials.specular;
  const double alpha = scene.materials.shininess;
  for (std::size_t i = 0; i < jac.valid.size(); ++i) {
    if (!frame.valid[i]) {
      continue;
    }
    jac.valid[i] = 1;
    if (!lit[i] || ks[i] == 0.0 || frame.n_dot_h[i] <= 0.0 || frame.half_norm[i] <= 1e-12) {
      continue;
    }
    const Mat3 dh_dl = tangent_projector(frame.halfway[i]) / frame.half_norm[i] *
                       tangent_projector(frame.light_dir[i]) / frame.distance[i];
    const double lobe = alpha * std::pow(frame.n_dot_h[i], alpha - 1.0);
    jac.d_position[i] = ks[i] * light.intensity * lobe * (dh_dl.transpose() * n[i]);
  }
  return jac;
}

Grid<double> grad_intensity(const Scene& scene, const ShadingFrame& frame, const Mask& lit,
                            ModelKind model) {
  check_frame(scene, frame, lit);
  Grid<double> out(scene.width(), scene.height(), 0.0);
  const auto& mat = scene.materials;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (frame.valid[i] && lit[i]) {
      out[i] = direct_response(mat.diffuse[i], mat.specular[i], mat.shininess, frame.n_dot_l[i],
                               frame.n_dot_h[i], has_specular(model));
    }
  }
  return out;
}

Grid<double> unshadowed_direct(const Scene& scene, const PointLight& light,
                               const ShadingFrame& frame, ModelKind model) {
  const Mask all(scene.width(), scene.height(), 1);
  Grid<double> out = grad_intensity(scene, frame, all, model);
  for (auto& v : out.values()) {
    v *= light.intensity;
  }
  return out;
}

PixelJacobian grad_shadow_fd(const Scene& scene, const PointLight& light,
                             const ShadowConfig& cfg, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw PreconditionError(fmt::format("shadow finite-difference step must be > 0 (got {})", h));
  }
  const int w = scene.width();
  const int ht = scene.height();
  PixelJacobian jac = PixelJacobian::zeros(w, ht);
  jac.valid = scene.cloud.valid;
  const double inv = 1.0 / (2.0 * h);
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 offset = Vec3::Zero();
    offset[axis] = h;
    const Mask plus =
        shadow_term(render_shadow_map(scene.cloud, light.position + offset, cfg), scene.cloud);
    const Mask minus =
        shadow_term(render_shadow_map(scene.cloud, light.position - offset, cfg), scene.cloud);
    for (std::size_t i = 0; i < jac.valid.size(); ++i) {
      if (jac.valid[i]) {
        jac.d_position[i][axis] = (static_cast<int>(plus[i]) - static_cast<int>(minus[i])) * inv;
      }
    }
  }
  return jac;
}

PixelJacobian assemble_image_jacobian(const PixelJacobian& diffuse,
                                      const PixelJacobian& specular,
                                      const PixelJacobian* shadow,
                                      const Grid<double>& direct,
                                      const Grid<double>* intensity) {
  const auto same = [&](const auto& g) { return diffuse.valid.same_shape(g); };
  if (!same(specular.valid) || !same(direct) || (shadow && !same(shadow->valid)) ||
      (intensity && !same(*intensity))) {
    throw PreconditionError("Jacobian parts differ in dimensions");
  }
  PixelJacobian out = PixelJacobian::zeros(diffuse.width(), diffuse.height());
  for (std::size_t i = 0; i < out.valid.size(); ++i) {
    if (!diffuse.valid[i]) {
      continue;
    }
    out.valid[i] = 1;
    Vec3 d = diffuse.d_position[i] + specular.d_position[i];
    if (shadow) {
      d += direct[i] * shadow->d_position[i];
    }
    out.d_position[i] = d;
    if (intensity) {
      out.d_intensity[i] = (*intensity)[i];
    }
  }
  return out;
}

EnergyGradient energy_and_gradient(const Scene& scene, const LightParams& lights,
                                   const Image& target, ModelKind model,
                                   const GradientConfig& cfg) {
  if (target.width() != scene.width() || target.height() != scene.height()) {
    throw PreconditionError(fmt::format("target is {}x{} but the scene is {}x{}", target.width(),
                                        target.height(), scene.width(), scene.height()));
  }
  lights.validate();
  const int w = scene.width();
  const int h = scene.height();

  std::vector<ShadingFrame> frames;
  frames.reserve(lights.lights.size());
  for (const auto& light : lights.lights) {
    frames.push_back(build_shading_frame(scene, light));
  }
  ShadowBuffer shadows = has_shadows(model)
                             ? compute_shadows(scene, lights, cfg.shadow)
                             : ShadowBuffer::all_lit(w, h, lights.lights.size());

  EnergyGradient out;
  out.rendered = shade(scene, lights, frames, shadows, model);

  Grid<double> residual(w, h, 0.0);
  Mask overlap(w, h, 0);
  for (std::size_t i = 0; i < residual.size(); ++i) {
    if (out.rendered.valid[i] && target.valid[i]) {
      overlap[i] = 1;
      residual[i] = out.rendered.intensity[i] - target.intensity[i];
      ++out.pixels;
    }
  }
  if (out.pixels == 0) {
    throw PreconditionError("rendered image and target share no valid pixel");
  }
  out.energy = row_ordered_reduce(w, h, 0.0, [&](int x, int y) {
    const double r = residual(x, y);
    return r * r;
  });
  out.d_ambient = row_ordered_reduce(w, h, 0.0, [&](int x, int y) {
    return 2.0 * residual(x, y) * scene.materials.diffuse(x, y);
  });

  for (std::size_t l = 0; l < lights.lights.size(); ++l) {
    const PointLight& light = lights.lights[l];
    const ShadingFrame& frame = frames[l];
    const Mask& lit = shadows.lit[l];
    const PixelJacobian diffuse = grad_diffuse(scene, light, frame, lit);
    const PixelJacobian specular = has_specular(model)
                                       ? grad_specular(scene, light, frame, lit)
                                       : PixelJacobian{Grid<Vec3>(w, h, Vec3::Zero()),
                                                       Grid<double>(w, h, 0.0), diffuse.valid};
    const Grid<double> direct = unshadowed_direct(scene, light, frame, model);
    const Grid<double> d_intensity = grad_intensity(scene, frame, lit, model);
    PixelJacobian shadow;
    if (has_shadows(model)) {
      shadow = grad_shadow_fd(scene, light, cfg.shadow, cfg.shadow_step);
    }
    const PixelJacobian jac = assemble_image_jacobian(
        diffuse, specular, has_shadows(model) ? &shadow : nullptr, direct, &d_intensity);

    using Vec4 = Eigen::Vector4d;
    const Vec4 g = row_ordered_reduce(w, h, Vec4(Vec4::Zero()), [&](int x, int y) -> Vec4 {
      const std::size_t i = residual.index(x, y);
      if (!overlap[i] || !jac.valid[i]) {
        return Vec4::Zero();
      }
      const double r2 = 2.0 * residual[i];
      return Vec4(r2 * jac.d_position[i].x(), r2 * jac.d_position[i].y(),
                  r2 * jac.d_position[i].z(), r2 * jac.d_intensity[i]);
    });
    out.d_position.push_back(g.head<3>());
    out.d_intensity.push_back(g[3]);
  }
  return out;
}

double energy_at(const Scene& scene, const LightParams& lights, const Image& target,
                 ModelKind model, const ShadowConfig& cfg) {
  return energy(render(scene, lights, cfg, model).image, target);
}

}  // namespace lightfit
