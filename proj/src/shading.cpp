#include "lightfit/renderer.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace lightfit {

void LightParams::validate() const {
  if (!(std::isfinite(ambient) && ambient >= 0.0)) {
    throw PreconditionError("light invariant violated: ambient must be finite and >= 0");
  }
  for (std::size_t i = 0; i < lights.size(); ++i) {
    if (!lights[i].position.allFinite()) {
      throw PreconditionError(fmt::format("light {} position is not finite", i));
    }
    if (!(std::isfinite(lights[i].intensity) && lights[i].intensity >= 0.0)) {
      throw PreconditionError(
          fmt::format("light invariant violated: intensity of light {} must be finite and >= 0",
                      i));
    }
  }
}

std::string_view to_string(ModelKind m) {
  switch (m) {
    case ModelKind::DiffuseAmbient:
      return "diffuse";
    case ModelKind::DiffuseSpecular:
      return "specular";
    case ModelKind::FullShadows:
      return "full";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "diffuse" || name == "DIFFUSE_AMBIENT" || name == "boom") {
    return ModelKind::DiffuseAmbient;
  }
  if (name == "specular" || name == "DIFFUSE_SPECULAR" || name == "neverova") {
    return ModelKind::DiffuseSpecular;
  }
  if (name == "full" || name == "FULL_SHADOWS" || name == "shadows") {
    return ModelKind::FullShadows;
  }
  throw PreconditionError(
      fmt::format("unknown model '{}' (expected diffuse, specular or full)", name));
}

ShadingFrame build_shading_frame(const Scene& scene, const PointLight& light) {
  const int w = scene.width();
  const int h = scene.height();
  ShadingFrame f{Grid<Vec3>(w, h, Vec3::Zero()),
                 Grid<Vec3>(w, h, Vec3::Zero()),
                 Grid<Vec3>(w, h, Vec3::Zero()),
                 Grid<double>(w, h, 0.0),
                 Grid<double>(w, h, 0.0),
                 Grid<double>(w, h, 0.0),
                 Grid<double>(w, h, 0.0),
                 Mask(w, h, 0)};
  const Vec3 eye = scene.camera.center();
  const auto& cloud = scene.cloud;
  parallel_for(static_cast<std::size_t>(w) * h, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (!cloud.valid[i]) {
        continue;
      }
      const Vec3& x = cloud.points[i];
      const Vec3& n = cloud.normals[i];
      const Vec3 to_light = light.position - x;
      const Vec3 to_eye = eye - x;
      const double dl = to_light.norm();
      const double dv = to_eye.norm();
      if (dl < kCoincidenceEpsilon || dv < kCoincidenceEpsilon) {
        continue;
      }
      const Vec3 wl = to_light / dl;
      const Vec3 wv = to_eye / dv;
      const Vec3 sum = wl + wv;
      const double hn = sum.norm();
      f.light_dir[i] = wl;
      f.view_dir[i] = wv;
      f.distance[i] = dl;
      f.half_norm[i] = hn;
      f.n_dot_l[i] = std::clamp(n.dot(wl), 0.0, 1.0);
      // Light exactly opposite the viewer leaves the halfway vector undefined;
      // the specular term is zero there.
      if (hn > 1e-12) {
        f.halfway[i] = sum / hn;
        f.n_dot_h[i] = std::clamp(n.dot(f.halfway[i]), 0.0, 1.0);
      }
      f.valid[i] = 1;
    }
  });
  return f;
}

ShadowBuffer ShadowBuffer::all_lit(int width, int height, std::size_t lights) {
  return ShadowBuffer{std::vector<Mask>(lights, Mask(width, height, 1))};
}

ShadowBuffer compute_shadows(const Scene& scene, const LightParams& lights,
                             const ShadowConfig& cfg) {
  ShadowBuffer out;
  out.lit.reserve(lights.lights.size());
  for (const auto& light : lights.lights) {
    out.lit.push_back(shadow_term(render_shadow_map(scene.cloud, light.position, cfg), scene.cloud));
  }
  return out;
}

Image shade(const Scene& scene, const LightParams& lights, std::span<const ShadingFrame> frames,
            const ShadowBuffer& shadows, ModelKind model) {
  if (frames.size() != lights.lights.size() || shadows.lit.size() != lights.lights.size()) {
    throw PreconditionError("shade: frames and shadows must match the light count");
  }
  const int w = scene.width();
  const int h = scene.height();
  Image img(w, h, 0.0, 0);
  const auto& mat = scene.materials;
  const bool specular = has_specular(model);
  parallel_for(static_cast<std::size_t>(w) * h, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (!scene.cloud.valid[i]) {
        continue;
      }
      double value = mat.diffuse[i] * lights.ambient;
      for (std::size_t l = 0; l < lights.lights.size(); ++l) {
        const ShadingFrame& f = frames[l];
        if (!f.valid[i] || !shadows.lit[l][i]) {
          continue;
        }
        value += lights.lights[l].intensity *
                 direct_response(mat.diffuse[i], mat.specular[i], mat.shininess, f.n_dot_l[i],
                                 f.n_dot_h[i], specular);
      }
      img.intensity[i] = std::max(0.0, value);
      img.valid[i] = 1;
    }
  });
  return img;
}

Image shade(const Scene& scene, const LightParams& lights, const ShadowBuffer& shadows,
            ModelKind model) {
  std::vector<ShadingFrame> frames;
  frames.reserve(lights.lights.size());
  for (const auto& light : lights.lights) {
    frames.push_back(build_shading_frame(scene, light));
  }
  return shade(scene, lights, frames, shadows, model);
}

RenderResult render(const Scene& scene, const LightParams& lights, const ShadowConfig& cfg,
                    ModelKind model) {
  lights.validate();
  ShadowBuffer shadows = has_shadows(model)
                             ? compute_shadows(scene, lights, cfg)
                             : ShadowBuffer::all_lit(scene.width(), scene.height(),
                                                     lights.lights.size());
  Image image = shade(scene, lights, shadows, model);
  return {std::move(image), std::move(shadows)};
}

}  // namespace lightfit
