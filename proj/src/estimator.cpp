#include "lightfit/estimator.hpp"

#include <fmt/format.h>

#include <cmath>

namespace lightfit {

void OptimizerOptions::validate() const {
  if (!(rate > 0.0)) {
    throw PreconditionError("optimizer rate must be > 0");
  }
  if (!(step_scale > 0.0)) {
    throw PreconditionError("optimizer step scale must be > 0");
  }
  if (!(tolerance > 0.0)) {
    throw PreconditionError("optimizer tolerance must be > 0");
  }
  if (max_iterations < 1) {
    throw PreconditionError("optimizer max iterations must be >= 1");
  }
  if (!(shadow_step_fraction > 0.0)) {
    throw PreconditionError("shadow finite-difference step must be > 0");
  }
  shadow.validate();
}

std::string_view to_string(Termination t) {
  return t == Termination::Converged ? "converged" : "max-iter";
}

double energy(const Image& image, const Image& target) {
  if (image.width() != target.width() || image.height() != target.height()) {
    throw PreconditionError(fmt::format("energy: images are {}x{} and {}x{}", image.width(),
                                        image.height(), target.width(), target.height()));
  }
  std::size_t overlap = 0;
  for (std::size_t i = 0; i < image.valid.size(); ++i) {
    overlap += (image.valid[i] && target.valid[i]) ? 1 : 0;
  }
  if (overlap == 0) {
    throw PreconditionError("energy: images share no valid pixel");
  }
  return row_ordered_reduce(image.width(), image.height(), 0.0, [&](int x, int y) {
    if (!image.valid(x, y) || !target.valid(x, y)) {
      return 0.0;
    }
    const double r = image.intensity(x, y) - target.intensity(x, y);
    return r * r;
  });
}

Vec3 default_initial_position(const Scene& scene) {
  const auto [normalized, t] = normalize_scene(scene);
  const Vec3 init = normalized.camera.center() + normalized.camera.up();
  return t.invert(init);
}

namespace {

TraceEntry make_entry(int iteration, const EnergyGradient& eg, const LightParams& normalized,
                      const SimilarityTransform& t, const OptimizerOptions& opts) {
  TraceEntry e;
  e.iteration = iteration;
  e.energy = eg.energy;
  e.ambient = normalized.ambient;
  double sq = 0.0;
  for (std::size_t l = 0; l < normalized.lights.size(); ++l) {
    e.positions.push_back(t.invert(normalized.lights[l].position));
    e.intensities.push_back(normalized.lights[l].intensity);
    e.d_position.push_back(eg.d_position[l]);
    e.d_intensity.push_back(eg.d_intensity[l]);
    sq += eg.d_position[l].squaredNorm();
    if (opts.optimize_intensity) {
      sq += eg.d_intensity[l] * eg.d_intensity[l];
    }
  }
  e.d_ambient = eg.d_ambient;
  if (opts.optimize_ambient) {
    sq += eg.d_ambient * eg.d_ambient;
  }
  e.gradient_norm = std::sqrt(sq);
  return e;
}

}  // namespace

EstimateResult estimate_light(const Scene& scene, const Image& target, const LightParams& init,
                              ModelKind model, const OptimizerOptions& opts) {
  opts.validate();
  scene.validate();
  init.validate();
  if (init.lights.empty()) {
    throw PreconditionError("estimation needs at least one light");
  }
  if (target.width() != scene.width() || target.height() != scene.height()) {
    throw PreconditionError(fmt::format("target is {}x{} but the scene is {}x{}", target.width(),
                                        target.height(), scene.width(), scene.height()));
  }
  for (std::size_t i = 0; i < scene.cloud.points.size(); ++i) {
    if (!scene.cloud.valid[i]) {
      continue;
    }
    for (const auto& light : init.lights) {
      if ((scene.cloud.points[i] - light.position).norm() < 1e-6) {
        throw PreconditionError(fmt::format(
            "initial light ({}, {}, {}) lies on the surface (scene point {})",
            light.position.x(), light.position.y(), light.position.z(), i));
      }
    }
  }

  const auto [unit, transform] = normalize_scene(scene);
  GradientConfig gcfg;
  gcfg.shadow = opts.shadow;
  gcfg.shadow_step = opts.shadow_step_fraction * bounding_box(unit.cloud).diagonal();

  LightParams current = init;
  for (auto& light : current.lights) {
    light.position = transform.apply(light.position);
  }

  EstimateResult result;
  result.transform = transform;

  EnergyGradient eg = energy_and_gradient(unit, current, target, model, gcfg);
  if (!std::isfinite(eg.energy)) {
    throw DivergenceError("energy is not finite at the initial estimate", 0);
  }
  result.trace.push_back(make_entry(0, eg, current, transform, opts));

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double previous = eg.energy;
    const double step = opts.rate * opts.step_scale / static_cast<double>(eg.pixels);
    for (std::size_t l = 0; l < current.lights.size(); ++l) {
      current.lights[l].position -= step * eg.d_position[l];
      if (opts.optimize_intensity) {
        current.lights[l].intensity =
            std::max(0.0, current.lights[l].intensity - step * eg.d_intensity[l]);
      }
    }
    if (opts.optimize_ambient) {
      current.ambient = std::max(0.0, current.ambient - step * eg.d_ambient);
    }
    for (const auto& light : current.lights) {
      if (!light.position.allFinite()) {
        throw DivergenceError(fmt::format("light position diverged at iteration {}", it), it);
      }
    }

    eg = energy_and_gradient(unit, current, target, model, gcfg);
    if (!std::isfinite(eg.energy)) {
      throw DivergenceError(fmt::format("energy is not finite at iteration {}", it), it);
    }
    result.trace.push_back(make_entry(it, eg, current, transform, opts));
    result.iterations = it;

    if (previous <= opts.exact_fit_energy ||
        std::abs(eg.energy - previous) / previous < opts.tolerance) {
      result.reason = Termination::Converged;
      break;
    }
  }

  result.normalized_lights = current;
  result.lights = current;
  for (auto& light : result.lights.lights) {
    light.position = transform.invert(light.position);
  }
  return result;
}

}  // namespace lightfit
