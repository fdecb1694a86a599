#include "lightfit/gradcheck.hpp"

#include "lightfit/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lightfit {

namespace {

double relative_error(const Vec3& a, const Vec3& f, double floor) {
  return (a - f).norm() / std::max({a.norm(), f.norm(), floor});
}

// Picks up to `samples` indices from `eligible`, seeded.
std::vector<std::size_t> sample(std::vector<std::size_t> eligible, int samples,
                                std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = eligible.size(); i > 1; --i) {
    std::swap(eligible[i - 1], eligible[rng.next() % i]);
  }
  if (eligible.size() > static_cast<std::size_t>(samples)) {
    eligible.resize(static_cast<std::size_t>(samples));
  }
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

}  // namespace

GradCheckReport check_gradients(const Scene& scene, const PointLight& light, ModelKind model,
                                const GradCheckOptions& opts) {
  if (!(opts.step > 0.0) || opts.samples < 1) {
    throw PreconditionError("gradient check needs step > 0 and samples >= 1");
  }
  const auto [unit, transform] = normalize_scene(scene);
  for (std::size_t i = 0; i < scene.cloud.points.size(); ++i) {
    if (scene.cloud.valid[i] && (scene.cloud.points[i] - light.position).norm() < 1e-9) {
      throw PreconditionError("light coincides with a scene point");
    }
  }
  PointLight l = light;
  l.position = transform.apply(light.position);
  const int w = unit.width();
  const int h = unit.height();
  const Mask all(w, h, 1);
  const ShadingFrame frame = build_shading_frame(unit, l);
  const PixelJacobian gd = grad_diffuse(unit, l, frame, all);
  const PixelJacobian gs = grad_specular(unit, l, frame, all);

  std::array<std::array<ShadingFrame, 2>, 3> moved;
  for (int k = 0; k < 3; ++k) {
    for (int s = 0; s < 2; ++s) {
      PointLight p = l;
      p.position[k] += (s == 0 ? 1.0 : -1.0) * opts.step;
      moved[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)] =
          build_shading_frame(unit, p);
    }
  }
  const auto& kd = unit.materials.diffuse;
  const auto& ks = unit.materials.specular;
  const double alpha = unit.materials.shininess;
  auto stable = [&](std::size_t i, auto dot) {
    if (!frame.valid[i] || dot(frame, i) <= opts.boundary) {
      return false;
    }
    for (const auto& pair : moved) {
      for (const auto& f : pair) {
        if (!f.valid[i] || dot(f, i) <= opts.boundary) {
          return false;
        }
      }
    }
    return true;
  };
  auto ndl = [](const ShadingFrame& f, std::size_t i) { return f.n_dot_l[i]; };
  auto ndh = [](const ShadingFrame& f, std::size_t i) { return f.n_dot_h[i]; };

  auto run = [&](const PixelJacobian& jac, auto dot, auto value, std::uint64_t salt) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < frame.valid.size(); ++i) {
      if (stable(i, dot)) {
        eligible.push_back(i);
      }
    }
    TermCheck t;
    for (std::size_t i : sample(std::move(eligible), opts.samples, hash_combine(opts.seed, 7, static_cast<std::int64_t>(salt)))) {
      Vec3 numeric;
      for (std::size_t k = 0; k < 3; ++k) {
        numeric[static_cast<int>(k)] =
            (value(moved[k][0], i) - value(moved[k][1], i)) / (2.0 * opts.step);
      }
      const double e = relative_error(jac.d_position[i], numeric, opts.floor);
      ++t.checked;
      if (e >= t.max_error) {
        t.max_error = e;
        t.worst_x = static_cast<int>(i % static_cast<std::size_t>(w));
        t.worst_y = static_cast<int>(i / static_cast<std::size_t>(w));
        t.analytic = jac.d_position[i];
        t.numeric = numeric;
        t.n_dot_l = frame.n_dot_l[i];
        t.n_dot_h = frame.n_dot_h[i];
      }
    }
    return t;
  };

  GradCheckReport report;
  report.diffuse = run(
      gd, ndl, [&](const ShadingFrame& f, std::size_t i) { return kd[i] * l.intensity * f.n_dot_l[i]; },
      1);
  report.specular = run(
      gs, ndh,
      [&](const ShadingFrame& f, std::size_t i) {
        return ks[i] * l.intensity * std::pow(f.n_dot_h[i], alpha);
      },
      2);
  report.passed = report.diffuse.max_error < opts.tolerance &&
                  report.specular.max_error < opts.tolerance;

  if (has_shadows(model)) {
    DirectionalCheck d;
    SplitMix64 rng(hash_combine(opts.seed, 11, 0));
    do {
      d.direction = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    } while (d.direction.norm() < 1e-3 || d.direction.norm() > 1.0);
    d.direction.normalize();
    d.epsilon = opts.shadow_step_fraction * bounding_box(unit.cloud).diagonal();

    const Mask lit = shadow_term(render_shadow_map(unit.cloud, l.position, opts.shadow), unit.cloud);
    const PixelJacobian sd = grad_diffuse(unit, l, frame, lit);
    const PixelJacobian ss = grad_specular(unit, l, frame, lit);
    const PixelJacobian sh = grad_shadow_fd(unit, l, opts.shadow, d.epsilon);
    const Grid<double> direct = unshadowed_direct(unit, l, frame, model);
    const PixelJacobian jac = assemble_image_jacobian(sd, ss, &sh, direct, nullptr);

    LightParams plus{{l}, 0.0};
    LightParams minus{{l}, 0.0};
    plus.lights[0].position += d.epsilon * d.direction;
    minus.lights[0].position -= d.epsilon * d.direction;
    const Image ip = render(unit, plus, opts.shadow, model).image;
    const Image im = render(unit, minus, opts.shadow, model).image;
    d.analytic = row_ordered_reduce(w, h, 0.0, [&](int x, int y) {
      return jac.valid(x, y) && ip.valid(x, y) && im.valid(x, y)
                 ? jac.d_position(x, y).dot(d.direction)
                 : 0.0;
    });
    d.numeric = row_ordered_reduce(w, h, 0.0, [&](int x, int y) {
      return jac.valid(x, y) && ip.valid(x, y) && im.valid(x, y)
                 ? (ip.intensity(x, y) - im.intensity(x, y)) / (2.0 * d.epsilon)
                 : 0.0;
    });
    d.error = std::abs(d.analytic - d.numeric) /
              std::max({std::abs(d.analytic), std::abs(d.numeric), opts.floor});
    d.passed = d.error <= opts.shadow_tolerance;
    report.shadow = d;
  }
  return report;
}

}  // namespace lightfit
