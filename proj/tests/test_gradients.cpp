#include "helpers.hpp"
#include "oracle.hpp"
#include "lightfit/estimator.hpp"
#include "lightfit/gradients.hpp"
#include "lightfit/presets.hpp"

#include <doctest.h>

using namespace lightfit;
using namespace testing;


TEST_CASE("diffuse and specular Jacobians match central differences on 1000 configurations") {
  SplitMix64 rng(2024);
  int diffuse_checked = 0;
  int specular_checked = 0;
  double worst_d = 0.0;
  double worst_s = 0.0;
  while (diffuse_checked < 1000 || specular_checked < 1000) {
    const Vec3 eye = 2.0 * random_unit(rng);
    const Scene s = random_points_scene(rng, 64, eye);
    const PointLight light{1.5 * random_unit(rng), rng.uniform(0.2, 1.0)};
    const ShadingFrame f = build_shading_frame(s, light);
    const Mask all(64, 1, 1);
    const PixelJacobian gd = grad_diffuse(s, light, f, all);
    const PixelJacobian gs = grad_specular(s, light, f, all);
    for (int i = 0; i < 64; ++i) {
      const Vec3& x = s.cloud.points(i, 0);
      const Vec3& n = s.cloud.normals(i, 0);
      const double step = 1e-5;
      const double ndl = n.dot((light.position - x).normalized());
      const Vec3 h = ((light.position - x).normalized() + (eye - x).normalized()).normalized();
      if (ndl > 1e-3 && diffuse_checked < 1000) {
        const Vec3 fd = central_difference(
            [&](const Vec3& l) { return diffuse_value(x, n, l, s.materials.diffuse(i, 0), light.intensity); },
            light.position, step);
        worst_d = std::max(worst_d, rel_error(gd.d_position(i, 0), fd));
        ++diffuse_checked;
      }
      if (n.dot(h) > 1e-3 && specular_checked < 1000) {
        const Vec3 fd = central_difference(
            [&](const Vec3& l) {
              return specular_value(x, n, eye, l, s.materials.specular(i, 0), light.intensity, 10.0);
            },
            light.position, step);
        worst_s = std::max(worst_s, rel_error(gs.d_position(i, 0), fd));
        ++specular_checked;
      }
    }
  }
  CHECK(worst_d < 1e-4);
  CHECK(worst_s < 1e-4);
}

TEST_CASE("gradient terms vanish where documented") {
  const Scene s = make_scene(constant_depth(8, 8, 2.0), top_camera(8, 8), 1.0, 1.0);
  // Pixel (4, 4) sits under a light straight above it.
  const Vec3 x = s.cloud.points(4, 4);
  const PointLight above{x + Vec3(0, 0, 1), 0.5};
  const ShadingFrame f = build_shading_frame(s, above);
  const Mask all(8, 8, 1);

  SUBCASE("shadowed pixels have zero gradient") {
    Mask lit = all;
    lit(4, 4) = 0;
    CHECK(grad_diffuse(s, above, f, lit).d_position(4, 4).isZero(0.0));
    CHECK(grad_specular(s, above, f, lit).d_position(4, 4).isZero(0.0));
    CHECK(grad_intensity(s, f, lit)(4, 4) == 0.0);
  }
  SUBCASE("fronto-lit pixel is a diffuse stationary point") {
    CHECK(grad_diffuse(s, above, f, all).d_position(4, 4).norm() < 1e-15);
  }
  SUBCASE("k_s = 0 gives zero specular gradient everywhere") {
    Scene matte = s;
    matte.materials.specular = Grid<double>(8, 8, 0.0);
    const PixelJacobian g = grad_specular(matte, PointLight{Vec3(0.3, 0.1, 1.0), 0.5},
                                          build_shading_frame(matte, PointLight{Vec3(0.3, 0.1, 1.0), 0.5}), all);
    for (const Vec3& v : g.d_position.values()) CHECK(v.isZero(0.0));
  }
  SUBCASE("specular peak is a stationary point") {
    // Light mirrored through the camera about the normal at pixel (4, 4).
    const Vec3 eye = s.camera.center();
    const Vec3 to_eye = eye - x;
    const Vec3 mirrored = x + Vec3(-to_eye.x(), -to_eye.y(), to_eye.z());
    const PointLight l{mirrored, 0.5};
    const ShadingFrame fm = build_shading_frame(s, l);
    CHECK(fm.n_dot_h(4, 4) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(grad_specular(s, l, fm, all).d_position(4, 4).norm() < 1e-9);
  }
  SUBCASE("fronto-lit diffuse-only pixel has dI/dI_L = 1") {
    Scene matte = s;
    matte.materials.specular = Grid<double>(8, 8, 0.0);
    CHECK(grad_intensity(matte, f, all)(4, 4) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("intensity derivative is exact") {
  const GeneratedScene g = gen_scene("plane-spheres", 2, 32);
  SplitMix64 rng(9);
  for (int trial = 0; trial < 6; ++trial) {
    PointLight l = g.lights[static_cast<std::size_t>(trial)];
    const RenderResult base = render(g.scene, LightParams{{l}, 0.5}, ShadowConfig{});
    const ShadingFrame f = build_shading_frame(g.scene, l);
    const Grid<double> di = grad_intensity(g.scene, f, base.shadows.lit[0]);
    const double delta = rng.uniform(0.01, 0.5);
    LightParams bumped{{l}, 0.5};
    bumped.lights[0].intensity += delta;
    const Image img = shade(g.scene, bumped, base.shadows);
    for (std::size_t i = 0; i < img.valid.size(); ++i) {
      if (!img.valid[i]) continue;
      CHECK(std::abs(img.intensity[i] - base.image.intensity[i] - delta * di[i]) < 1e-14);
    }
  }
}

TEST_CASE("shadow finite differences") {
  const GeneratedScene g = gen_scene("plane-box", 5, 48);
  const auto [unit, t] = normalize_scene(g.scene);
  const ShadowConfig cfg;
  const double h = 0.03 * bounding_box(unit.cloud).diagonal();
  const double v = 1.0 / (2.0 * h);

  SUBCASE("values are exactly -1/(2h), 0 or 1/(2h) and match two-point evaluations") {
    PointLight l{t.apply(g.lights[0].position), 0.5};
    const PixelJacobian j = grad_shadow_fd(unit, l, cfg, h);
    int boundary = 0;
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 off = Vec3::Zero();
      off[axis] = h;
      const Mask plus = shadow_term(render_shadow_map(unit.cloud, l.position + off, cfg), unit.cloud);
      const Mask minus = shadow_term(render_shadow_map(unit.cloud, l.position - off, cfg), unit.cloud);
      for (std::size_t i = 0; i < j.valid.size(); ++i) {
        if (!j.valid[i]) continue;
        const double d = j.d_position[i][axis];
        CHECK((d == v || d == -v || d == 0.0));
        CHECK(d == (static_cast<int>(plus[i]) - static_cast<int>(minus[i])) * v);
        boundary += d != 0.0 ? 1 : 0;
      }
    }
    CHECK(boundary > 0);
  }
  SUBCASE("unoccluded scene has zero shadow gradient") {
    const Scene flat = make_scene(constant_depth(16, 16, 2.0), top_camera(16, 16));
    const PixelJacobian j = grad_shadow_fd(flat, PointLight{Vec3(0.2, 0.1, 1.0), 0.5}, cfg, 0.01);
    for (const Vec3& d : j.d_position.values()) CHECK(d.isZero(0.0));
  }
  SUBCASE("pixels deep inside a shadow stay at zero") {
    PointLight l{t.apply(g.lights[1].position), 0.5};
    const Mask lit = shadow_term(render_shadow_map(unit.cloud, l.position, cfg), unit.cloud);
    const PixelJacobian j = grad_shadow_fd(unit, l, cfg, h);
    int deep = 0;
    for (int y = 3; y < unit.height() - 3; ++y) {
      for (int x = 3; x < unit.width() - 3; ++x) {
        bool all_dark = true;
        for (int dy = -3; dy <= 3; ++dy)
          for (int dx = -3; dx <= 3; ++dx)
            all_dark = all_dark && unit.cloud.valid(x + dx, y + dy) && !lit(x + dx, y + dy);
        if (!all_dark) continue;
        ++deep;
        CHECK(j.d_position(x, y).isZero(0.0));
      }
    }
    CHECK(deep > 0);
  }
  SUBCASE("non-positive step is rejected") {
    CHECK_THROWS_AS(grad_shadow_fd(unit, PointLight{Vec3(0, 0, 2), 0.5}, cfg, 0.0), PreconditionError);
  }
}

TEST_CASE("Jacobian assembly") {
  const GeneratedScene g = gen_scene("plane-box", 6, 128);
  const auto [unit, t] = normalize_scene(g.scene);
  const ShadowConfig cfg;
  const PointLight l{t.apply(g.lights[2].position), 0.5};
  const ShadingFrame f = build_shading_frame(unit, l);
  const Mask lit = shadow_term(render_shadow_map(unit.cloud, l.position, cfg), unit.cloud);
  const PixelJacobian jd = grad_diffuse(unit, l, f, lit);
  const PixelJacobian js = grad_specular(unit, l, f, lit);
  const Grid<double> direct = unshadowed_direct(unit, l, f);

  SUBCASE("zero shadow derivative reduces to diffuse + specular") {
    PixelJacobian zero = PixelJacobian::zeros(unit.width(), unit.height());
    zero.valid = unit.cloud.valid;
    const PixelJacobian j = assemble_image_jacobian(jd, js, &zero, direct, nullptr);
    for (std::size_t i = 0; i < j.valid.size(); ++i) {
      if (j.valid[i]) CHECK(j.d_position[i] == jd.d_position[i] + js.d_position[i]);
    }
  }
  SUBCASE("fully shadowed pixels carry only the shadow part") {
    const double h = 0.03 * bounding_box(unit.cloud).diagonal();
    const PixelJacobian sh = grad_shadow_fd(unit, l, cfg, h);
    const PixelJacobian j = assemble_image_jacobian(jd, js, &sh, direct, nullptr);
    int seen = 0;
    for (std::size_t i = 0; i < j.valid.size(); ++i) {
      if (!j.valid[i] || lit[i] || sh.d_position[i].isZero(0.0)) continue;
      ++seen;
      CHECK(j.d_position[i] == direct[i] * sh.d_position[i]);
    }
    CHECK(seen > 0);
  }
  SUBCASE("directional derivative matches rendered differences within 10%") {
    // Image sums can nearly cancel for some directions, which inflates the
    // relative error of the shadow part; most directions must pass.
    SplitMix64 rng(4);
    const double eps = 0.03 * bounding_box(unit.cloud).diagonal();
    const PixelJacobian sh = grad_shadow_fd(unit, l, cfg, eps);
    const PixelJacobian j = assemble_image_jacobian(jd, js, &sh, direct, nullptr);
    int passed = 0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
      const Vec3 v = random_unit(rng);
      LightParams plus{{l}, 0.0};
      LightParams minus{{l}, 0.0};
      plus.lights[0].position += eps * v;
      minus.lights[0].position -= eps * v;
      const Image ip = render(unit, plus, cfg).image;
      const Image im = render(unit, minus, cfg).image;
      double analytic = 0.0;
      double numeric = 0.0;
      for (std::size_t i = 0; i < j.valid.size(); ++i) {
        if (!j.valid[i]) continue;
        analytic += j.d_position[i].dot(v);
        numeric += (ip.intensity[i] - im.intensity[i]) / (2.0 * eps);
      }
      passed += std::abs(analytic - numeric) <= 0.1 * std::abs(numeric) ? 1 : 0;
    }
    CHECK(passed >= trials * 4 / 5);
  }
}

TEST_CASE("energy and gradient") {
  const GeneratedScene g = gen_scene("plane-spheres", 8, 32);
  const auto [unit, t] = normalize_scene(g.scene);
  GradientConfig cfg;
  cfg.shadow_step = 0.03 * bounding_box(unit.cloud).diagonal();
  LightParams truth{{PointLight{t.apply(g.lights[0].position), 0.5}}, 0.5};

  SUBCASE("zero at the generating parameters") {
    for (ModelKind m : kAllModels) {
      const Image target = render(unit, truth, cfg.shadow, m).image;
      const EnergyGradient eg = energy_and_gradient(unit, truth, target, m, cfg);
      CHECK(eg.energy < 1e-12);
      CHECK(eg.d_position[0].norm() < 1e-9);
    }
  }
  SUBCASE("constant offset on k lit pixels of a flat diffuse scene") {
    const Scene flat = make_scene(constant_depth(16, 16, 2.0), top_camera(16, 16), 1.0, 0.0);
    const LightParams lp{{PointLight{Vec3(0.1, 0.2, 1.0), 0.5}}, 0.5};
    Image target = render(flat, lp, cfg.shadow, ModelKind::DiffuseAmbient).image;
    int k = 0;
    for (std::size_t i = 0; i < target.valid.size() && k < 37; ++i) {
      if (flat.cloud.valid[i]) {
        target.intensity[i] += 0.1;
        ++k;
      }
    }
    const EnergyGradient eg = energy_and_gradient(flat, lp, target, ModelKind::DiffuseAmbient, cfg);
    CHECK(eg.energy == doctest::Approx(0.01 * k).epsilon(1e-12));
  }
  SUBCASE("models without shadows agree on a scene without occluders") {
    const Scene flat = make_scene(constant_depth(16, 16, 2.0), top_camera(16, 16));
    const LightParams lp{{PointLight{Vec3(0.1, 0.2, 1.0), 0.5}}, 0.5};
    const LightParams off{{PointLight{Vec3(0.3, 0.0, 1.2), 0.5}}, 0.5};
    const Image target = render(flat, lp, cfg.shadow).image;
    const EnergyGradient full = energy_and_gradient(flat, off, target, ModelKind::FullShadows, cfg);
    const EnergyGradient spec = energy_and_gradient(flat, off, target, ModelKind::DiffuseSpecular, cfg);
    CHECK(full.energy == spec.energy);
    CHECK(full.d_position[0] == spec.d_position[0]);
  }
  SUBCASE("the diffuse-ambient model ignores specular reflectance") {
    Scene shiny = unit;
    Scene matte = unit;
    matte.materials.specular = Grid<double>(unit.width(), unit.height(), 0.0);
    shiny.materials.specular = Grid<double>(unit.width(), unit.height(), 3.0);
    LightParams off = truth;
    off.lights[0].position += Vec3(0.05, -0.03, 0.02);
    const Image target = render(unit, truth, cfg.shadow).image;
    const auto a = energy_and_gradient(shiny, off, target, ModelKind::DiffuseAmbient, cfg);
    const auto b = energy_and_gradient(matte, off, target, ModelKind::DiffuseAmbient, cfg);
    CHECK(a.d_position[0] == b.d_position[0]);
  }
  SUBCASE("negative gradient is a descent direction") {
    SplitMix64 rng(99);
    int descents = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
      const PointLight gt{t.apply(g.lights[static_cast<std::size_t>(trial % 6)].position), 0.5};
      const LightParams target_lights{{gt}, 0.5};
      const Image target = render(unit, target_lights, cfg.shadow).image;
      LightParams cur = target_lights;
      cur.lights[0].position += rng.uniform(0.05, 0.2) * random_unit(rng);
      const EnergyGradient eg = energy_and_gradient(unit, cur, target, ModelKind::FullShadows, cfg);
      // The shadow part is a difference quotient over +-h, so probe at a
      // fraction of that scale rather than below the shadow map's resolution.
      LightParams next = cur;
      next.lights[0].position -= 0.25 * cfg.shadow_step * eg.d_position[0].normalized();
      const double e1 = energy_at(unit, next, target, ModelKind::FullShadows, cfg.shadow);
      descents += e1 < eg.energy ? 1 : 0;
    }
    CHECK(descents >= 95);
  }
  SUBCASE("empty overlap is rejected") {
    Image target = render(unit, truth, cfg.shadow).image;
    target.valid = Mask(unit.width(), unit.height(), 0);
    CHECK_THROWS_AS(energy_and_gradient(unit, truth, target, ModelKind::FullShadows, cfg),
                    PreconditionError);
  }
}
