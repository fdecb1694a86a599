#include "helpers.hpp"
#include "oracle.hpp"
#include "lightfit/presets.hpp"

#include <doctest.h>

using namespace lightfit;
using namespace testing;

namespace {

// One valid point at the origin with normal +z, camera at (0, 0, cam_height).
Scene single_point_scene(double cam_height = 1.0, double kd = 1.0, double ks = 1.0) {
  Scene s;
  s.cloud = OrientedPointCloud{Grid<Vec3>(1, 1, Vec3::Zero()), Grid<Vec3>(1, 1, Vec3(0, 0, 1)),
                               Mask(1, 1, 1)};
  s.camera = top_camera(1, 1, cam_height);
  s.materials = MaterialMaps::uniform(1, 1, kd, ks, 10.0);
  return s;
}

Scene ground_box_scene(int n, double box_half) {
  const Camera cam = oblique_camera(n, n);
  return make_scene(ray_traced_depth(cam, box_half), cam);
}

}  // namespace

TEST_CASE("shading frame: coincident light and view directions") {
  const Scene s = single_point_scene(1.0);
  const ShadingFrame f = build_shading_frame(s, PointLight{Vec3(0, 0, 1), 0.5});
  REQUIRE(f.valid(0, 0));
  CHECK((f.light_dir(0, 0) - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK((f.view_dir(0, 0) - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK((f.halfway(0, 0) - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK(f.n_dot_l(0, 0) == 1.0);
  CHECK(f.n_dot_h(0, 0) == 1.0);
  CHECK(f.distance(0, 0) == 1.0);
}

TEST_CASE("shading frame: light behind the surface clamps the diffuse dot") {
  const Scene s = single_point_scene(1.0);
  const ShadingFrame f = build_shading_frame(s, PointLight{Vec3(0.3, 0, -1), 0.5});
  CHECK(f.n_dot_l(0, 0) == 0.0);
  CHECK(f.n_dot_h(0, 0) >= 0.0);
}

TEST_CASE("shading frame: points at the light or camera are invalid") {
  const Scene s = single_point_scene(1.0);
  CHECK_FALSE(build_shading_frame(s, PointLight{Vec3(0, 0, 1e-12), 0.5}).valid(0, 0));
}

TEST_CASE("property: H bisects the light and view directions") {
  SplitMix64 rng(11);
  const Scene s = ground_box_scene(24, 0.3);
  for (int trial = 0; trial < 40; ++trial) {
    const Vec3 light(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 3));
    const ShadingFrame f = build_shading_frame(s, PointLight{light, 0.5});
    for (std::size_t i = 0; i < f.valid.size(); ++i) {
      if (!f.valid[i]) continue;
      CHECK(std::abs(f.light_dir[i].norm() - 1.0) < 1e-12);
      CHECK(std::abs(f.halfway[i].norm() - 1.0) < 1e-12);
      CHECK(std::abs(angle_between(f.halfway[i], f.light_dir[i]) -
                     angle_between(f.halfway[i], f.view_dir[i])) < 1e-6);
      CHECK(f.n_dot_l[i] >= 0.0);
      CHECK(f.n_dot_l[i] <= 1.0);
      CHECK(f.n_dot_h[i] >= 0.0);
      CHECK(f.n_dot_h[i] <= 1.0);
    }
  }
}

TEST_CASE("shadow map: empty map leaves every point lit") {
  ShadowMap map(Vec3::Zero(), 32, 0.01);
  map.finalize();
  CHECK(std::isinf(map.lookup(Vec3(1, 2, 3))));
  CHECK_FALSE(map.occluded(Vec3(1, 2, 3), Vec3(0, 0, 1)));
}

TEST_CASE("shadow map: a single splat fills its s x s footprint with its distance") {
  ShadowMap map(Vec3::Zero(), 64, 0.0);
  const Vec3 p(0.1, 0.05, 2.0);  // +z face, away from the edges
  map.splat(p, 3);
  map.finalize();
  const double d = p.norm();
  const ShadowMap::Texel c = map.texel_of(p);
  for (int dv = -1; dv <= 1; ++dv) {
    for (int du = -1; du <= 1; ++du) {
      CHECK(map.stored({c.face, c.u + du, c.v + dv}) == d);
    }
  }
  CHECK(std::isinf(map.stored({c.face, c.u + 2, c.v})));
  CHECK(std::isinf(map.stored({c.face, c.u, c.v - 2})));
  CHECK(map.lookup(p) == d);
}

TEST_CASE("shadow map: splats spill across cube edges") {
  ShadowMap map(Vec3::Zero(), 32, 0.0);
  const Vec3 p(1.0, 0.0, 0.9999);  // just on the +x side of the +x/+z edge
  map.splat(p, 3);
  map.finalize();
  const ShadowMap::Texel own = map.texel_of(p);
  const ShadowMap::Texel other = map.texel_of(Vec3(0.9999, 0.0, 1.0));
  CHECK(own.face != other.face);
  CHECK(map.stored(other) == p.norm());
}

TEST_CASE("shadow map: stored distances are the minimum regardless of order") {
  const Vec3 a(0.0, 0.0, 1.0);
  const Vec3 b(0.0, 0.0, 2.0);
  ShadowMap m1(Vec3::Zero(), 32, 0.0);
  ShadowMap m2(Vec3::Zero(), 32, 0.0);
  m1.splat(a, 3);
  m1.splat(b, 3);
  m2.splat(b, 3);
  m2.splat(a, 3);
  m1.finalize();
  m2.finalize();
  CHECK(m1.lookup(b) == 1.0);
  CHECK(m2.lookup(b) == 1.0);
  for (const auto& [u, v] : {std::pair{0.0, 0.0}, std::pair{0.03, -0.02}}) {
    CHECK(m1.lookup(Vec3(u, v, 1)) == m2.lookup(Vec3(u, v, 1)));
  }
}

TEST_CASE("shadow term: a point does not shadow itself") {
  ShadowMap map(Vec3::Zero(), 64, 0.01);
  const Vec3 p(0.2, -0.1, 1.5);
  map.splat(p, 3);
  map.finalize();
  CHECK_FALSE(map.occluded(p, (-p).normalized()));
  CHECK(map.occluded(2.0 * p, (-p).normalized()));
}

TEST_CASE("shadow term: stored +inf everywhere gives S = 1") {
  const Scene s = ground_box_scene(16, 0.0);
  ShadowMap map(Vec3(0, 0, 5), 32, 0.01);
  map.finalize();
  const Mask lit = shadow_term(map, s.cloud);
  for (auto v : lit.values()) CHECK(v == 1);
}

TEST_CASE("shadow map rejects a light on a scene point") {
  const Scene s = ground_box_scene(16, 0.0);
  std::size_t i = 0;
  while (!s.cloud.valid[i]) ++i;
  CHECK_THROWS_AS(render_shadow_map(s.cloud, s.cloud.points[i], ShadowConfig{}), PreconditionError);
  ShadowConfig bad;
  bad.resolution = 8;
  CHECK_THROWS_AS(render_shadow_map(s.cloud, Vec3(0, 0, 5), bad), PreconditionError);
}

TEST_CASE("two parallel planes: the upper plane shadows the lower one like the oracle") {
  // Two stacked planes seen from above through a 2-row-wide depth step: the
  // upper plane covers the left half of the image.
  const int n = 64;
  const Camera cam = top_camera(n, n, 3.0, 40.0);
  DepthMap d = constant_depth(n, n, 3.0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n / 2; ++x) d.depth(x, y) = 2.5;
  }
  Scene s = make_scene(d, cam);
  const Vec3 light(-0.6, 0.1, 4.0);  // up and to the left: the shadow falls to the right
  const ShadowConfig cfg;
  const Mask lit = shadow_term(render_shadow_map(s.cloud, light, cfg), s.cloud);
  const Mask oracle = brute_force_lit(s.cloud, light, cfg);
  CHECK(agreement(lit, oracle, s.cloud.valid) >= 0.99);
  int shadowed_lower = 0;
  int shadowed_upper = 0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (!s.cloud.valid(x, y) || lit(x, y)) continue;
      (x < n / 2 ? shadowed_upper : shadowed_lower)++;
    }
  }
  CHECK(shadowed_lower > 0);
  CHECK(shadowed_upper == 0);
}

TEST_CASE("plane occluder between light and ground matches the oracle") {
  const Scene s = ground_box_scene(64, 0.35);
  const ShadowConfig cfg;
  for (const Vec3& light : {Vec3(0.2, 0.3, 2.5), Vec3(-1.5, 0.4, 1.2)}) {
    const Mask lit = shadow_term(render_shadow_map(s.cloud, light, cfg), s.cloud);
    const Mask oracle = brute_force_lit(s.cloud, light, cfg);
    CHECK(agreement(lit, oracle, s.cloud.valid) >= 0.99);
  }
}

TEST_CASE("ground + box: the shadow falls on the side away from the light") {
  const Scene s = ground_box_scene(64, 0.35);
  const ShadowConfig cfg;
  for (const Vec3& light : {Vec3(2, 0, 1.5), Vec3(-2, 0, 1.5), Vec3(0, 2, 1.5), Vec3(0, -2, 1.5)}) {
    const Mask lit = shadow_term(render_shadow_map(s.cloud, light, cfg), s.cloud);
    CHECK(agreement(lit, brute_force_lit(s.cloud, light, cfg), s.cloud.valid) >= 0.99);
    Vec3 centroid = Vec3::Zero();
    int count = 0;
    for (std::size_t i = 0; i < lit.size(); ++i) {
      // Ground receivers only.
      if (s.cloud.valid[i] && !lit[i] && std::abs(s.cloud.points[i].z()) < 1e-9) {
        centroid += s.cloud.points[i];
        ++count;
      }
    }
    REQUIRE(count > 0);
    centroid /= count;
    const Vec2 away(-light.x(), -light.y());
    CHECK(Vec2(centroid.x(), centroid.y()).dot(away) > 0.0);
  }
}

TEST_CASE("shade: documented values") {
  SUBCASE("ambient only") {
    const Scene s = ground_box_scene(16, 0.0);
    const Image img = shade(s, LightParams{{}, 0.5}, ShadowBuffer{});
    for (std::size_t i = 0; i < img.valid.size(); ++i) {
      if (img.valid[i]) CHECK(img.intensity[i] == 0.5);
    }
  }
  SUBCASE("fronto-lit diffuse pixel") {
    const Scene s = single_point_scene(2.0, 1.0, 0.0);
    const LightParams lp{{PointLight{Vec3(0, 0, 3), 0.5}}, 0.0};
    const Image img = shade(s, lp, ShadowBuffer::all_lit(1, 1, 1));
    CHECK(img.intensity(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("mirror configuration and a 10 degree tilt of H") {
    const Scene s = single_point_scene(2.0, 0.0, 1.0);
    // Light and camera symmetric about N: H = N.
    const LightParams mirror{{PointLight{Vec3(0, 0, 2), 0.5}}, 0.0};
    CHECK(shade(s, mirror, ShadowBuffer::all_lit(1, 1, 1)).intensity(0, 0) ==
          doctest::Approx(0.5).epsilon(1e-12));
    // Camera on +z; a light at 20 degrees from N tilts H by 10 degrees.
    const double a = 20.0 * M_PI / 180.0;
    const LightParams tilted{{PointLight{Vec3(std::sin(a), 0, std::cos(a)), 0.5}}, 0.0};
    const double expected = 0.5 * std::pow(std::cos(10.0 * M_PI / 180.0), 10.0);
    CHECK(expected == doctest::Approx(0.4289).epsilon(1e-4));
    CHECK(shade(s, tilted, ShadowBuffer::all_lit(1, 1, 1)).intensity(0, 0) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("render: without occluders it equals shading with S = 1") {
  const Scene s = ground_box_scene(32, 0.0);
  const LightParams lp{{PointLight{Vec3(0.3, -0.2, 1.5), 0.5}}, 0.5};
  const RenderResult r = render(s, lp, ShadowConfig{});
  const Image expected = shade(s, lp, ShadowBuffer::all_lit(32, 32, 1));
  CHECK(r.image == expected);
}

TEST_CASE("property: rendering is linear in intensities for fixed shadows") {
  const GeneratedScene g = gen_scene("plane-spheres", 3, 32);
  SplitMix64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    LightParams lp{{g.lights[static_cast<std::size_t>(trial % 6)]}, rng.uniform(0, 1)};
    lp.lights[0].intensity = rng.uniform(0.1, 1);
    const RenderResult base = render(g.scene, lp, ShadowConfig{});
    const double c = trial == 0 ? 2.0 : rng.uniform(0, 5);
    LightParams scaled = lp;
    scaled.ambient *= c;
    scaled.lights[0].intensity *= c;
    const Image img = shade(g.scene, scaled, base.shadows);
    for (std::size_t i = 0; i < img.valid.size(); ++i) {
      if (!img.valid[i]) continue;
      CHECK(std::abs(img.intensity[i] - c * base.image.intensity[i]) <=
            1e-12 * std::max(1.0, std::abs(c * base.image.intensity[i])));
    }
  }
}

TEST_CASE("property: shadow terms are binary") {
  for (auto preset : kPresetNames) {
    const GeneratedScene g = gen_scene(preset, 1, 32);
    const RenderResult r = render(g.scene, LightParams{g.lights, 0.5}, ShadowConfig{});
    for (const Mask& m : r.shadows.lit) {
      for (auto v : m.values()) CHECK((v == 0 || v == 1));
    }
  }
}

TEST_CASE("property: moving the light radially away leaves the pixel unchanged") {
  const Scene s = ground_box_scene(32, 0.0);
  SplitMix64 rng(21);
  const Vec3 light(0.4, 0.2, 1.2);
  const ShadingFrame f = build_shading_frame(s, PointLight{light, 0.5});
  const Image base = shade(s, LightParams{{PointLight{light, 0.5}}, 0.0}, std::span(&f, 1),
                           ShadowBuffer::all_lit(32, 32, 1));
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t i = rng.next() % s.cloud.valid.size();
    if (!s.cloud.valid[i]) continue;
    const Vec3 far = s.cloud.points[i] + 10.0 * (light - s.cloud.points[i]);
    const Image moved = shade(s, LightParams{{PointLight{far, 0.5}}, 0.0},
                              ShadowBuffer::all_lit(32, 32, 1));
    CHECK(std::abs(moved.intensity[i] - base.intensity[i]) < 1e-6);
  }
}

TEST_CASE("property: intensities are finite and non-negative") {
  const GeneratedScene g = gen_scene("steps", 4, 32);
  for (const auto& l : g.lights) {
    const Image img = render(g.scene, LightParams{{l}, 0.5}, ShadowConfig{}).image;
    for (std::size_t i = 0; i < img.valid.size(); ++i) {
      if (img.valid[i]) {
        CHECK(std::isfinite(img.intensity[i]));
        CHECK(img.intensity[i] >= 0.0);
      }
    }
  }
}
