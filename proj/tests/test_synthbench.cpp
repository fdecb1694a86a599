#include "helpers.hpp"
#include "lightfit/synthbench.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <complex>

using namespace lightfit;
using namespace testing;

TEST_CASE("fbm noise: zero magnitude, determinism and peak") {
  NoiseConfig cfg;
  cfg.seed = 42;
  const Grid<double> zero = fbm_noise(32, 32, cfg);
  for (double v : zero.values()) CHECK(v == 0.0);
  cfg.magnitude = 0.3;
  const Grid<double> a = fbm_noise(64, 48, cfg);
  CHECK(a == fbm_noise(64, 48, cfg));
  double peak = 0.0;
  for (double v : a.values()) peak = std::max(peak, std::abs(v));
  CHECK(std::abs(peak - 0.3) < 1e-9);
  cfg.seed = 43;
  CHECK_FALSE(a == fbm_noise(64, 48, cfg));
  cfg.octaves = 0;
  CHECK_THROWS_AS(fbm_noise(8, 8, cfg), PreconditionError);
}

namespace {

// Mean squared amplitude of the 2D DFT in the radial band [lo, hi) cycles per image.
double band_power(const Grid<double>& g, double lo, double hi) {
  const int n = g.width();
  double total = 0.0;
  int count = 0;
  for (int ky = -n / 2; ky < n / 2; ++ky) {
    for (int kx = -n / 2; kx < n / 2; ++kx) {
      const double r = std::hypot(kx, ky);
      if (r < lo || r >= hi) continue;
      std::complex<double> acc = 0.0;
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          acc += g(x, y) * std::polar(1.0, -2.0 * M_PI * (kx * x + ky * y) / n);
        }
      }
      total += std::norm(acc);
      ++count;
    }
  }
  return total / count;
}

}  // namespace

TEST_CASE("fbm noise: power decays with frequency, octave amplitudes follow the gain") {
  NoiseConfig cfg;
  cfg.magnitude = 0.3;
  cfg.seed = 7;
  const int n = 64;
  const Grid<double> g = fbm_noise(n, n, cfg);
  // Octaves live around 4, 8, 16 and 32 cycles per image.
  const double p1 = band_power(g, 2.5, 5.5);
  const double p2 = band_power(g, 5.5, 11);
  const double p3 = band_power(g, 11, 22);
  CHECK(p1 > p2);
  CHECK(p2 > p3);

  // Single octaves: value noise at doubled frequency, weighted by gain, has
  // about gain times the amplitude of the previous one.
  double rms[2] = {0.0, 0.0};
  for (int o = 0; o < 2; ++o) {
    const Grid<double> v = value_noise(256, 256, 4.0 * (1 << o), 100 + o);
    double s = 0.0;
    for (double x : v.values()) s += x * x;
    rms[o] = std::pow(cfg.gain, o) * std::sqrt(s / static_cast<double>(v.size()));
  }
  CHECK(rms[1] / rms[0] == doctest::Approx(cfg.gain).epsilon(0.15));
}

TEST_CASE("perturb_materials") {
  const MaterialMaps ideal = MaterialMaps::uniform(256, 256, 1.0, 1.0, 10.0);
  NoiseConfig shape;
  shape.seed = 5;
  SUBCASE("ideal level leaves materials unchanged") {
    CHECK(perturb_materials(ideal, NoiseLevel::ideal(), shape) == ideal);
  }
  SUBCASE("m = 0 level is uniform 0.5") {
    const MaterialMaps m = perturb_materials(ideal, NoiseLevel::parse("0.0"), shape);
    for (double v : m.diffuse.values()) CHECK(v == 0.5);
    for (double v : m.specular.values()) CHECK(v == 0.5);
    CHECK(m.shininess == 10.0);
  }
  SUBCASE("m = 0.2 stays within [0.8, 1.2] with mean near 1 and independent fields") {
    const MaterialMaps m = perturb_materials(ideal, NoiseLevel::fbm(0.2), shape);
    double mean = 0.0;
    for (double v : m.diffuse.values()) {
      CHECK(v >= 0.8 - 1e-12);
      CHECK(v <= 1.2 + 1e-12);
      mean += v;
    }
    mean /= static_cast<double>(m.diffuse.size());
    CHECK(std::abs(mean - 1.0) < 0.02);
    CHECK_FALSE(m.diffuse == m.specular);
    CHECK(m.shininess == 10.0);
  }
  SUBCASE("values are clamped at zero") {
    const MaterialMaps low = MaterialMaps::uniform(64, 64, 0.1, 0.1, 10.0);
    const MaterialMaps m = perturb_materials(low, NoiseLevel::fbm(0.3), shape);
    double lowest = 1.0;
    for (double v : m.diffuse.values()) lowest = std::min(lowest, v);
    CHECK(lowest == 0.0);
  }
}

TEST_CASE("noise level labels round trip") {
  for (const char* s : {"ideal", "0.0", "0.1", "0.2", "0.3"}) {
    CHECK(NoiseLevel::parse(s).label() == s);
  }
  CHECK(NoiseLevel::parse("0") == NoiseLevel::uniform());
  CHECK(NoiseLevel::parse("0.25").label() == "0.25");
  CHECK_THROWS_AS(NoiseLevel::parse("loud"), PreconditionError);
  CHECK_THROWS_AS(NoiseLevel::parse("-0.1"), PreconditionError);
}

TEST_CASE("median selects exactly") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK(median({7.0}) == 7.0);
  CHECK_THROWS_AS(median({}), PreconditionError);
}

namespace {

ExperimentRecord rec(int light, ModelKind m, double error, NoiseLevel level = NoiseLevel::ideal()) {
  ExperimentRecord r;
  r.preset = "plane-box";
  r.seed = 1;
  r.light = light;
  r.model = m;
  r.error = error;
  r.level = level;
  return r;
}

constexpr auto A = ModelKind::DiffuseAmbient;
constexpr auto B = ModelKind::DiffuseSpecular;
constexpr auto C = ModelKind::FullShadows;

}  // namespace

TEST_CASE("success rates") {
  const std::vector<ModelKind> models = {A, B, C};
  const std::vector<NoiseLevel> levels = {NoiseLevel::ideal()};
  SUBCASE("one model winning both experiments takes 100%") {
    std::vector<ExperimentRecord> rs = {rec(0, A, 0.1), rec(0, B, 0.2), rec(0, C, 0.3),
                                        rec(1, A, 0.1), rec(1, B, 0.2), rec(1, C, 0.3)};
    const auto s = summarize(rs, levels, models);
    CHECK(s[0].models[0].success == 100.0);
    CHECK(s[0].models[1].success == 0.0);
    CHECK(s[0].models[2].success == 0.0);
    CHECK(s[0].models[0].average == doctest::Approx(0.1));
    CHECK(s[0].models[2].median == doctest::Approx(0.3));
  }
  SUBCASE("each model winning once gives a third each") {
    std::vector<ExperimentRecord> rs = {rec(0, A, 0.1), rec(0, B, 0.2), rec(0, C, 0.3),
                                        rec(1, A, 0.3), rec(1, B, 0.1), rec(1, C, 0.2),
                                        rec(2, A, 0.3), rec(2, B, 0.2), rec(2, C, 0.1)};
    const auto s = summarize(rs, levels, models);
    for (const auto& m : s[0].models) CHECK(m.success == doctest::Approx(100.0 / 3.0));
  }
  SUBCASE("exact ties split the win and rates still sum to 100") {
    std::vector<ExperimentRecord> rs = {rec(0, A, 0.1), rec(0, B, 0.1), rec(0, C, 0.3)};
    const auto s = summarize(rs, levels, models);
    CHECK(s[0].models[0].success == 50.0);
    CHECK(s[0].models[1].success == 50.0);
  }
  SUBCASE("failed runs are excluded and counted") {
    std::vector<ExperimentRecord> rs = {rec(0, A, 0.1), rec(0, B, 0.2), rec(0, C, 0.3)};
    rs[0].failed = true;
    const auto s = summarize(rs, levels, models);
    CHECK(s[0].models[0].failed == 1);
    CHECK(s[0].models[0].runs == 0);
    CHECK(s[0].models[1].success == 100.0);
  }
  SUBCASE("missing rows are an error") {
    std::vector<ExperimentRecord> rs = {rec(0, A, 0.1), rec(0, B, 0.2)};
    CHECK_THROWS_AS(summarize(rs, levels, models), PreconditionError);
  }
}

TEST_CASE("benchmark config JSON") {
  const auto j = nlohmann::json::parse(R"({
    "scenes": [{"preset": "plane-box", "seed": 3}, {"preset": "steps", "seed": 4}],
    "lights": [0, 2],
    "levels": ["ideal", "0.0", 0.2],
    "models": ["full", "specular"],
    "resolution": 32,
    "noise": {"seed": 9, "octaves": 3},
    "optimizer": {"rate": 0.01, "max_iterations": 50, "shadow": {"resolution": 64}},
    "init": "offset"
  })");
  const BenchConfig cfg = bench_config_from_json(j);
  CHECK(cfg.scenes.size() == 2);
  CHECK(cfg.scenes[1].seed == 4);
  CHECK(cfg.lights == std::vector<int>{0, 2});
  CHECK(cfg.levels.size() == 3);
  CHECK(cfg.levels[2] == NoiseLevel::fbm(0.2));
  CHECK(cfg.models == std::vector<ModelKind>{C, B});
  CHECK(cfg.noise.octaves == 3);
  CHECK(cfg.optimizer.rate == 0.01);
  CHECK(cfg.optimizer.shadow.resolution == 64);
  CHECK(cfg.init == InitRule::Offset);
  CHECK(bench_config_from_json(to_json(cfg)).optimizer.max_iterations == 50);

  auto bad = j;
  bad["optimizer"]["rat"] = 1;
  CHECK_THROWS_WITH_AS(bench_config_from_json(bad), doctest::Contains("/optimizer/rat"), ParseError);
  bad = j;
  bad["scenes"][0]["preset"] = "castle";
  CHECK_THROWS_WITH_AS(bench_config_from_json(bad), doctest::Contains("castle"), PreconditionError);
  bad = j;
  bad["models"] = nlohmann::json::array();
  CHECK_THROWS_AS(bench_config_from_json(bad), PreconditionError);
  bad = j;
  bad["levels"][1] = "loud";
  CHECK_THROWS_WITH_AS(bench_config_from_json(bad), doctest::Contains("/levels/1"), ParseError);
}

TEST_CASE("small benchmark: single competitor, purity and determinism") {
  BenchConfig cfg;
  cfg.scenes = {{"plane-box", 2}};
  cfg.lights = {1};
  cfg.levels = {NoiseLevel::ideal()};
  cfg.models = {C};
  cfg.resolution = 24;
  cfg.optimizer.max_iterations = 5;
  const BenchReport r = run_benchmark(cfg);
  REQUIRE(r.records.size() == 1);
  CHECK(r.summary[0].models[0].success == 100.0);
  CHECK(r.records[0].error >= 0.0);

  cfg.levels = {NoiseLevel::ideal(), NoiseLevel::fbm(0.2)};
  cfg.models = {A, B, C};
  cfg.lights = {0, 1};
  const BenchReport a = run_benchmark(cfg);
  const BenchReport b = run_benchmark(cfg);
  CHECK(a.records.size() == 12);
  CHECK(a.csv() == b.csv());
  CHECK(a.summary_json() == b.summary_json());
  for (const auto& level : a.summary) {
    double total = 0.0;
    for (const auto& m : level.models) total += m.success;
    CHECK(total == doctest::Approx(100.0));
  }
  // Row order follows the configuration.
  CHECK(a.records[0].light == 0);
  CHECK(a.records[0].model == A);
  CHECK(a.records[11].light == 1);
  CHECK(a.records[11].level == NoiseLevel::fbm(0.2));
  CHECK(a.csv().find("wall") == std::string::npos);
}
