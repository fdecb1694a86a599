#include "lightfit/synthbench.hpp"

#include "json_reader.hpp"
#include "lightfit/random.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <map>
#include <set>

namespace lightfit {

using nlohmann::json;

void NoiseConfig::validate() const {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
    throw PreconditionError("noise magnitude must be finite and >= 0");
  }
  if (octaves < 1) {
    throw PreconditionError("noise octaves must be >= 1");
  }
  if (!(lacunarity > 0.0) || !(gain > 0.0) || !(base_frequency > 0.0)) {
    throw PreconditionError("noise lacunarity, gain and base frequency must be > 0");
  }
}

namespace {

double lattice_value(std::uint64_t seed, std::int64_t i, std::int64_t j) {
  return 2.0 * static_cast<double>(hash_combine(seed, i, j) >> 11) * 0x1.0p-53 - 1.0;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

}  // namespace

Grid<double> value_noise(int width, int height, double frequency, std::uint64_t seed) {
  Grid<double> out(width, height);
  if (width == 0 || height == 0) {
    return out;
  }
  const double step = frequency / width;
  for (int y = 0; y < height; ++y) {
    const double fy = (y + 0.5) * step;
    const double y0 = std::floor(fy);
    const double ty = fade(fy - y0);
    const auto j = static_cast<std::int64_t>(y0);
    for (int x = 0; x < width; ++x) {
      const double fx = (x + 0.5) * step;
      const double x0 = std::floor(fx);
      const double tx = fade(fx - x0);
      const auto i = static_cast<std::int64_t>(x0);
      const double a = lattice_value(seed, i, j);
      const double b = lattice_value(seed, i + 1, j);
      const double c = lattice_value(seed, i, j + 1);
      const double d = lattice_value(seed, i + 1, j + 1);
      const double top = a + (b - a) * tx;
      const double bottom = c + (d - c) * tx;
      out(x, y) = top + (bottom - top) * ty;
    }
  }
  return out;
}

Grid<double> fbm_noise(int width, int height, const NoiseConfig& cfg) {
  cfg.validate();
  Grid<double> sum(width, height, 0.0);
  if (cfg.magnitude == 0.0 || sum.empty()) {
    return sum;
  }
  double amplitude = 1.0;
  double frequency = cfg.base_frequency;
  for (int o = 0; o < cfg.octaves; ++o) {
    const Grid<double> octave = value_noise(width, height, frequency, hash_combine(cfg.seed, o, 0));
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += amplitude * octave[i];
    }
    amplitude *= cfg.gain;
    frequency *= cfg.lacunarity;
  }
  double mean = 0.0;
  for (double v : sum.values()) {
    mean += v;
  }
  mean /= static_cast<double>(sum.size());
  double peak = 0.0;
  for (double& v : sum.values()) {
    v -= mean;
    peak = std::max(peak, std::abs(v));
  }
  if (peak == 0.0) {
    return Grid<double>(width, height, 0.0);
  }
  const double k = cfg.magnitude / peak;
  for (double& v : sum.values()) {
    v *= k;
  }
  return sum;
}

NoiseLevel NoiseLevel::fbm(double m) {
  if (!(m >= 0.0) || !std::isfinite(m)) {
    throw PreconditionError("noise level magnitude must be finite and >= 0");
  }
  return m == 0.0 ? uniform() : NoiseLevel{Kind::Fbm, m};
}

std::string NoiseLevel::label() const {
  switch (kind) {
    case Kind::Ideal:
      return "ideal";
    case Kind::Uniform:
      return "0.0";
    case Kind::Fbm:
      break;
  }
  std::string s = fmt::format("{:.1f}", magnitude);
  if (std::stod(s) != magnitude) {
    s = fmt::format("{}", magnitude);
  }
  return s;
}

NoiseLevel NoiseLevel::parse(std::string_view text) {
  if (text == "ideal") {
    return ideal();
  }
  const std::string s(text);
  std::size_t used = 0;
  double m = 0.0;
  try {
    m = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw PreconditionError(
        fmt::format("unknown noise level '{}' (expected \"ideal\" or a magnitude)", text));
  }
  return fbm(m);
}

MaterialMaps perturb_materials(const MaterialMaps& materials, const NoiseLevel& level,
                               const NoiseConfig& shape) {
  materials.validate();
  const int w = materials.diffuse.width();
  const int h = materials.diffuse.height();
  switch (level.kind) {
    case NoiseLevel::Kind::Ideal:
      return materials;
    case NoiseLevel::Kind::Uniform:
      return MaterialMaps::uniform(w, h, kUniformReflectance, kUniformReflectance,
                                   materials.shininess);
    case NoiseLevel::Kind::Fbm:
      break;
  }
  MaterialMaps out = materials;
  NoiseConfig cfg = shape;
  cfg.magnitude = level.magnitude;
  cfg.seed = hash_combine(shape.seed, 1, 0);
  const Grid<double> fd = fbm_noise(w, h, cfg);
  cfg.seed = hash_combine(shape.seed, 2, 0);
  const Grid<double> fs = fbm_noise(w, h, cfg);
  for (std::size_t i = 0; i < out.diffuse.size(); ++i) {
    out.diffuse[i] = std::max(0.0, out.diffuse[i] + fd[i]);
    out.specular[i] = std::max(0.0, out.specular[i] + fs[i]);
  }
  return out;
}

void BenchConfig::validate() const {
  if (scenes.empty()) {
    throw PreconditionError("benchmark needs at least one scene");
  }
  if (lights.empty()) {
    throw PreconditionError("benchmark needs at least one light");
  }
  if (models.empty()) {
    throw PreconditionError("benchmark needs at least one model");
  }
  if (levels.empty()) {
    throw PreconditionError("benchmark needs at least one noise level");
  }
  for (const auto& s : scenes) {
    bool known = false;
    for (auto name : kPresetNames) {
      known = known || name == s.preset;
    }
    if (!known) {
      throw PreconditionError(fmt::format("unknown preset '{}'", s.preset));
    }
  }
  for (int l : lights) {
    if (l < 0) {
      throw PreconditionError("light indices must be >= 0");
    }
  }
  if (std::set<ModelKind>(models.begin(), models.end()).size() != models.size()) {
    throw PreconditionError("benchmark models must be distinct");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (levels[i] == levels[j]) {
        throw PreconditionError("benchmark noise levels must be distinct");
      }
    }
  }
  if (resolution < 8) {
    throw PreconditionError("benchmark resolution must be >= 8");
  }
  if (!(init_offset > 0.0)) {
    throw PreconditionError("init offset must be > 0");
  }
  noise.validate();
  optimizer.validate();
}

namespace {

using detail::Reader;

ShadowConfig shadow_from_json(const Reader& r) {
  r.expect_object({"resolution", "splat", "bias_fraction", "slope_bias", "surfel_scale"});
  ShadowConfig s;
  r.optional_int("resolution", s.resolution);
  r.optional_int("splat", s.splat);
  r.optional("bias_fraction", s.bias_fraction, &Reader::number);
  r.optional("slope_bias", s.slope_bias, &Reader::number);
  r.optional("surfel_scale", s.surfel_scale, &Reader::number);
  return s;
}

OptimizerOptions optimizer_from_json(const Reader& r) {
  r.expect_object({"rate", "step_scale", "tolerance", "max_iterations", "shadow_step_fraction",
                   "optimize_intensity", "optimize_ambient", "shadow"});
  OptimizerOptions o;
  r.optional("rate", o.rate, &Reader::number);
  r.optional("step_scale", o.step_scale, &Reader::number);
  r.optional("tolerance", o.tolerance, &Reader::number);
  r.optional_int("max_iterations", o.max_iterations);
  r.optional("shadow_step_fraction", o.shadow_step_fraction, &Reader::number);
  r.optional("optimize_intensity", o.optimize_intensity, &Reader::boolean);
  r.optional("optimize_ambient", o.optimize_ambient, &Reader::boolean);
  if (r.has("shadow")) {
    o.shadow = shadow_from_json(r.at("shadow"));
  }
  return o;
}

json to_json(const ShadowConfig& s) {
  return {{"resolution", s.resolution},
          {"splat", s.splat},
          {"bias_fraction", s.bias_fraction},
          {"slope_bias", s.slope_bias},
          {"surfel_scale", s.surfel_scale}};
}

json to_json(const OptimizerOptions& o) {
  return {{"rate", o.rate},
          {"step_scale", o.step_scale},
          {"tolerance", o.tolerance},
          {"max_iterations", o.max_iterations},
          {"shadow_step_fraction", o.shadow_step_fraction},
          {"optimize_intensity", o.optimize_intensity},
          {"optimize_ambient", o.optimize_ambient},
          {"shadow", to_json(o.shadow)}};
}

}  // namespace

BenchConfig bench_config_from_json(const json& j) {
  const Reader r(j, "");
  r.expect_object({"scenes", "lights", "levels", "models", "resolution", "noise", "optimizer",
                   "init", "init_offset"});
  BenchConfig cfg;
  if (!r.has("scenes")) {
    r.fail("missing key \"scenes\"");
  }
  const Reader scenes = r.at("scenes");
  for (std::size_t i = 0; i < scenes.array_size(); ++i) {
    const Reader s = scenes.at(i);
    s.expect_object({"preset", "seed"});
    if (!s.has("preset")) {
      s.fail("missing key \"preset\"");
    }
    BenchScene scene;
    scene.preset = s.at("preset").string();
    s.optional("seed", scene.seed, &Reader::seed);
    cfg.scenes.push_back(scene);
  }
  if (r.has("lights")) {
    const Reader l = r.at("lights");
    cfg.lights.clear();
    for (std::size_t i = 0; i < l.array_size(); ++i) {
      cfg.lights.push_back(static_cast<int>(l.at(i).integer()));
    }
  }
  if (r.has("levels")) {
    const Reader l = r.at("levels");
    cfg.levels.clear();
    for (std::size_t i = 0; i < l.array_size(); ++i) {
      const Reader item = l.at(i);
      try {
        cfg.levels.push_back(item.value().is_number()
                                 ? NoiseLevel::fbm(item.number())
                                 : NoiseLevel::parse(item.string()));
      } catch (const PreconditionError& e) {
        item.fail(e.what());
      }
    }
  }
  if (r.has("models")) {
    const Reader m = r.at("models");
    cfg.models.clear();
    for (std::size_t i = 0; i < m.array_size(); ++i) {
      const Reader item = m.at(i);
      try {
        cfg.models.push_back(parse_model_kind(item.string()));
      } catch (const PreconditionError& e) {
        item.fail(e.what());
      }
    }
  }
  r.optional_int("resolution", cfg.resolution);
  if (r.has("noise")) {
    const Reader n = r.at("noise");
    n.expect_object({"seed", "octaves", "lacunarity", "gain", "base_frequency"});
    n.optional("seed", cfg.noise.seed, &Reader::seed);
    n.optional_int("octaves", cfg.noise.octaves);
    n.optional("lacunarity", cfg.noise.lacunarity, &Reader::number);
    n.optional("gain", cfg.noise.gain, &Reader::number);
    n.optional("base_frequency", cfg.noise.base_frequency, &Reader::number);
  }
  if (r.has("optimizer")) {
    cfg.optimizer = optimizer_from_json(r.at("optimizer"));
  }
  if (r.has("init")) {
    const Reader i = r.at("init");
    const std::string rule = i.string();
    if (rule == "camera-up") {
      cfg.init = InitRule::CameraUp;
    } else if (rule == "offset") {
      cfg.init = InitRule::Offset;
    } else {
      i.fail("expected \"camera-up\" or \"offset\"");
    }
  }
  r.optional("init_offset", cfg.init_offset, &Reader::number);
  cfg.validate();
  return cfg;
}

json to_json(const BenchConfig& cfg) {
  json scenes = json::array();
  for (const auto& s : cfg.scenes) {
    scenes.push_back({{"preset", s.preset}, {"seed", s.seed}});
  }
  json levels = json::array();
  for (const auto& l : cfg.levels) {
    levels.push_back(l.label());
  }
  json models = json::array();
  for (auto m : cfg.models) {
    models.push_back(to_string(m));
  }
  return {{"scenes", scenes},
          {"lights", cfg.lights},
          {"levels", levels},
          {"models", models},
          {"resolution", cfg.resolution},
          {"noise",
           {{"seed", cfg.noise.seed},
            {"octaves", cfg.noise.octaves},
            {"lacunarity", cfg.noise.lacunarity},
            {"gain", cfg.noise.gain},
            {"base_frequency", cfg.noise.base_frequency}}},
          {"optimizer", to_json(cfg.optimizer)},
          {"init", cfg.init == InitRule::CameraUp ? "camera-up" : "offset"},
          {"init_offset", cfg.init_offset}};
}

double median(std::vector<double> values) {
  if (values.empty()) {
    throw PreconditionError("median of an empty set");
  }
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(values.begin(),
                                         values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<LevelSummary> summarize(const std::vector<ExperimentRecord>& records,
                                    const std::vector<NoiseLevel>& levels,
                                    const std::vector<ModelKind>& models) {
  using Key = std::tuple<std::string, std::uint64_t, int>;
  std::vector<LevelSummary> out;
  for (const auto& level : levels) {
    std::map<Key, std::map<ModelKind, const ExperimentRecord*>> experiments;
    for (const auto& r : records) {
      if (r.level == level) {
        auto& slot = experiments[Key(r.preset, r.seed, r.light)][r.model];
        if (slot != nullptr) {
          throw PreconditionError(fmt::format("duplicate record for {} seed {} light {} {} {}",
                                              r.preset, r.seed, r.light, level.label(),
                                              to_string(r.model)));
        }
        slot = &r;
      }
    }
    std::map<ModelKind, double> wins;
    std::map<ModelKind, std::vector<double>> errors;
    std::map<ModelKind, int> failed;
    int decided = 0;
    for (const auto& [key, by_model] : experiments) {
      double best = std::numeric_limits<double>::infinity();
      for (auto m : models) {
        const auto it = by_model.find(m);
        if (it == by_model.end()) {
          throw PreconditionError(fmt::format("missing {} record for {} seed {} light {} at {}",
                                              to_string(m), std::get<0>(key), std::get<1>(key),
                                              std::get<2>(key), level.label()));
        }
        const ExperimentRecord& r = *it->second;
        if (r.failed) {
          ++failed[m];
          continue;
        }
        errors[m].push_back(r.error);
        best = std::min(best, r.error);
      }
      if (!std::isfinite(best)) {
        continue;
      }
      std::vector<ModelKind> winners;
      for (auto m : models) {
        const ExperimentRecord& r = *by_model.at(m);
        if (!r.failed && r.error == best) {
          winners.push_back(m);
        }
      }
      for (auto m : winners) {
        wins[m] += 1.0 / static_cast<double>(winners.size());
      }
      ++decided;
    }
    LevelSummary row;
    row.level = level;
    for (auto m : models) {
      ModelSummary s;
      s.model = m;
      const auto& e = errors[m];
      s.runs = static_cast<int>(e.size());
      s.failed = failed[m];
      if (!e.empty()) {
        double sum = 0.0;
        for (double v : e) {
          sum += v;
        }
        s.average = sum / static_cast<double>(e.size());
        s.median = median(e);
      } else {
        s.average = s.median = std::numeric_limits<double>::quiet_NaN();
      }
      s.success = decided > 0 ? 100.0 * wins[m] / decided : 0.0;
      row.models.push_back(s);
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string BenchReport::csv() const {
  std::string s =
      "preset,seed,light,level,model,status,error,iterations,reason,final_energy,"
      "est_x,est_y,est_z,true_x,true_y,true_z\n";
  for (const auto& r : records) {
    if (r.failed) {
      std::string why = r.failure;
      std::replace(why.begin(), why.end(), '"', '\'');
      s += fmt::format("{},{},{},{},{},\"failed: {}\",,,,,,,,{:.17g},{:.17g},{:.17g}\n",
                       r.preset, r.seed, r.light, r.level.label(), to_string(r.model), why,
                       r.truth.x(), r.truth.y(), r.truth.z());
      continue;
    }
    s += fmt::format(
        "{},{},{},{},{},ok,{:.17g},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
        r.preset, r.seed, r.light, r.level.label(), to_string(r.model), r.error, r.iterations,
        to_string(r.reason), r.final_energy, r.estimate.x(), r.estimate.y(), r.estimate.z(),
        r.truth.x(), r.truth.y(), r.truth.z());
  }
  return s;
}

json BenchReport::summary_json() const {
  json rows = json::array();
  for (const auto& level : summary) {
    json models = json::object();
    for (const auto& m : level.models) {
      auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
      models[std::string(to_string(m.model))] = {{"average", num(m.average)},
                                                 {"median", num(m.median)},
                                                 {"success", m.success},
                                                 {"runs", m.runs},
                                                 {"failed", m.failed}};
    }
    rows.push_back({{"level", level.level.label()}, {"models", models}});
  }
  return {{"experiments", records.size()}, {"failed", failed}, {"rows", rows}};
}

std::string BenchReport::table() const {
  if (summary.empty()) {
    return "";
  }
  std::string s = fmt::format("{:<8}", "level");
  for (const auto& m : summary.front().models) {
    s += fmt::format(" | {:^29}", to_string(m.model));
  }
  s += fmt::format("\n{:<8}", "");
  for (std::size_t i = 0; i < summary.front().models.size(); ++i) {
    s += fmt::format(" | {:>9}{:>10}{:>10}", "avg", "median", "success");
  }
  s += '\n';
  for (const auto& level : summary) {
    s += fmt::format("{:<8}", level.level.label());
    for (const auto& m : level.models) {
      s += fmt::format(" | {:>9.4f}{:>10.4f}{:>9.2f}%", m.average, m.median, m.success);
    }
    s += '\n';
  }
  if (failed > 0) {
    s += fmt::format("{} failed run(s) excluded\n", failed);
  }
  return s;
}

namespace {

struct PreparedScene {
  GeneratedScene gen;
  SimilarityTransform transform;
  std::vector<Image> targets;  // one per configured light
};


}  // namespace

Vec3 offset_direction(std::uint64_t scene_seed, int light) {
  SplitMix64 rng(hash_combine(scene_seed, light, 0x51));
  for (;;) {
    const Vec3 v(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) {
      return v / n;
    }
  }
}

BenchReport run_benchmark(const BenchConfig& cfg) {
  cfg.validate();

  std::vector<PreparedScene> scenes(cfg.scenes.size());
  for (std::size_t s = 0; s < cfg.scenes.size(); ++s) {
    PreparedScene& p = scenes[s];
    p.gen = gen_scene(cfg.scenes[s].preset, cfg.scenes[s].seed, cfg.resolution);
    p.transform = normalize_scene(p.gen.scene).second;
    for (int l : cfg.lights) {
      if (static_cast<std::size_t>(l) >= p.gen.lights.size()) {
        throw PreconditionError(fmt::format("light index {} out of range ({} lights per scene)",
                                            l, p.gen.lights.size()));
      }
      const LightParams truth{{p.gen.lights[static_cast<std::size_t>(l)]}, p.gen.ambient};
      p.targets.push_back(render(p.gen.scene, truth, cfg.optimizer.shadow).image);
    }
  }

  struct Job {
    std::size_t scene, light, level, model;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (std::size_t l = 0; l < cfg.lights.size(); ++l) {
      for (std::size_t v = 0; v < cfg.levels.size(); ++v) {
        for (std::size_t m = 0; m < cfg.models.size(); ++m) {
          jobs.push_back({s, l, v, m});
        }
      }
    }
  }

  // Noisy materials depend on (scene, level) only, so every model sees the same belief.
  std::vector<std::vector<MaterialMaps>> beliefs(scenes.size());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (const auto& level : cfg.levels) {
      NoiseConfig shape = cfg.noise;
      shape.seed = hash_combine(cfg.noise.seed, static_cast<std::int64_t>(cfg.scenes[s].seed),
                                static_cast<std::int64_t>(s));
      beliefs[s].push_back(perturb_materials(scenes[s].gen.scene.materials, level, shape));
    }
  }

  BenchReport report;
  report.records.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Job& job = jobs[i];
      const PreparedScene& p = scenes[job.scene];
      const int light_index = cfg.lights[job.light];
      ExperimentRecord& r = report.records[i];
      r.preset = cfg.scenes[job.scene].preset;
      r.seed = cfg.scenes[job.scene].seed;
      r.light = light_index;
      r.level = cfg.levels[job.level];
      r.model = cfg.models[job.model];
      const PointLight& truth = p.gen.lights[static_cast<std::size_t>(light_index)];
      r.truth = truth.position;

      Scene belief = p.gen.scene;
      belief.materials = beliefs[job.scene][job.level];
      LightParams init{{truth}, p.gen.ambient};
      init.lights[0].position =
          cfg.init == InitRule::CameraUp
              ? default_initial_position(p.gen.scene)
              : Vec3(truth.position + cfg.init_offset *
                                          offset_direction(r.seed, light_index) /
                                          p.transform.scale);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const EstimateResult est =
            estimate_light(belief, p.targets[job.light], init, r.model, cfg.optimizer);
        r.estimate = est.lights.lights[0].position;
        r.error = p.transform.scale * (r.estimate - r.truth).norm();
        r.iterations = est.iterations;
        r.reason = est.reason;
        r.final_energy = est.final_energy();
      } catch (const std::exception& e) {
        r.failed = true;
        r.failure = e.what();
      }
      r.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });
  for (const auto& r : report.records) {
    report.failed += r.failed ? 1 : 0;
  }
  report.summary = summarize(report.records, cfg.levels, cfg.models);
  return report;
}

}  // namespace lightfit
