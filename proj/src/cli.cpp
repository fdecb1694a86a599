#include "lightfit/cli.hpp"

#include "lightfit/estimator.hpp"
#include "lightfit/gradcheck.hpp"
#include "lightfit/scene_io.hpp"
#include "lightfit/synthbench.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

namespace lightfit {

namespace {

using nlohmann::json;

Vec3 parse_vec3(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) {
      ++used;
    }
    if (used == 0 || used != item.size() || !std::isfinite(d)) {
      throw PreconditionError(fmt::format("expected x,y,z but got '{}'", text));
    }
    v.push_back(d);
  }
  if (v.size() != 3) {
    throw PreconditionError(fmt::format("expected x,y,z but got '{}'", text));
  }
  return {v[0], v[1], v[2]};
}

std::string fmt_vec(const Vec3& v) { return fmt::format("{:.6f},{:.6f},{:.6f}", v.x(), v.y(), v.z()); }

struct ShadowFlags {
  ShadowConfig cfg;
  void add(CLI::App& app) {
    app.add_option("--shadow-res", cfg.resolution, "Shadow map texels per cube face side")
        ->capture_default_str();
    app.add_option("--splat", cfg.splat, "Minimum splat footprint in texels")->capture_default_str();
    app.add_option("--bias-fraction", cfg.bias_fraction, "Depth bias as a fraction of the scene diagonal")
        ->capture_default_str();
    app.add_option("--slope-bias", cfg.slope_bias, "Slope-scaled bias in texels")->capture_default_str();
    app.add_option("--surfel-scale", cfg.surfel_scale, "Disc radius scale; 0 for square splats")
        ->capture_default_str();
  }
};

// Lights from --light flags, else --light-index into the scene file, else all file lights.
LightParams resolve_lights(const SceneFile& file, const std::vector<std::string>& flags,
                           std::optional<int> index, std::optional<double> intensity,
                           std::optional<double> ambient) {
  LightParams lp;
  lp.ambient = file.lights ? file.lights->ambient : 0.5;
  if (!flags.empty()) {
    for (const auto& f : flags) {
      lp.lights.push_back({parse_vec3(f), 0.5});
    }
  } else if (file.lights && !file.lights->lights.empty()) {
    if (index) {
      if (*index < 0 || static_cast<std::size_t>(*index) >= file.lights->lights.size()) {
        throw PreconditionError(fmt::format("--light-index {} out of range (scene has {} lights)",
                                            *index, file.lights->lights.size()));
      }
      lp.lights.push_back(file.lights->lights[static_cast<std::size_t>(*index)]);
    } else {
      lp.lights = file.lights->lights;
    }
  } else {
    throw PreconditionError("no light given (use --light x,y,z)");
  }
  if (intensity) {
    for (auto& l : lp.lights) {
      l.intensity = *intensity;
    }
  }
  if (ambient) {
    lp.ambient = *ambient;
  }
  lp.validate();
  return lp;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError(fmt::format("{}: cannot open", path));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_gen_scene(const std::string& preset, std::uint64_t seed, int resolution,
                  const std::string& out_path, std::ostream& out) {
  if (std::find(kPresetNames.begin(), kPresetNames.end(), preset) == kPresetNames.end()) {
    throw PreconditionError(fmt::format("unknown preset '{}' (valid presets: {})", preset,
                                        fmt::join(kPresetNames, ", ")));
  }
  const GeneratedScene g = gen_scene(preset, seed, resolution);
  SceneFile file;
  file.scene = g.scene;
  file.depth = g.depth;
  file.lights = LightParams{g.lights, g.ambient};
  file.preset = preset;
  file.seed = seed;
  save_scene(out_path, file);
  fmt::print(out, "wrote {} ({}x{}, {} valid points, {} lights)\n", out_path, g.scene.width(),
             g.scene.height(), g.scene.cloud.valid_count(), g.lights.size());
  return kExitOk;
}

void write_trace_csv(const std::string& path, const EstimateResult& r) {
  std::string s = "iteration,energy,light,x,y,z,intensity,ambient,gradient_norm\n";
  for (const auto& e : r.trace) {
    for (std::size_t l = 0; l < e.positions.size(); ++l) {
      s += fmt::format("{},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                       e.iteration, e.energy, l, e.positions[l].x(), e.positions[l].y(),
                       e.positions[l].z(), e.intensities[l], e.ambient, e.gradient_norm);
    }
  }
  write_file_atomic(path, s);
}

void write_gradient_csv(const std::string& path, const EstimateResult& r) {
  std::string s = "iteration,light,dE_dx,dE_dy,dE_dz,dE_dintensity,dE_dambient\n";
  for (const auto& e : r.trace) {
    for (std::size_t l = 0; l < e.d_position.size(); ++l) {
      s += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", e.iteration, l,
                       e.d_position[l].x(), e.d_position[l].y(), e.d_position[l].z(),
                       e.d_intensity[l], e.d_ambient);
    }
  }
  write_file_atomic(path, s);
}

json lights_json(const LightParams& lp) {
  json lights = json::array();
  for (const auto& l : lp.lights) {
    lights.push_back({{"position", {l.position.x(), l.position.y(), l.position.z()}},
                      {"intensity", l.intensity}});
  }
  return {{"lights", lights}, {"ambient", lp.ambient}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point light estimation by differentiable rendering", "lightfit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  app.footer("Thread count: LIGHTFIT_THREADS (default: hardware concurrency).");

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "Generate a procedural scene file");
  std::string preset;
  std::uint64_t seed = 0;
  int resolution = 128;
  std::string out_path;
  gen->add_option("--preset", preset, "plane-box, plane-spheres or steps")->required();
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--resolution", resolution)->capture_default_str()->check(CLI::Range(8, 8192));
  gen->add_option("--out", out_path, "Scene JSON to write")->required();

  // render
  auto* rend = app.add_subcommand("render", "Render a scene under point lights");
  std::string scene_path;
  std::vector<std::string> light_flags;
  std::optional<int> light_index;
  std::optional<double> intensity;
  std::optional<double> ambient;
  std::string model_name = "full";
  std::string png_path;
  std::string mask_path;
  double png_white = 1.0;
  ShadowFlags render_shadow;
  rend->add_option("--scene", scene_path)->required();
  rend->add_option("--light", light_flags, "Light position x,y,z (repeatable)");
  rend->add_option("--light-index", light_index, "Use this ground-truth light from the scene file");
  rend->add_option("--intensity", intensity, "Light intensity (default 0.5 or the file's)");
  rend->add_option("--ambient", ambient, "Ambient illumination (default 0.5 or the file's)");
  rend->add_option("--model", model_name, "diffuse, specular or full")->capture_default_str();
  rend->add_option("--out", out_path, "PFM image to write")->required();
  rend->add_option("--png", png_path, "Also write an 8-bit PNG");
  rend->add_option("--png-white", png_white, "Intensity mapped to white in the PNG")
      ->capture_default_str();
  rend->add_option("--shadow-mask", mask_path,
                   "PFM of the shadow term (1 lit, 0 shadowed; product over lights)");
  render_shadow.add(*rend);

  // estimate
  auto* est = app.add_subcommand("estimate", "Estimate a light position from an image");
  std::string image_path;
  std::string init_flag;
  std::string trace_path;
  std::string grad_path;
  std::string truth_flag;
  OptimizerOptions opts;
  ShadowFlags est_shadow;
  est->add_option("--scene", scene_path)->required();
  est->add_option("--image", image_path, "Observed PFM image")->required();
  est->add_option("--init", init_flag, "Initial light x,y,z (default: camera center + up)");
  est->add_option("--intensity", intensity, "Light intensity (default 0.5)");
  est->add_option("--ambient", ambient, "Ambient illumination (default 0.5)");
  est->add_option("--model", model_name, "diffuse, specular or full")->capture_default_str();
  est->add_option("--rate", opts.rate)->capture_default_str();
  est->add_option("--step-scale", opts.step_scale,
                  "Step is rate * step-scale / pixels times the energy gradient")
      ->capture_default_str();
  est->add_option("--tolerance", opts.tolerance, "Relative energy change to stop at")
      ->capture_default_str();
  est->add_option("--max-iter", opts.max_iterations)->capture_default_str();
  est->add_option("--shadow-step", opts.shadow_step_fraction,
                  "Shadow finite-difference step, fraction of the scene diagonal")
      ->capture_default_str();
  est->add_flag("--optimize-intensity", opts.optimize_intensity);
  est->add_flag("--optimize-ambient", opts.optimize_ambient);
  est->add_option("--out", out_path, "Result JSON");
  est->add_option("--trace", trace_path, "Per-iteration trace CSV");
  est->add_option("--grad-dump", grad_path, "Per-iteration gradient components CSV");
  est->add_option("--truth", truth_flag, "True light x,y,z for error reporting");
  est_shadow.add(*est);

  // check-grad
  auto* chk = app.add_subcommand("check-grad", "Compare analytic and finite-difference gradients");
  GradCheckOptions gopts;
  ShadowFlags chk_shadow;
  chk->add_option("--scene", scene_path)->required();
  chk->add_option("--light", light_flags, "Light position x,y,z");
  chk->add_option("--light-index", light_index, "Use this ground-truth light from the scene file");
  chk->add_option("--model", model_name, "diffuse, specular or full")->capture_default_str();
  chk->add_option("--samples", gopts.samples)->capture_default_str();
  chk->add_option("--seed", gopts.seed)->capture_default_str();
  chk->add_option("--shadow-step", gopts.shadow_step_fraction)->capture_default_str();
  chk_shadow.add(*chk);

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Run the reflectance-noise benchmark");
  std::string config_path;
  std::string csv_path;
  std::string summary_path;
  bench->add_option("--config", config_path, "Benchmark JSON config")->required();
  bench->add_option("--out", out_path, "Output prefix: writes <out>.csv and <out>.json");
  bench->add_option("--csv", csv_path, "Per-experiment CSV (overrides --out)");
  bench->add_option("--summary", summary_path, "Summary JSON (overrides --out)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_scene(preset, seed, resolution, out_path, out);
    }
    if (rend->parsed()) {
      const ModelKind model = parse_model_kind(model_name);
      const SceneFile file = load_scene(scene_path);
      const LightParams lights = resolve_lights(file, light_flags, light_index, intensity, ambient);
      render_shadow.cfg.validate();
      const RenderResult r = render(file.scene, lights, render_shadow.cfg, model);
      write_pfm(out_path, r.image);
      if (!png_path.empty()) {
        write_png(png_path, r.image, png_white);
      }
      if (!mask_path.empty()) {
        Grid<double> mask(file.scene.width(), file.scene.height(), 1.0);
        std::size_t shadowed = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
          for (const auto& lit : r.shadows.lit) {
            mask[i] = std::min(mask[i], static_cast<double>(lit[i]));
          }
          shadowed += file.scene.cloud.valid[i] && mask[i] == 0.0 ? 1 : 0;
        }
        write_pfm(mask_path, mask, &file.scene.cloud.valid);
        fmt::print(out, "shadowed pixels: {}\n", shadowed);
      }
      fmt::print(out, "wrote {}\n", out_path);
      return kExitOk;
    }
    if (est->parsed()) {
      const ModelKind model = parse_model_kind(model_name);
      const SceneFile file = load_scene(scene_path);
      const Image target = read_pfm(image_path);
      LightParams init;
      init.ambient = ambient.value_or(0.5);
      const Vec3 p = init_flag.empty() ? default_initial_position(file.scene) : parse_vec3(init_flag);
      init.lights.push_back({p, intensity.value_or(0.5)});
      opts.shadow = est_shadow.cfg;
      const EstimateResult r = estimate_light(file.scene, target, init, model, opts);
      const Vec3 final_pos = r.lights.lights[0].position;
      json result = {{"model", to_string(model)},
                     {"iterations", r.iterations},
                     {"termination", to_string(r.reason)},
                     {"final_energy", r.final_energy()},
                     {"estimate", lights_json(r.lights)},
                     {"normalized_estimate", lights_json(r.normalized_lights)},
                     {"transform",
                      {{"scale", r.transform.scale},
                       {"translation",
                        {r.transform.translation.x(), r.transform.translation.y(),
                         r.transform.translation.z()}}}}};
      json trace = json::array();
      for (const auto& e : r.trace) {
        trace.push_back({{"iteration", e.iteration},
                         {"energy", e.energy},
                         {"position", {e.positions[0].x(), e.positions[0].y(), e.positions[0].z()}},
                         {"gradient_norm", e.gradient_norm}});
      }
      result["trace"] = std::move(trace);
      fmt::print(out, "position  {}\n", fmt_vec(final_pos));
      if (opts.optimize_intensity) {
        fmt::print(out, "intensity {:.6f}\n", r.lights.lights[0].intensity);
      }
      if (opts.optimize_ambient) {
        fmt::print(out, "ambient   {:.6f}\n", r.lights.ambient);
      }
      if (!truth_flag.empty()) {
        const Vec3 truth = parse_vec3(truth_flag);
        const double error = r.transform.scale * (final_pos - truth).norm();
        result["truth"] = {truth.x(), truth.y(), truth.z()};
        result["error"] = error;
        fmt::print(out, "error     {:.6f} (normalized units)\n", error);
      }
      fmt::print(out, "energy    {:.6g}\niterations {} ({})\n", r.final_energy(), r.iterations,
                 to_string(r.reason));
      if (!out_path.empty()) {
        write_file_atomic(out_path, result.dump(2) + "\n");
      }
      if (!trace_path.empty()) {
        write_trace_csv(trace_path, r);
      }
      if (!grad_path.empty()) {
        write_gradient_csv(grad_path, r);
      }
      return kExitOk;
    }
    if (chk->parsed()) {
      const ModelKind model = parse_model_kind(model_name);
      const SceneFile file = load_scene(scene_path);
      LightParams lights;
      if (light_flags.empty() && !light_index) {
        throw PreconditionError("check-grad needs --light or --light-index");
      }
      lights = resolve_lights(file, light_flags, light_index, std::nullopt, std::nullopt);
      gopts.shadow = chk_shadow.cfg;
      const GradCheckReport rep = check_gradients(file.scene, lights.lights[0], model, gopts);
      auto term = [&](const char* name, const TermCheck& t) {
        fmt::print(out, "{:<9} pixels {:5d}  max relative error {:.3e}\n", name, t.checked,
                   t.max_error);
      };
      term("diffuse", rep.diffuse);
      if (has_specular(model)) {
        term("specular", rep.specular);
      }
      if (rep.shadow) {
        const auto& d = *rep.shadow;
        fmt::print(out,
                   "shadow    directional derivative analytic {:.6g} numeric {:.6g} "
                   "relative error {:.3f} ({})\n",
                   d.analytic, d.numeric, d.error, d.passed ? "ok" : "above 10%");
      }
      if (!rep.passed) {
        const TermCheck& w =
            rep.diffuse.max_error >= rep.specular.max_error ? rep.diffuse : rep.specular;
        fmt::print(err,
                   "gradient check failed at pixel ({}, {}): analytic {} numeric {} "
                   "n.l {:.6f} n.h {:.6f}\n",
                   w.worst_x, w.worst_y, fmt_vec(w.analytic), fmt_vec(w.numeric), w.n_dot_l,
                   w.n_dot_h);
        return kExitGradCheck;
      }
      return kExitOk;
    }
    if (bench->parsed()) {
      json j;
      try {
        j = json::parse(read_text(config_path));
      } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("{}: {}", config_path, e.what()));
      }
      const BenchConfig cfg = bench_config_from_json(j);
      const BenchReport report = run_benchmark(cfg);
      if (csv_path.empty() && !out_path.empty()) {
        csv_path = out_path + ".csv";
      }
      if (summary_path.empty() && !out_path.empty()) {
        summary_path = out_path + ".json";
      }
      if (!csv_path.empty()) {
        write_file_atomic(csv_path, report.csv());
      }
      if (!summary_path.empty()) {
        json s = report.summary_json();
        s["config"] = to_json(cfg);
        write_file_atomic(summary_path, s.dump(2) + "\n");
      }
      fmt::print(out, "{}", report.table());
      for (const auto& r : report.records) {
        if (r.failed) {
          fmt::print(err, "failed: {} seed {} light {} {} {}: {}\n", r.preset, r.seed, r.light,
                     r.level.label(), to_string(r.model), r.failure);
        }
      }
      return report.failed == static_cast<int>(report.records.size()) ? kExitFailure : kExitOk;
    }
  } catch (const DivergenceError& e) {
    fmt::print(err, "error: diverged at iteration {}: {}\n", e.iteration(), e.what());
    return kExitDiverged;
  } catch (const PreconditionError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace lightfit
