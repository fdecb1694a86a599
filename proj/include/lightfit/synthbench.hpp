#pragma once

#include "lightfit/estimator.hpp"
#include "lightfit/presets.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lightfit {

/// Fractal value noise. Frequencies are in cycles per image width.
struct NoiseConfig {
  double magnitude = 0.0;
  std::uint64_t seed = 0;
  int octaves = 4;
  double lacunarity = 2.0;
  double gain = 0.5;
  double base_frequency = 4.0;

  void validate() const;
};

/// One octave of lattice value noise in [-1, 1] at `frequency` cycles per
/// image width, smoothly interpolated (quintic fade) between lattice values.
Grid<double> value_noise(int width, int height, double frequency, std::uint64_t seed);

/// Sum over octaves of gain^o * value_noise(base * lacunarity^o), then the
/// mean is removed and the field scaled so that max |value| = magnitude.
Grid<double> fbm_noise(int width, int height, const NoiseConfig& cfg);

/// Benchmark noise level: the ideal materials, the "m = 0" level (materials
/// replaced by a uniform 0.5) or FBM noise of magnitude m > 0.
struct NoiseLevel {
  enum class Kind { Ideal, Uniform, Fbm };
  Kind kind = Kind::Ideal;
  double magnitude = 0.0;

  static NoiseLevel ideal() { return {}; }
  static NoiseLevel uniform() { return {Kind::Uniform, 0.0}; }
  static NoiseLevel fbm(double m);
  /// "ideal", "0.0" or the magnitude printed with one decimal ("0.1", ...).
  std::string label() const;
  /// Inverse of label(); also accepts any decimal number ("0" is the uniform level).
  static NoiseLevel parse(std::string_view text);
  bool operator==(const NoiseLevel&) const = default;
};

inline constexpr double kUniformReflectance = 0.5;

/// Reflectance the estimator believes in at a given level. k_d and k_s get
/// independent fields (sub-seeds of shape.seed); values are clamped at 0 and
/// the shininess is never altered.
MaterialMaps perturb_materials(const MaterialMaps& materials, const NoiseLevel& level,
                               const NoiseConfig& shape);

struct BenchScene {
  std::string preset;
  std::uint64_t seed = 0;
};

enum class InitRule { CameraUp, Offset };

struct BenchConfig {
  std::vector<BenchScene> scenes;
  /// Indices into each generated scene's ground-truth lights.
  std::vector<int> lights = {0, 1, 2, 3, 4, 5};
  std::vector<NoiseLevel> levels = {NoiseLevel::ideal(), NoiseLevel::uniform(),
                                    NoiseLevel::fbm(0.1), NoiseLevel::fbm(0.2),
                                    NoiseLevel::fbm(0.3)};
  std::vector<ModelKind> models = {kAllModels.begin(), kAllModels.end()};
  int resolution = 64;
  /// Seed and shape of the reflectance noise; magnitude comes from the level.
  NoiseConfig noise;
  OptimizerOptions optimizer;
  InitRule init = InitRule::CameraUp;
  /// For InitRule::Offset: distance from the true light in normalized units,
  /// along a seeded random direction.
  double init_offset = 0.15;

  void validate() const;
};

BenchConfig bench_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BenchConfig& cfg);

struct ExperimentRecord {
  std::string preset;
  std::uint64_t seed = 0;
  int light = 0;
  NoiseLevel level;
  ModelKind model = ModelKind::FullShadows;
  bool failed = false;
  std::string failure;
  /// Final position error in normalized scene units.
  double error = 0.0;
  int iterations = 0;
  Termination reason = Termination::MaxIterations;
  double final_energy = 0.0;
  Vec3 estimate = Vec3::Zero();  // input scene units
  Vec3 truth = Vec3::Zero();
  /// Not part of the CSV, which must be reproducible bit for bit.
  double wall_seconds = 0.0;
};

struct ModelSummary {
  ModelKind model = ModelKind::FullShadows;
  double average = 0.0;
  double median = 0.0;
  double success = 0.0;  // percent
  int runs = 0;
  int failed = 0;
};

struct LevelSummary {
  NoiseLevel level;
  std::vector<ModelSummary> models;
};

struct BenchReport {
  std::vector<ExperimentRecord> records;
  std::vector<LevelSummary> summary;
  int failed = 0;

  std::string csv() const;
  nlohmann::json summary_json() const;
  /// Human-readable version of the summary, one row per level.
  std::string table() const;
};

/// Exact median; the mean of the two central values for even counts.
double median(std::vector<double> values);

/// Per level: each experiment (scene, light) is won by the model with the
/// smallest error among its successful runs; exact ties split the win.
/// Throws if a record is missing for some (experiment, model) pair.
std::vector<LevelSummary> summarize(const std::vector<ExperimentRecord>& records,
                                    const std::vector<NoiseLevel>& levels,
                                    const std::vector<ModelKind>& models);

/// Seeded unit direction used by InitRule::Offset for one experiment.
Vec3 offset_direction(std::uint64_t scene_seed, int light);

/// Runs every (scene, light, level, model) experiment. Targets are always
/// rendered with the ideal materials; only the estimator sees the noisy ones.
/// Experiments run in parallel and are reported in configuration order.
BenchReport run_benchmark(const BenchConfig& cfg);

}  // namespace lightfit
