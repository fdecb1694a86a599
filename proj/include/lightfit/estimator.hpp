#pragma once

#include "lightfit/gradients.hpp"

#include <stdexcept>
#include <string_view>

namespace lightfit {

/// Raised when the energy becomes non-finite during estimation.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct OptimizerOptions {
  /// Each step moves by rate * step_scale / N times the gradient of the summed
  /// energy, N being the number of compared pixels.
  double rate = 0.02;
  double step_scale = 4.0;
  /// Stop when |E_t - E_{t-1}| / E_{t-1} falls below this.
  double tolerance = 1e-4;
  /// E_{t-1} at or below this counts as an exact fit.
  double exact_fit_energy = 1e-20;
  int max_iterations = 1000;
  ShadowConfig shadow;
  /// Shadow finite-difference step as a fraction of the normalized scene diagonal.
  double shadow_step_fraction = 0.03;
  bool optimize_intensity = false;
  bool optimize_ambient = false;

  void validate() const;
};

enum class Termination { Converged, MaxIterations };
std::string_view to_string(Termination t);

struct TraceEntry {
  int iteration = 0;
  double energy = 0.0;
  /// Light positions in input scene units.
  std::vector<Vec3> positions;
  std::vector<double> intensities;
  double ambient = 0.0;
  /// Gradient in normalized scene units.
  std::vector<Vec3> d_position;
  std::vector<double> d_intensity;
  double d_ambient = 0.0;
  double gradient_norm = 0.0;
};

struct EstimateResult {
  LightParams lights;             // input scene units
  LightParams normalized_lights;  // unit-cube scene units
  SimilarityTransform transform;  // input -> normalized
  std::vector<TraceEntry> trace;
  int iterations = 0;
  Termination reason = Termination::MaxIterations;

  double final_energy() const { return trace.empty() ? 0.0 : trace.back().energy; }
};

/// Sum of squared differences over pixels valid in both images.
double energy(const Image& image, const Image& target);

/// Fixed-rate gradient descent on the photometric energy. The scene is
/// normalized to the unit cube first; the returned lights are mapped back.
/// Models without shadows render and differentiate with S = 1 everywhere.
EstimateResult estimate_light(const Scene& scene, const Image& target, const LightParams& init,
                              ModelKind model, const OptimizerOptions& opts = {});

/// Camera center plus one normalized scene unit along the camera's up axis,
/// returned in input scene units.
Vec3 default_initial_position(const Scene& scene);

}  // namespace lightfit
