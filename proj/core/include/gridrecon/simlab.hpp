#pragma once

#include <array>
#include <optional>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridrecon/graph.hpp"
#include "gridrecon/imputation.hpp"
#include "gridrecon/measurements.hpp"
#include "gridrecon/power_flow.hpp"

namespace gridrecon {

enum class LoadClass { residential, commercial, industrial };

/// Physical quantities carried by the truth. P and Q are in kW / kvar, voltages in per unit.
enum class Quantity { p = 0, q = 1, v_real = 2, v_imag = 3, v_mag = 4 };
inline constexpr int kQuantityCount = 5;

std::string_view to_string(LoadClass c);
std::string_view to_string(Quantity q);
LoadClass parse_load_class(std::string_view text);
Quantity parse_quantity(std::string_view text);

struct ProfileSpec {
  int horizon_steps = 1440;
  double step_minutes = 1.0;
  /// Minute of day at step 0.
  double start_minute = 0.0;
  /// Per node; empty means a seeded mix.
  std::vector<LoadClass> classes;
  /// Per node kW; empty means seeded in base_load_range.
  std::vector<double> base_load;
  std::pair<double, double> base_load_range{20.0, 80.0};
  double power_factor = 0.9;
  /// Relative amplitude of the shared sinusoids, drawn per node then smoothed over the graph.
  std::pair<double, double> sinusoid_amplitude_range{0.04, 0.12};
  std::pair<double, double> sinusoid_period_minutes{30.0, 120.0};
  int sinusoid_count = 2;
  /// Relative std of the per-step load noise.
  double noise_scale = 0.01;
  /// Graph smoothing applied to class weights, amplitudes and load noise.
  double spatial_alpha = 1.0;
  double base_power_kw = 1000.0;
  std::uint64_t seed = 1;

  void validate(int nodes) const;
};

/// Fine-grid truth for every quantity, each M x horizon.
struct Truth {
  int nodes = 0;
  int horizon = 0;
  double step_minutes = 1.0;
  std::array<Eigen::MatrixXd, kQuantityCount> series;
  LinearPFModel pf;
  double base_power_kw = 1000.0;

  const Eigen::MatrixXd& operator[](Quantity q) const { return series[static_cast<std::size_t>(q)]; }
};

/// Class templates plus graph-smoothed sinusoids and noise for P, Q from the power
/// factor, voltages through the linear power-flow map of the feeder.
Truth generate_truth(const ProfileSpec& spec, const RadialFeeder& feeder);

/// Daily shape of a class at the given minute of day, around 1.
double class_template(LoadClass c, double minute_of_day);

struct TaskSampling {
  Quantity quantity = Quantity::p;
  int period = 1;
  int offset = 0;
  /// Only nodes carrying a meter report this task.
  bool metered = true;
  /// Relative noise std for this task instead of the NoiseSpec value.
  std::optional<double> relative_std;
};

struct SamplingSchedule {
  std::vector<TaskSampling> tasks;
  double missing_fraction = 0.0;
  double fad = 1.0;
  std::uint64_t meter_seed = 1;
  std::uint64_t mask_seed = 1;

  void validate(int horizon) const;
};

enum class NoiseFamily { gaussian, laplacian };
std::string_view to_string(NoiseFamily f);
NoiseFamily parse_noise_family(std::string_view text);

struct NoiseSpec {
  NoiseFamily family = NoiseFamily::gaussian;
  /// Noise std as a fraction of the true value.
  double relative_std = 0.0;
  std::uint64_t seed = 1;
};

/// round(fad * M) metered nodes (at least one) chosen by a seeded shuffle.
std::vector<bool> place_meters(int nodes, double fad, std::uint64_t seed);

/// Slow tasks are block averages stamped at block start + (period - 1) / 2; fast tasks
/// are point samples. Noise is drawn for every scheduled sample, then the Bernoulli
/// missing mask and the meter mask are applied.
BatchDataset sample(const Truth& truth, const SamplingSchedule& schedule, const NoiseSpec& noise);

/// Percentage error over targets with |truth| >= 1e-6. Throws AllTargetsNearZero.
double mape(std::span<const double> estimate, std::span<const double> truth);
inline constexpr double kMapeFloor = 1e-6;

struct Area {
  FeederGraph graph;
  /// Original node index of each area node.
  std::vector<int> nodes;
};

/// Connected, size-balanced areas grown by BFS from peripheral seeds.
/// Throws PartitionInfeasible.
std::vector<Area> partition_areas(const FeederGraph& graph, int area_count, std::uint64_t seed = 1);

/// Independent piecewise-linear interpolation of each (task, node) series with
/// boundary hold. Variances are zero. Throws EmptySeries under EmptySeriesPolicy::error.
ImputationResult linear_interpolate(const BatchDataset& data, const std::vector<double>& fine_grid,
                                    EmptySeriesPolicy policy = EmptySeriesPolicy::error);

/// Truth of one quantity on integer grid steps, node-major like ImputationResult.
Eigen::VectorXd truth_on_grid(const Truth& truth, Quantity q, const std::vector<double>& grid);

}  // namespace gridrecon
