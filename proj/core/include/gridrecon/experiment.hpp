#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridrecon/dsse.hpp"
#include "gridrecon/hyper.hpp"
#include "gridrecon/imputation.hpp"
#include "gridrecon/io.hpp"
#include "gridrecon/power_flow.hpp"
#include "gridrecon/simlab.hpp"

namespace gridrecon {

struct GpSettings {
  Hyperparameters hp{10.0, 1.0, 1e-2};
  /// Uniform task correlation, used when task_matrix is absent.
  double task_corr = 0.0;
  std::optional<Eigen::MatrixXd> task_matrix;
  double alpha = 0.05;
  int basis_n = 48;
  Schedule schedule = Schedule::interpolation;
  NoiseMode noise_mode = NoiseMode::standard;
  bool standardize = true;
  bool verify_theorems = false;

  TaskKernel task_kernel(int tasks) const;
  ImputeOptions impute_options() const;
};

struct DsseSettings {
  bool enabled = false;
  std::vector<double> fad_levels{0.5, 0.7, 0.9};
  std::vector<Method> sources{Method::linear, Method::rgp_g};
  /// Sensing of the reconciliation run; every task is metered.
  std::vector<TaskSampling> tasks{{Quantity::p, 15, 0, true, {}}, {Quantity::q, 15, 0, true, {}}, {Quantity::v_mag, 1, 0, true, {}}};
  /// Evenly spaced grid steps per seed at which states are estimated.
  int snapshots = 4;
  double epsilon = 1e-4;
  double lambda_pf = 1.0;
  SolverOptions solver;
  /// Overrides the main GP settings for the reconciliation run when present.
  std::optional<GpSettings> gp;
  /// Keep every estimated state matrix in ExperimentReport::dsse_states.
  bool keep_states = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int seed_count = 1;
  FeederGenerationSpec feeder{.buses = 12};
  ProfileSpec profile;
  std::vector<TaskSampling> tasks{{Quantity::p, 15, 0, true, {}}, {Quantity::v_mag, 1, 0, false, {}}};
  std::vector<double> missing_levels{0.0, 0.1, 0.2};
  double fad = 1.0;
  /// Noise settings swept per seed; seeds inside are replaced by per-seed streams.
  std::vector<NoiseSpec> noises{{NoiseFamily::gaussian, 0.01, 0}};
  std::vector<Method> methods{Method::rgp_g, Method::rgp, Method::linear};
  GpSettings gp;
  bool tune = false;
  GridSpec grid;
  /// Above 1: rgp-g per connected area, first noise and missing level only.
  int areas = 1;
  /// Step between fine-grid points.
  int grid_stride = 1;
  DsseSettings dsse;

  void validate() const;
};

struct MapeRow {
  std::uint64_t seed = 0;
  NoiseFamily noise_family = NoiseFamily::gaussian;
  double noise_std = 0.0;
  double missing = 0.0;
  Method method = Method::linear;
  Quantity quantity = Quantity::p;
  double mape = 0.0;
};

struct DsseRow {
  std::uint64_t seed = 0;
  Method source = Method::linear;
  double fad = 0.0;
  Quantity quantity = Quantity::p;
  double mae = 0.0;
};

/// One estimated state matrix next to its truth, P and Q in kW / kvar.
struct DsseSnapshot {
  std::uint64_t seed = 0;
  Method source = Method::linear;
  double fad = 0.0;
  double time = 0.0;
  Eigen::MatrixXd estimate;  // m x 5
  Eigen::MatrixXd truth;     // m x 5
};

struct AreaRow {
  std::uint64_t seed = 0;
  int area = 0;
  int nodes = 0;
  double mape = 0.0;
};

struct TunedRow {
  std::uint64_t seed = 0;
  CvCandidate best;
};

struct ExperimentReport {
  std::vector<MapeRow> mape;
  std::vector<DsseRow> dsse;
  std::vector<DsseSnapshot> dsse_states;
  std::vector<AreaRow> areas;
  std::vector<TunedRow> tuned;

  /// Mean over seeds of the matching rows; NaN when none match.
  double mean_mape(Method method, Quantity q, double missing, NoiseFamily family, double noise_std) const;
  double mean_dsse(Method source, Quantity q, double fad) const;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

/// report.json plus tables/*.csv under dir.
void write_report(const ExperimentReport& report, const ExperimentConfig& config,
                  const std::filesystem::path& dir, const OutputStamp& stamp);

/// One imputation run of the main sweep, exposed for tests and tools.
struct SeedSetup {
  RadialFeeder feeder;
  FeederGraph graph;
  GraphFilter filter;
  Truth truth;
  std::vector<double> fine_grid;
};
SeedSetup prepare_seed(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace gridrecon
