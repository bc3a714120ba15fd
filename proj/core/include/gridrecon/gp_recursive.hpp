#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gridrecon/graph.hpp"
#include "gridrecon/kernel.hpp"
#include "gridrecon/measurements.hpp"

namespace gridrecon {

/// rgp: spatial block I_M. rgp_g: spatial block S^2 from the graph filter.
enum class RecursiveMode { rgp, rgp_g };

enum class BasisPlacement { uniform, observation_subset, explicit_times };

struct BasisConfig {
  std::vector<double> times;
  BasisPlacement placement = BasisPlacement::explicit_times;

  static BasisConfig uniform(double lo, double hi, int n);
  static BasisConfig explicit_times(std::vector<double> times);
  /// Union of observation times inside [lo, hi]; falls back to n_max uniform
  /// points when there are more than n_max of them (or fewer than two).
  static BasisConfig from_observations(const BatchDataset& data, int n_max, double lo, double hi);

  int size() const { return static_cast<int>(times.size()); }
  void validate() const;
};

struct RecursiveOptions {
  NoiseMode noise_mode = NoiseMode::standard;
  /// Runs the trace and covariance-health assertions on every step.
  bool verify_theorems = false;
  /// Output of the interpolation schedule; prediction segments carry marginals only.
  CovarianceOutput covariance = CovarianceOutput::diagonal;
};

/// Factorisations shared by every step of a session. Built once by init_state.
struct RecursiveModel;

struct TracePoint {
  long step = 0;
  double time = 0.0;
  double trace = 0.0;
};

/// Running posterior of the basis function f over (task, node, basis time).
/// Single writer; copies are independent snapshots.
struct RecursiveState {
  RecursiveMode mode = RecursiveMode::rgp;
  Eigen::VectorXd mu_f;
  Eigen::MatrixXd cov_f;
  Eigen::MatrixXd frozen_prior;
  long step_count = 0;
  std::optional<double> last_time;
  std::vector<TracePoint> trace_log;
  std::uint64_t session_id = 0;
  std::shared_ptr<const RecursiveModel> model;

  int tasks() const;
  int nodes() const;
  int basis_size() const;
  double trace() const { return cov_f.trace(); }
};

/// Inference-step output at one time t.
struct StepPrediction {
  double time = 0.0;
  Eigen::VectorXd mu_p;    // d*M
  Eigen::MatrixXd cov_p;   // (d*M)^2
  Eigen::MatrixXd gain_j;  // (d*M) x (d*M*n)
  Eigen::MatrixXd bridge_b;
  Eigen::MatrixXd projected_cov;  // J cov_f, reused by the update
  long source_step = 0;
  std::uint64_t session_id = 0;
};

/// Throws ModeFilterMismatch when rgp_g lacks a filter or rgp is given one.
RecursiveState init_state(RecursiveMode mode, int nodes, const BasisConfig& basis, const Hyperparameters& hp,
                          const TaskKernel& task, const GraphFilter* filter,
                          const RecursiveOptions& options = {});

StepPrediction infer_step(const RecursiveState& state, double t);

/// Kalman-style update with the batch observed at pred.time.
/// Throws DimensionMismatch, StaleStep.
RecursiveState update_step(RecursiveState state, const StepPrediction& pred,
                           const MeasurementBatch& batch);

ImputationResult interpolate(const RecursiveState& state, const std::vector<double>& query_times,
                             CovarianceOutput covariance = CovarianceOutput::diagonal);

/// interpolate() restricted to times strictly after the last processed batch.
/// Throws NonCausalQuery.
ImputationResult predict_ahead(const RecursiveState& state, const std::vector<double>& query_times,
                               CovarianceOutput covariance = CovarianceOutput::diagonal);

/// Eigen-decomposes cov_f, fails below -1e-7 and clamps negative eigenvalues to 0.
/// Returns the minimum eigenvalue seen before clamping.
double enforce_covariance_health(RecursiveState& state);

/// trace((K_c (x) I) (x) K) and trace((K_c (x) S^2) (x) K) from block traces.
struct PriorTraces {
  double without_graph = 0.0;
  double with_graph = 0.0;
};
PriorTraces prior_traces(const BasisConfig& basis, const Hyperparameters& hp,
                         const TaskKernel& task, const GraphFilter& filter);

enum class Schedule { interpolation, prediction };

struct StepSummary {
  double time = 0.0;
  int observed = 0;
  Eigen::VectorXd mu_p;
  Eigen::VectorXd var_p;
  double trace_after = 0.0;
};

/// Hooks for instrumented replay.
struct SessionObserver {
  std::function<void(double batch_time)> on_batch;
  /// Called before each emission with the query times and the last consumed batch time.
  std::function<void(const std::vector<double>& query_times, std::optional<double> last_batch)> on_emit;
};

struct SessionResult {
  ImputationResult result;
  std::vector<TracePoint> trace_log;
  std::vector<StepSummary> steps;
  RecursiveState final_state;
};

SessionResult run_session(RecursiveMode mode, const BatchDataset& dataset, const BasisConfig& basis,
                          Schedule schedule, const std::vector<double>& fine_grid,
                          const Hyperparameters& hp, const TaskKernel& task,
                          const GraphFilter* filter, const RecursiveOptions& options = {},
                          const SessionObserver* observer = nullptr);

}  // namespace gridrecon
