#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gridrecon/kernel.hpp"
#include "gridrecon/measurements.hpp"

namespace gridrecon {

struct BatchOptions {
  NoiseMode noise_mode = NoiseMode::standard;
  CovarianceOutput covariance = CovarianceOutput::diagonal;
  /// M x M spatial block; identity when absent (the plain multi-task GP).
  std::optional<Eigen::MatrixXd> spatial;
};

/// One scalar measurement slot of a dataset.
struct ObservationEntry {
  int task = 0;
  int node = 0;
  int time_index = 0;
  double value = 0.0;
};

/// The training system of the batch GP: entries in global order and their
/// covariance A (noise and jitter included).
struct BatchSystem {
  std::vector<ObservationEntry> entries;
  Eigen::VectorXd targets;
  Eigen::MatrixXd covariance;
};

/// Standard mode keeps observed entries only; paper-literal keeps every slot,
/// zero-filling the missing ones.
BatchSystem build_batch_system(const BatchDataset& data, const Hyperparameters& hp,
                               const TaskKernel& task, const BatchOptions& options);

/// Full multi-task GP conditional m* = D' A^-1 y, C* = F - D' A^-1 D.
/// Throws EmptyObservations, EmptyQuery, FactorizationFailure.
ImputationResult fit_predict_full(const BatchDataset& data, const std::vector<double>& query_times,
                                  const Hyperparameters& hp, const TaskKernel& task,
                                  const BatchOptions& options = {});

}  // namespace gridrecon
