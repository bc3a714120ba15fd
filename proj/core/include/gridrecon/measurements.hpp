#pragma once

#include <vector>

#include <Eigen/Dense>

namespace gridrecon {

/// How the noise variance enters cross-covariance blocks and how missing
/// entries are handled.
///  - standard: latent-function posterior; noise only on observed self-covariance;
///    missing entries are dropped from the linear algebra.
///  - paper_literal: sigma_e^2 I added to every square block, cross blocks
///    included; missing entries are zero-filled (batch) or substituted by
///    the predicted mean with an unmasked gain (recursive).
enum class NoiseMode { standard, paper_literal };

enum class CovarianceOutput { none, diagonal, full };

/// One timestamp's stacked observations, laid out task-major: index = task * M + node.
struct MeasurementBatch {
  double time = 0.0;
  Eigen::VectorXd values;
  std::vector<bool> mask;  // true = observed

  int observed_count() const;
  bool any_observed() const { return observed_count() > 0; }
};

struct BatchDataset {
  int tasks = 0;
  int nodes = 0;
  std::vector<double> times;
  std::vector<MeasurementBatch> observations;

  int slots() const { return tasks * nodes; }
  std::size_t size() const { return times.size(); }
  int observed_count() const;

  /// Throws DimensionMismatch / InvalidSpec when the invariants do not hold.
  void validate() const;
};

/// Builds an empty dataset (all entries masked) on the given times.
BatchDataset empty_dataset(int tasks, int nodes, std::vector<double> times);

/// Posterior over (task, node, query time) in the global order
/// task * (M * nq) + node * nq + q.
struct ImputationResult {
  int tasks = 0;
  int nodes = 0;
  std::vector<double> query_times;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;    // marginal variances, always filled unless CovarianceOutput::none
  Eigen::MatrixXd covariance;  // empty unless CovarianceOutput::full

  Eigen::Index query_count() const { return static_cast<Eigen::Index>(query_times.size()); }
  Eigen::Index index(int task, int node, Eigen::Index q) const {
    return (static_cast<Eigen::Index>(task) * nodes + node) * query_count() + q;
  }
  double mean_at(int task, int node, Eigen::Index q) const { return mean(index(task, node, q)); }
  /// The (task, node) series over all query times.
  Eigen::VectorXd series(int task, int node) const {
    return mean.segment(index(task, node, 0), query_count());
  }
};

/// Clamps tiny negative diagonals produced by round-off (after the >= -1e-8 check).
void clamp_variances(ImputationResult& result);

}  // namespace gridrecon
