#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gridrecon/gp_batch.hpp"
#include "gridrecon/gp_recursive.hpp"
#include "gridrecon/graph.hpp"
#include "gridrecon/kernel.hpp"
#include "gridrecon/measurements.hpp"

namespace gridrecon {

enum class Method { full_gp, rgp, rgp_g, linear };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

/// What the linear baseline does for a series with no observations at all.
enum class EmptySeriesPolicy { error, task_mean };

struct ImputeOptions {
  NoiseMode noise_mode = NoiseMode::standard;
  Schedule schedule = Schedule::interpolation;
  CovarianceOutput covariance = CovarianceOutput::diagonal;
  int basis_n_max = 96;
  /// Explicit basis; overrides basis_n_max placement when set.
  std::optional<BasisConfig> basis;
  /// Z-score every (task, node) series on its observed entries before the GP.
  bool standardize = true;
  bool verify_theorems = false;
  EmptySeriesPolicy empty_series = EmptySeriesPolicy::task_mean;
  /// Receives the trace log of recursive sessions (in standardized units).
  std::vector<TracePoint>* trace_sink = nullptr;
};

/// Per-slot affine map y -> (y - offset) / scale fitted on observed entries.
/// Slots with fewer than two observations borrow the pooled statistics of their task.
struct Standardizer {
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;

  static Standardizer fit(const BatchDataset& data);
  static Standardizer identity(int slots);
  BatchDataset apply(const BatchDataset& data) const;
  void restore(ImputationResult& result) const;
};

/// Runs one imputation method end to end on the fine grid.
ImputationResult impute(Method method, const BatchDataset& data, const std::vector<double>& fine_grid,
                        const Hyperparameters& hp, const TaskKernel& task, const GraphFilter* filter,
                        const ImputeOptions& options = {});

}  // namespace gridrecon
