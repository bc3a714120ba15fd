#include "gridrecon/measurements.hpp"

#include <algorithm>
#include <cmath>

#include "gridrecon/error.hpp"

namespace gridrecon {

int MeasurementBatch::observed_count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

int BatchDataset::observed_count() const {
  int n = 0;
  for (const auto& b : observations) n += b.observed_count();
  return n;
}

void BatchDataset::validate() const {
  require(tasks > 0 && nodes > 0, ErrorCode::DimensionMismatch, "dataset needs tasks and nodes");
  require(times.size() == observations.size(), ErrorCode::DimensionMismatch,
          "one batch per timestamp required");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0) {
      require(times[i] > times[i - 1], ErrorCode::InvalidSpec, "times must be strictly increasing");
    }
    const auto& b = observations[i];
    require(b.values.size() == slots() && static_cast<int>(b.mask.size()) == slots(),
            ErrorCode::DimensionMismatch, "batch does not carry d*M slots");
    require(b.time == times[i], ErrorCode::InvalidSpec, "batch time differs from dataset time");
    for (int s = 0; s < slots(); ++s) {
      if (b.mask[static_cast<std::size_t>(s)]) {
        require(std::isfinite(b.values(s)), ErrorCode::InvalidSpec, "observed value is not finite");
      }
    }
  }
}

BatchDataset empty_dataset(int tasks, int nodes, std::vector<double> times) {
  BatchDataset d;
  d.tasks = tasks;
  d.nodes = nodes;
  d.times = std::move(times);
  d.observations.reserve(d.times.size());
  for (double t : d.times) {
    MeasurementBatch b;
    b.time = t;
    b.values = Eigen::VectorXd::Zero(tasks * nodes);
    b.mask.assign(static_cast<std::size_t>(tasks * nodes), false);
    d.observations.push_back(std::move(b));
  }
  return d;
}

void clamp_variances(ImputationResult& result) {
  if (result.variance.size() > 0) {
    require(result.variance.minCoeff() >= -1e-8, ErrorCode::FactorizationFailure,
            "posterior variance is negative beyond round-off");
    result.variance = result.variance.cwiseMax(0.0);
  }
  if (result.covariance.size() > 0) {
    result.covariance = 0.5 * (result.covariance + result.covariance.transpose()).eval();
    for (Eigen::Index i = 0; i < result.covariance.rows(); ++i)
      result.covariance(i, i) = std::max(result.covariance(i, i), 0.0);
  }
}

}  // namespace gridrecon
