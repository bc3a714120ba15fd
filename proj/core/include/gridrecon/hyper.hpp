#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gridrecon/graph.hpp"
#include "gridrecon/imputation.hpp"
#include "gridrecon/kernel.hpp"
#include "gridrecon/measurements.hpp"

namespace gridrecon {

struct GridSpec {
  std::vector<double> lengthscale_grid{2.0, 5.0, 10.0, 20.0, 40.0};
  std::vector<double> signal_var_grid{0.1, 0.5, 1.0, 2.0};
  std::vector<double> noise_var_grid{1e-4, 1e-3, 1e-2};
  std::vector<double> task_corr_grid{0.0, 0.3, 0.6};
  int folds = 5;

  void validate() const;
};

struct CvCandidate {
  Hyperparameters hp;
  double task_corr = 0.0;

  /// Canonical order: lengthscale, signal variance, noise variance, task correlation.
  friend bool operator<(const CvCandidate& a, const CvCandidate& b);
  friend bool operator==(const CvCandidate& a, const CvCandidate& b) = default;
};

struct CvRow {
  CvCandidate candidate;
  double mean_mape = 0.0;
  std::vector<double> fold_mape;
  /// False when the candidate hit a factorisation failure in some fold.
  bool ok = true;
};

struct CvReport {
  CvCandidate best;
  std::vector<CvRow> table;  // canonical candidate order
  std::uint64_t seed = 0;
};

/// Observed time indices held out (test) and the training dataset of one fold.
using FoldHook = std::function<void(int fold, const BatchDataset& train, const std::vector<std::size_t>& test_times)>;

struct CvOptions {
  ImputeOptions impute;
  FoldHook on_fold;
};

/// k-fold cross-validation over observed time indices. MAPE is scored on the
/// held-out observed entries. Throws InsufficientData, AllCandidatesFailed.
CvReport cross_validate(const BatchDataset& data, const GridSpec& grid, Method method, const GraphFilter* filter,
                        std::uint64_t seed, const CvOptions& options = {});

/// Log evidence of the observed entries under the standard-mode prior.
/// Throws EmptyObservations, FactorizationFailure.
double log_marginal_likelihood(const BatchDataset& data, const Hyperparameters& hp, const TaskKernel& task,
                               const GraphFilter* filter = nullptr);

}  // namespace gridrecon
