#include "gridrecon/hyper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <tuple>

#include "gridrecon/error.hpp"
#include "gridrecon/gp_batch.hpp"
#include "gridrecon/rng.hpp"
#include "gridrecon/simlab.hpp"

namespace gridrecon {

bool operator<(const CvCandidate& a, const CvCandidate& b) {
  return std::tie(a.hp.lengthscale, a.hp.signal_variance, a.hp.noise_variance, a.task_corr) <
         std::tie(b.hp.lengthscale, b.hp.signal_variance, b.hp.noise_variance, b.task_corr);
}

void GridSpec::validate() const {
  require(!lengthscale_grid.empty() && !signal_var_grid.empty() && !noise_var_grid.empty() &&
              !task_corr_grid.empty(),
          ErrorCode::InvalidSpec, "every grid must be nonempty");
  for (double v : lengthscale_grid) require(v > 0.0, ErrorCode::InvalidSpec, "lengthscales must be positive");
  for (double v : signal_var_grid) require(v > 0.0, ErrorCode::InvalidSpec, "signal variances must be positive");
  for (double v : noise_var_grid) require(v > 0.0, ErrorCode::InvalidSpec, "noise variances must be positive");
  for (double v : task_corr_grid)
    require(v > -1.0 && v < 1.0, ErrorCode::InvalidSpec, "task correlations must be in (-1, 1)");
  require(folds >= 2, ErrorCode::InvalidSpec, "folds must be at least 2");
}

namespace {

std::vector<CvCandidate> candidates(const GridSpec& grid) {
  std::vector<CvCandidate> out;
  for (double l : grid.lengthscale_grid)
    for (double s : grid.signal_var_grid)
      for (double n : grid.noise_var_grid)
        for (double r : grid.task_corr_grid) out.push_back({{l, s, n}, r});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

CvReport cross_validate(const BatchDataset& data, const GridSpec& grid, Method method, const GraphFilter* filter,
                        std::uint64_t seed, const CvOptions& options) {
  grid.validate();
  data.validate();
  require(method != Method::linear, ErrorCode::InvalidSpec, "cross-validation tunes GP methods only");

  std::vector<std::size_t> observed;
  for (std::size_t k = 0; k < data.size(); ++k)
    if (data.observations[k].any_observed()) observed.push_back(k);
  require(static_cast<int>(observed.size()) >= grid.folds, ErrorCode::InsufficientData,
          "fewer observed time points than folds");

  // Fisher-Yates on the fold stream, then round-robin assignment.
  auto rng = RngStreams(seed).stream("fold");
  for (std::size_t i = observed.size() - 1; i > 0; --i) {
    const auto j = std::min<std::size_t>(i, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1)));
    std::swap(observed[i], observed[j]);
  }
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(grid.folds));
  for (std::size_t i = 0; i < observed.size(); ++i) folds[i % folds.size()].push_back(observed[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());

  std::vector<BatchDataset> train(folds.size(), data);
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (std::size_t k : folds[f]) std::fill(train[f].observations[k].mask.begin(), train[f].observations[k].mask.end(), false);

  CvReport report;
  report.seed = seed;
  const auto grid_candidates = candidates(grid);
  for (const auto& cand : grid_candidates) {
    CvRow row{cand, 0.0, {}, true};
    const TaskKernel task = data.tasks == 1 ? TaskKernel::identity(1) : TaskKernel::correlated(data.tasks, cand.task_corr);
    for (std::size_t f = 0; f < folds.size() && row.ok; ++f) {
      if (options.on_fold) options.on_fold(static_cast<int>(f), train[f], folds[f]);
      std::vector<double> query;
      for (std::size_t k : folds[f]) query.push_back(data.times[k]);
      try {
        const ImputationResult r = impute(method, train[f], query, cand.hp, task, filter, options.impute);
        std::vector<double> est, truth;
        for (std::size_t qi = 0; qi < folds[f].size(); ++qi) {
          const auto& batch = data.observations[folds[f][qi]];
          for (int a = 0; a < data.tasks; ++a)
            for (int b = 0; b < data.nodes; ++b) {
              const auto slot = static_cast<std::size_t>(a * data.nodes + b);
              if (!batch.mask[slot]) continue;
              est.push_back(r.mean_at(a, b, static_cast<Eigen::Index>(qi)));
              truth.push_back(batch.values(static_cast<Eigen::Index>(slot)));
            }
        }
        row.fold_mape.push_back(mape(est, truth));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::FactorizationFailure && e.code() != ErrorCode::SingularSystem) throw;
        row.ok = false;
      }
    }
    row.mean_mape = row.ok ? std::accumulate(row.fold_mape.begin(), row.fold_mape.end(), 0.0) /
                                 static_cast<double>(row.fold_mape.size())
                           : std::numeric_limits<double>::infinity();
    report.table.push_back(std::move(row));
  }

  const CvRow* best = nullptr;
  for (const auto& row : report.table)
    if (row.ok && (best == nullptr || row.mean_mape < best->mean_mape)) best = &row;
  if (best == nullptr) fail(ErrorCode::AllCandidatesFailed, "every candidate failed to factorise");
  report.best = best->candidate;
  return report;
}

double log_marginal_likelihood(const BatchDataset& data, const Hyperparameters& hp, const TaskKernel& task,
                               const GraphFilter* filter) {
  BatchOptions options;
  if (filter != nullptr) options.spatial = Eigen::MatrixXd(filter->matrix_s * filter->matrix_s);
  const BatchSystem system = build_batch_system(data, hp, task, options);
  require(!system.entries.empty(), ErrorCode::EmptyObservations, "no observed entries");
  const Eigen::LLT<Eigen::MatrixXd> llt(system.covariance);
  if (llt.info() != Eigen::Success) fail(ErrorCode::FactorizationFailure, "evidence covariance is not positive definite");
  const Eigen::VectorXd alpha = llt.solve(system.targets);
  const Eigen::MatrixXd& l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const auto n = static_cast<double>(system.targets.size());
  return -0.5 * system.targets.dot(alpha) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace gridrecon
