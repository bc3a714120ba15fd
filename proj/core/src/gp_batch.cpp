#include "gridrecon/gp_batch.hpp"

#include <algorithm>

#include "gridrecon/error.hpp"

namespace gridrecon {

namespace {

Eigen::MatrixXd spatial_block(const BatchDataset& data, const BatchOptions& options) {
  if (!options.spatial) return Eigen::MatrixXd::Identity(data.nodes, data.nodes);
  require(options.spatial->rows() == data.nodes && options.spatial->cols() == data.nodes,
          ErrorCode::DimensionMismatch, "spatial block must be M x M");
  return *options.spatial;
}

}  // namespace

BatchSystem build_batch_system(const BatchDataset& data, const Hyperparameters& hp,
                               const TaskKernel& task, const BatchOptions& options) {
  data.validate();
  hp.validate();
  require(task.tasks() == data.tasks, ErrorCode::DimensionMismatch, "task kernel size != d");
  const bool literal = options.noise_mode == NoiseMode::paper_literal;
  const Eigen::MatrixXd space = spatial_block(data, options);
  const Eigen::MatrixXd& kc = task.matrix();

  BatchSystem sys;
  for (int a = 0; a < data.tasks; ++a) {
    for (int b = 0; b < data.nodes; ++b) {
      const int slot = a * data.nodes + b;
      for (std::size_t t = 0; t < data.size(); ++t) {
        const auto& batch = data.observations[t];
        const bool seen = batch.mask[static_cast<std::size_t>(slot)];
        if (!seen && !literal) continue;
        sys.entries.push_back({a, b, static_cast<int>(t), seen ? batch.values(slot) : 0.0});
      }
    }
  }
  require(data.observed_count() > 0, ErrorCode::EmptyObservations, "no observed entries");

  const auto n = static_cast<Eigen::Index>(sys.entries.size());
  const Eigen::MatrixXd kt = jittered_gram(data.times, hp);
  sys.targets.resize(n);
  sys.covariance.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& ej = sys.entries[static_cast<std::size_t>(j)];
    sys.targets(j) = ej.value;
    for (Eigen::Index i = j; i < n; ++i) {
      const auto& ei = sys.entries[static_cast<std::size_t>(i)];
      const double v = kc(ei.task, ej.task) * space(ei.node, ej.node) * kt(ei.time_index, ej.time_index);
      sys.covariance(i, j) = v;
      sys.covariance(j, i) = v;
    }
  }
  sys.covariance.diagonal().array() += hp.noise_variance;
  return sys;
}

ImputationResult fit_predict_full(const BatchDataset& data, const std::vector<double>& query_times,
                                  const Hyperparameters& hp, const TaskKernel& task,
                                  const BatchOptions& options) {
  require(!query_times.empty(), ErrorCode::EmptyQuery, "no query times");
  const BatchSystem sys = build_batch_system(data, hp, task, options);
  const bool literal = options.noise_mode == NoiseMode::paper_literal;
  const Eigen::MatrixXd space = spatial_block(data, options);
  const Eigen::MatrixXd& kc = task.matrix();

  Eigen::LLT<Eigen::MatrixXd> llt(sys.covariance);
  require(llt.info() == Eigen::Success, ErrorCode::FactorizationFailure,
          "training covariance is not positive definite");
  const Eigen::VectorXd weights = llt.solve(sys.targets);

  const auto nq = static_cast<Eigen::Index>(query_times.size());
  const Eigen::MatrixXd kx = kernel_matrix(data.times, query_times, hp);  // T x nq
  const Eigen::MatrixXd kqq = kernel_matrix(query_times, query_times, hp);
  // The literal form adds sigma_e^2 I to D only when D is square.
  const bool cross_noise = literal && static_cast<Eigen::Index>(data.size()) == nq;

  ImputationResult out;
  out.tasks = data.tasks;
  out.nodes = data.nodes;
  out.query_times = query_times;
  const Eigen::Index total = static_cast<Eigen::Index>(data.slots()) * nq;
  out.mean.resize(total);

  auto cross = [&](const ObservationEntry& e, int a, int b, Eigen::Index q) {
    double v = kc(e.task, a) * space(e.node, b) * kx(e.time_index, q);
    if (cross_noise && e.task == a && e.node == b && e.time_index == q) v += hp.noise_variance;
    return v;
  };

  // D is formed one query column block at a time to bound memory.
  const auto n = static_cast<Eigen::Index>(sys.entries.size());
  const bool want_full = options.covariance == CovarianceOutput::full;
  const bool want_var = options.covariance != CovarianceOutput::none;
  Eigen::MatrixXd whitened_all;
  if (want_full) whitened_all.resize(n, total);
  if (want_var) out.variance.resize(total);

  Eigen::MatrixXd d_block(n, nq);
  for (int a = 0; a < data.tasks; ++a) {
    for (int b = 0; b < data.nodes; ++b) {
      for (Eigen::Index q = 0; q < nq; ++q)
        for (Eigen::Index i = 0; i < n; ++i) d_block(i, q) = cross(sys.entries[static_cast<std::size_t>(i)], a, b, q);
      const Eigen::Index base = out.index(a, b, 0);
      out.mean.segment(base, nq).noalias() = d_block.transpose() * weights;
      if (!want_var) continue;
      Eigen::MatrixXd w = llt.matrixL().solve(d_block);
      double prior = kc(a, a) * space(b, b) * hp.signal_variance;
      if (literal) prior += hp.noise_variance;
      out.variance.segment(base, nq) =
          (Eigen::VectorXd::Constant(nq, prior) - w.colwise().squaredNorm().transpose());
      if (want_full) whitened_all.middleCols(base, nq) = w;
    }
  }

  if (want_full) {
    const Eigen::MatrixXd prior = kron(kron(kc, space), kqq);
    out.covariance = prior;
    if (literal) out.covariance.diagonal().array() += hp.noise_variance;
    out.covariance.noalias() -= whitened_all.transpose() * whitened_all;
  }
  clamp_variances(out);
  return out;
}

}  // namespace gridrecon
