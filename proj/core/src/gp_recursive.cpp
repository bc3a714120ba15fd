#include "gridrecon/gp_recursive.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>

#include "gridrecon/error.hpp"

namespace gridrecon {

struct RecursiveModel {
  RecursiveMode mode = RecursiveMode::rgp;
  NoiseMode noise_mode = NoiseMode::standard;
  bool verify = false;
  Hyperparameters hp;
  Eigen::MatrixXd space;       // S^2 or I_M
  Eigen::MatrixXd task_space;  // K_c (x) space, (d*M)^2
  std::vector<double> basis;
  Eigen::LLT<Eigen::MatrixXd> temporal;  // K(x, x) + jitter
  std::optional<Eigen::LLT<Eigen::MatrixXd>> literal_a;
  int d = 0;
  int m = 0;
  int n = 0;

  Eigen::Index slots() const { return static_cast<Eigen::Index>(d) * m; }
  Eigen::Index dim() const { return slots() * n; }
  bool literal() const { return noise_mode == NoiseMode::paper_literal; }
};

namespace {

std::atomic<std::uint64_t> next_session_id{1};

double nugget(const RecursiveModel& model) { return kJitterFactor * model.hp.signal_variance; }

/// k(basis, t) with the Gram jitter treated as a nugget: a time that coincides with a
/// basis time reproduces that basis value exactly (J = e_b, B = 0).
Eigen::VectorXd basis_cross(const RecursiveModel& model, double t) {
  Eigen::VectorXd k(model.n);
  for (int i = 0; i < model.n; ++i) {
    const double x = model.basis[static_cast<std::size_t>(i)];
    k(i) = rbf(x, t, model.hp) + (x == t ? nugget(model) : 0.0);
  }
  return k;
}

/// J, B and the pieces needed to apply them at one time t.
struct Projection {
  Eigen::MatrixXd j;   // slots x dim
  Eigen::MatrixXd b;   // slots x slots
  Eigen::VectorXd w;   // K~^-1 k, standard mode only (J = I (x) w')
  bool separable = false;
};

Eigen::MatrixXd literal_cross(const RecursiveModel& model, const Eigen::VectorXd& k) {
  Eigen::MatrixXd dmat = kron(model.task_space, k);  // dim x slots
  if (dmat.rows() == dmat.cols()) dmat.diagonal().array() += model.hp.noise_variance;
  return dmat;
}

Projection project(const RecursiveModel& model, double t) {
  const Eigen::VectorXd k = basis_cross(model, t);
  const double ktt = model.hp.signal_variance + nugget(model);
  Projection p;
  if (!model.literal()) {
    p.separable = true;
    p.w = model.temporal.solve(k);
    p.j = Eigen::MatrixXd::Zero(model.slots(), model.dim());
    for (Eigen::Index r = 0; r < model.slots(); ++r) p.j.row(r).segment(r * model.n, model.n) = p.w.transpose();
    p.b = model.task_space * (ktt - k.dot(p.w));
    return p;
  }
  const Eigen::MatrixXd dmat = literal_cross(model, k);
  p.j = model.literal_a->solve(dmat).transpose();
  Eigen::MatrixXd f = model.task_space * ktt;
  f.diagonal().array() += model.hp.noise_variance;
  p.b = f - p.j * dmat;
  return p;
}

/// J cov_f without materialising the dense product when J is separable.
Eigen::MatrixXd project_covariance(const RecursiveModel& model, const Projection& p,
                                   const Eigen::MatrixXd& cov) {
  if (!p.separable) return p.j * cov;
  Eigen::MatrixXd h(model.slots(), model.dim());
  for (Eigen::Index r = 0; r < model.slots(); ++r)
    h.row(r).noalias() = p.w.transpose() * cov.middleRows(r * model.n, model.n);
  return h;
}

Eigen::MatrixXd project_back(const RecursiveModel& model, const Projection& p, const Eigen::MatrixXd& h) {
  if (!p.separable) return h * p.j.transpose();
  Eigen::MatrixXd out(h.rows(), model.slots());
  for (Eigen::Index s = 0; s < model.slots(); ++s)
    out.col(s).noalias() = h.middleCols(s * model.n, model.n) * p.w;
  return out;
}

void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

void append_trace(RecursiveState& state, double t) {
  state.trace_log.push_back({state.step_count, t, state.cov_f.trace()});
}

}  // namespace

int RecursiveState::tasks() const { return model ? model->d : 0; }
int RecursiveState::nodes() const { return model ? model->m : 0; }
int RecursiveState::basis_size() const { return model ? model->n : 0; }

BasisConfig BasisConfig::uniform(double lo, double hi, int n) {
  require(n >= 2 && hi > lo, ErrorCode::InvalidBasis, "uniform basis needs n >= 2 and hi > lo");
  BasisConfig b;
  b.placement = BasisPlacement::uniform;
  b.times.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) b.times[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return b;
}

BasisConfig BasisConfig::explicit_times(std::vector<double> times) {
  BasisConfig b;
  b.placement = BasisPlacement::explicit_times;
  b.times = std::move(times);
  b.validate();
  return b;
}

BasisConfig BasisConfig::from_observations(const BatchDataset& data, int n_max, double lo, double hi) {
  require(n_max >= 2, ErrorCode::InvalidBasis, "n_max must be at least 2");
  std::set<double> seen;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.observations[i].any_observed() && data.times[i] >= lo && data.times[i] <= hi)
      seen.insert(data.times[i]);
  if (seen.size() >= 2 && static_cast<int>(seen.size()) <= n_max) {
    BasisConfig b;
    b.placement = BasisPlacement::observation_subset;
    b.times.assign(seen.begin(), seen.end());
    return b;
  }
  return uniform(lo, hi, n_max);
}

void BasisConfig::validate() const {
  require(times.size() >= 2, ErrorCode::InvalidBasis, "basis needs at least two times");
  for (std::size_t i = 1; i < times.size(); ++i)
    require(times[i] > times[i - 1], ErrorCode::InvalidBasis, "basis times must be strictly increasing");
}

RecursiveState init_state(RecursiveMode mode, int nodes, const BasisConfig& basis,
                          const Hyperparameters& hp, const TaskKernel& task,
                          const GraphFilter* filter, const RecursiveOptions& options) {
  basis.validate();
  hp.validate();
  require(nodes > 0, ErrorCode::DimensionMismatch, "node count must be positive");
  require((mode == RecursiveMode::rgp_g) == (filter != nullptr), ErrorCode::ModeFilterMismatch,
          mode == RecursiveMode::rgp_g ? "rgp-g requires a graph filter"
                                       : "rgp does not take a graph filter");

  auto model = std::make_shared<RecursiveModel>();
  model->mode = mode;
  model->noise_mode = options.noise_mode;
  model->verify = options.verify_theorems;
  model->hp = hp;
  model->d = task.tasks();
  model->m = nodes;
  model->n = basis.size();
  model->basis = basis.times;
  if (filter) {
    require(filter->node_count() == nodes, ErrorCode::DimensionMismatch,
            "graph filter size differs from node count");
    model->space = filter->matrix_s * filter->matrix_s;
    symmetrize(model->space);
  } else {
    model->space = Eigen::MatrixXd::Identity(nodes, nodes);
  }
  model->task_space = kron(task.matrix(), model->space);

  const Eigen::MatrixXd gram = kernel_matrix(basis.times, basis.times, hp);
  Eigen::MatrixXd jittered = gram;
  jittered.diagonal().array() += kJitterFactor * hp.signal_variance;
  model->temporal.compute(jittered);
  require(model->temporal.info() == Eigen::Success, ErrorCode::FactorizationFailure,
          "basis Gram matrix is not positive definite");

  RecursiveState state;
  state.mode = mode;
  state.frozen_prior = kron(model->task_space, jittered);
  if (model->literal()) {
    Eigen::MatrixXd a = state.frozen_prior;
    a.diagonal().array() += hp.noise_variance;
    model->literal_a.emplace(a);
    require(model->literal_a->info() == Eigen::Success, ErrorCode::FactorizationFailure,
            "basis covariance A is not positive definite");
  }
  state.mu_f = Eigen::VectorXd::Zero(model->dim());
  state.cov_f = state.frozen_prior;
  state.session_id = next_session_id.fetch_add(1);
  state.model = model;
  append_trace(state, basis.times.front());

  if (model->verify && filter && filter->alpha > 0.0 && nodes > 1) {
    const double without = task.matrix().trace() * nodes * jittered.trace();
    require(without > state.cov_f.trace(), ErrorCode::VerificationFailure,
            "prior trace with the graph filter is not below the trace without it");
  }
  return state;
}

StepPrediction infer_step(const RecursiveState& state, double t) {
  require(state.model != nullptr, ErrorCode::StaleStep, "state is not initialised");
  const RecursiveModel& model = *state.model;
  Projection p = project(model, t);

  StepPrediction pred;
  pred.time = t;
  pred.source_step = state.step_count;
  pred.session_id = state.session_id;
  pred.mu_p = p.j * state.mu_f;
  pred.projected_cov = project_covariance(model, p, state.cov_f);
  pred.cov_p = p.b + project_back(model, p, pred.projected_cov);
  symmetrize(pred.cov_p);
  pred.gain_j = std::move(p.j);
  pred.bridge_b = std::move(p.b);
  return pred;
}

RecursiveState update_step(RecursiveState state, const StepPrediction& pred,
                           const MeasurementBatch& batch) {
  require(state.model != nullptr, ErrorCode::StaleStep, "state is not initialised");
  const RecursiveModel& model = *state.model;
  require(batch.values.size() == model.slots() &&
              static_cast<Eigen::Index>(batch.mask.size()) == model.slots(),
          ErrorCode::DimensionMismatch, "batch does not carry d*M slots");
  require(pred.session_id == state.session_id && pred.source_step == state.step_count,
          ErrorCode::StaleStep, "prediction was not produced from this state");
  require(pred.time == batch.time, ErrorCode::StaleStep, "prediction time differs from batch time");

  const double trace_before = state.cov_f.trace();
  const double noise = model.hp.noise_variance;
  int observed = 0;

  if (!model.literal()) {
    std::vector<Eigen::Index> seen;
    for (Eigen::Index s = 0; s < model.slots(); ++s)
      if (batch.mask[static_cast<std::size_t>(s)]) seen.push_back(s);
    observed = static_cast<int>(seen.size());
    if (!seen.empty()) {
      const auto k = static_cast<Eigen::Index>(seen.size());
      Eigen::MatrixXd innovation_cov(k, k);
      Eigen::VectorXd innovation(k);
      Eigen::MatrixXd h(k, model.dim());
      for (Eigen::Index i = 0; i < k; ++i) {
        innovation(i) = batch.values(seen[static_cast<std::size_t>(i)]) - pred.mu_p(seen[static_cast<std::size_t>(i)]);
        h.row(i) = pred.projected_cov.row(seen[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < k; ++j)
          innovation_cov(i, j) = pred.cov_p(seen[static_cast<std::size_t>(i)], seen[static_cast<std::size_t>(j)]);
      }
      innovation_cov.diagonal().array() += noise;
      Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
      require(llt.info() == Eigen::Success, ErrorCode::FactorizationFailure,
              "innovation covariance is not positive definite");
      // mu += H' S^-1 e ; C -= H' S^-1 H with H = J_o C.
      state.mu_f.noalias() += h.transpose() * llt.solve(innovation);
      const Eigen::MatrixXd whitened = llt.matrixL().solve(h);
      state.cov_f.noalias() -= whitened.transpose() * whitened;
    }
  } else {
    Eigen::VectorXd y = batch.values;
    for (Eigen::Index s = 0; s < model.slots(); ++s) {
      if (batch.mask[static_cast<std::size_t>(s)]) ++observed;
      else y(s) = pred.mu_p(s);
    }
    Eigen::MatrixXd innovation_cov = pred.cov_p;
    innovation_cov.diagonal().array() += noise;
    Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
    require(llt.info() == Eigen::Success, ErrorCode::FactorizationFailure,
            "innovation covariance is not positive definite");
    state.mu_f.noalias() += pred.projected_cov.transpose() * llt.solve(y - pred.mu_p);
    const Eigen::MatrixXd whitened = llt.matrixL().solve(pred.projected_cov);
    state.cov_f.noalias() -= whitened.transpose() * whitened;
    symmetrize(state.cov_f);
  }

  for (Eigen::Index i = 0; i < state.cov_f.rows(); ++i) {
    const double v = state.cov_f(i, i);
    require(v >= -1e-8, ErrorCode::FactorizationFailure, "posterior variance became negative");
    if (v < 0.0) state.cov_f(i, i) = 0.0;
  }

  ++state.step_count;
  state.last_time = batch.time;
  append_trace(state, batch.time);

  if (model.verify) {
    const double after = state.trace_log.back().trace;
    if (observed > 0 || model.literal()) {
      require(after <= trace_before, ErrorCode::VerificationFailure,
              "trace of cov_f increased after an update");
    } else {
      require(after == trace_before, ErrorCode::VerificationFailure,
              "an all-missing batch changed cov_f");
    }
  }
  return state;
}

namespace {

ImputationResult evaluate(const RecursiveState& state, const std::vector<double>& query_times,
                          CovarianceOutput covariance) {
  require(state.model != nullptr, ErrorCode::StaleStep, "state is not initialised");
  require(!query_times.empty(), ErrorCode::EmptyQuery, "no query times");
  const RecursiveModel& model = *state.model;
  const auto nq = static_cast<Eigen::Index>(query_times.size());
  const Eigen::Index slots = model.slots();

  ImputationResult out;
  out.tasks = model.d;
  out.nodes = model.m;
  out.query_times = query_times;
  out.mean.resize(slots * nq);
  if (covariance != CovarianceOutput::none) out.variance.resize(slots * nq);

  const bool full = covariance == CovarianceOutput::full;
  Eigen::MatrixXd j_all;
  if (full) j_all = Eigen::MatrixXd::Zero(slots * nq, model.dim());

  for (Eigen::Index q = 0; q < nq; ++q) {
    const Projection p = project(model, query_times[static_cast<std::size_t>(q)]);
    if (p.separable) {
      for (Eigen::Index r = 0; r < slots; ++r) {
        const Eigen::Index idx = r * nq + q;
        out.mean(idx) = p.w.dot(state.mu_f.segment(r * model.n, model.n));
        if (covariance != CovarianceOutput::none) {
          const auto block = state.cov_f.block(r * model.n, r * model.n, model.n, model.n);
          out.variance(idx) = p.b(r, r) + p.w.dot(block * p.w);
        }
      }
    } else {
      const Eigen::VectorXd mean = p.j * state.mu_f;
      Eigen::VectorXd var;
      if (covariance != CovarianceOutput::none)
        var = p.b.diagonal() + (p.j * state.cov_f).cwiseProduct(p.j).rowwise().sum();
      for (Eigen::Index r = 0; r < slots; ++r) {
        out.mean(r * nq + q) = mean(r);
        if (covariance != CovarianceOutput::none) out.variance(r * nq + q) = var(r);
      }
    }
    if (full)
      for (Eigen::Index r = 0; r < slots; ++r) j_all.row(r * nq + q) = p.j.row(r);
  }

  if (full) {
    // B* = F* - J* D*, with D* the basis/query cross block.
    const Eigen::MatrixXd kq = kernel_matrix(model.basis, query_times, model.hp);  // n x nq
    const Eigen::MatrixXd kqq = kernel_matrix(query_times, query_times, model.hp);
    Eigen::MatrixXd cross = kron(model.task_space, kq);  // dim x slots*nq
    if (model.literal() && cross.rows() == cross.cols()) cross.diagonal().array() += model.hp.noise_variance;
    Eigen::MatrixXd prior = kron(model.task_space, kqq);
    if (model.literal()) prior.diagonal().array() += model.hp.noise_variance;
    out.covariance = prior - j_all * cross + j_all * state.cov_f * j_all.transpose();
    out.variance = out.covariance.diagonal();
  }
  clamp_variances(out);
  return out;
}

}  // namespace

ImputationResult interpolate(const RecursiveState& state, const std::vector<double>& query_times,
                             CovarianceOutput covariance) {
  return evaluate(state, query_times, covariance);
}

ImputationResult predict_ahead(const RecursiveState& state, const std::vector<double>& query_times,
                               CovarianceOutput covariance) {
  if (state.last_time) {
    for (double q : query_times)
      require(q > *state.last_time, ErrorCode::NonCausalQuery,
              "query time is not after the last processed batch");
  }
  return evaluate(state, query_times, covariance);
}

double enforce_covariance_health(RecursiveState& state) {
  const double asym = (state.cov_f - state.cov_f.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-10, ErrorCode::VerificationFailure, "cov_f is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(state.cov_f);
  const double min_eig = eig.eigenvalues().minCoeff();
  require(min_eig >= -1e-7, ErrorCode::VerificationFailure, "cov_f is not positive semidefinite");
  if (min_eig < 0.0) {
    const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
    state.cov_f = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
    symmetrize(state.cov_f);
  }
  return min_eig;
}

PriorTraces prior_traces(const BasisConfig& basis, const Hyperparameters& hp,
                         const TaskKernel& task, const GraphFilter& filter) {
  const double time_trace = jittered_gram(basis.times, hp).trace();
  const Eigen::MatrixXd s2 = filter.matrix_s * filter.matrix_s;
  PriorTraces t;
  t.without_graph = task.matrix().trace() * filter.node_count() * time_trace;
  t.with_graph = task.matrix().trace() * s2.trace() * time_trace;
  return t;
}

namespace {

void append_segment(ImputationResult& total, const ImputationResult& part,
                    const std::vector<Eigen::Index>& positions) {
  const Eigen::Index nq_total = total.query_count();
  const Eigen::Index nq_part = part.query_count();
  const Eigen::Index slots = static_cast<Eigen::Index>(total.tasks) * total.nodes;
  for (Eigen::Index r = 0; r < slots; ++r) {
    for (Eigen::Index q = 0; q < nq_part; ++q) {
      const Eigen::Index dst = r * nq_total + positions[static_cast<std::size_t>(q)];
      total.mean(dst) = part.mean(r * nq_part + q);
      if (total.variance.size() > 0) total.variance(dst) = part.variance(r * nq_part + q);
    }
  }
}

}  // namespace

SessionResult run_session(RecursiveMode mode, const BatchDataset& dataset, const BasisConfig& basis,
                          Schedule schedule, const std::vector<double>& fine_grid,
                          const Hyperparameters& hp, const TaskKernel& task,
                          const GraphFilter* filter, const RecursiveOptions& options,
                          const SessionObserver* observer) {
  dataset.validate();
  require(task.tasks() == dataset.tasks, ErrorCode::DimensionMismatch, "task kernel size != d");
  require(!fine_grid.empty(), ErrorCode::EmptyQuery, "fine grid is empty");
  require(std::is_sorted(fine_grid.begin(), fine_grid.end()), ErrorCode::InvalidSpec,
          "fine grid must be sorted");

  SessionResult out;
  RecursiveState state = init_state(mode, dataset.nodes, basis, hp, task, filter, options);

  ImputationResult merged;
  merged.tasks = dataset.tasks;
  merged.nodes = dataset.nodes;
  merged.query_times = fine_grid;
  merged.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dataset.slots()) * merged.query_count());
  merged.variance = merged.mean;
  std::size_t next_grid = 0;

  auto emit_until = [&](double limit, bool inclusive) {
    std::vector<double> times;
    std::vector<Eigen::Index> positions;
    while (next_grid < fine_grid.size() &&
           (inclusive ? fine_grid[next_grid] <= limit : fine_grid[next_grid] < limit)) {
      times.push_back(fine_grid[next_grid]);
      positions.push_back(static_cast<Eigen::Index>(next_grid));
      ++next_grid;
    }
    if (times.empty()) return;
    if (observer && observer->on_emit) observer->on_emit(times, state.last_time);
    append_segment(merged, predict_ahead(state, times), positions);
  };

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& batch = dataset.observations[i];
    if (schedule == Schedule::prediction) emit_until(batch.time, true);
    if (observer && observer->on_batch) observer->on_batch(batch.time);
    const StepPrediction pred = infer_step(state, batch.time);
    state = update_step(std::move(state), pred, batch);

    StepSummary summary;
    summary.time = batch.time;
    summary.observed = batch.observed_count();
    summary.mu_p = pred.mu_p;
    summary.var_p = pred.cov_p.diagonal();
    summary.trace_after = state.trace_log.back().trace;
    out.steps.push_back(std::move(summary));
  }

  if (schedule == Schedule::prediction) {
    emit_until(std::numeric_limits<double>::infinity(), true);
    out.result = std::move(merged);
  } else {
    out.result = interpolate(state, fine_grid, options.covariance);
  }
  if (options.verify_theorems) enforce_covariance_health(state);
  out.trace_log = state.trace_log;
  out.final_state = std::move(state);
  return out;
}

}  // namespace gridrecon
