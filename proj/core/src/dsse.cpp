#include "gridrecon/dsse.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "gridrecon/error.hpp"
#include "gridrecon/rng.hpp"

namespace gridrecon {

namespace {

/// Linear power-flow coupling as r = A vec(X) - b with vec column-major (m x 5).
struct Coupling {
  Eigen::MatrixXd a;  // 3m x 5m
  Eigen::VectorXd b;  // 3m
};

Coupling make_coupling(const LinearPFModel& pf) {
  const int m = pf.phases();
  Coupling c;
  c.a = Eigen::MatrixXd::Zero(3 * m, 5 * m);
  const Eigen::MatrixXd mr = pf.m_matrix.real(), mi = pf.m_matrix.imag();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
  c.a.block(0, 0, m, 2 * m) = -mr;
  c.a.block(m, 0, m, 2 * m) = -mi;
  c.a.block(2 * m, 0, m, 2 * m) = -pf.k_matrix;
  c.a.block(0, 2 * m, m, m) = id;
  c.a.block(m, 3 * m, m, m) = id;
  c.a.block(2 * m, 4 * m, m, m) = id;
  c.b.resize(3 * m);
  c.b << pf.v0.real(), pf.v0.imag(), pf.magnitude_offset;
  return c;
}

/// (V (x) I_m): maps vec(U) to vec(U V').
Eigen::MatrixXd kronecker_lift(const Eigen::MatrixXd& v, Eigen::Index m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows() * m, v.cols() * m);
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      out.block(i * m, j * m, m, m).diagonal().setConstant(v(i, j));
  return out;
}

Eigen::Map<const Eigen::VectorXd> flat(const Eigen::MatrixXd& x) { return {x.data(), x.size()}; }

struct Objective {
  const DsseProblem& problem;
  const Coupling& coupling;
  double mu;

  double smooth(const Eigen::MatrixXd& x) const {
    const double fit = project_observed(x - problem.z, problem.omega).squaredNorm();
    double pf = 0.0;
    if (problem.lambda_pf > 0.0) pf = (coupling.a * flat(x) - coupling.b).squaredNorm();
    return mu * fit + problem.lambda_pf * pf;
  }
  double total(const Eigen::MatrixXd& x) const { return nuclear_norm(x) + smooth(x); }
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd g = 2.0 * mu * project_observed(x - problem.z, problem.omega);
    if (problem.lambda_pf > 0.0) {
      const Eigen::VectorXd r = coupling.a * flat(x) - coupling.b;
      const Eigen::VectorXd gv = 2.0 * problem.lambda_pf * (coupling.a.transpose() * r);
      g += Eigen::Map<const Eigen::MatrixXd>(gv.data(), x.rows(), x.cols());
    }
    return g;
  }
};

Eigen::MatrixXd singular_value_threshold(const Eigen::MatrixXd& x, double tau) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = (svd.singularValues().array() - tau).cwiseMax(0.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

struct InnerResult {
  Eigen::MatrixXd x;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log;
};

/// Monotone FISTA on |X|_* + smooth(X).
InnerResult proximal_descent(const Objective& obj, double lipschitz, Eigen::MatrixXd start,
                             const SolverOptions& options) {
  const double step = 1.0 / lipschitz;
  InnerResult r;
  Eigen::MatrixXd x = std::move(start), x_prev = x, y = x;
  double fx = obj.total(x);
  double t = 1.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Eigen::MatrixXd z = singular_value_threshold(y - step * obj.gradient(y), step);
    const double change = (z - y).norm() / std::max(1.0, y.norm());
    const double fz = obj.total(z);
    x_prev = x;
    if (fz <= fx) {
      x = z;
      fx = fz;
    }
    r.log.push_back(fx);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;
    r.iterations = it;
    if (change < options.tolerance) {
      r.converged = true;
      break;
    }
  }
  r.x = std::move(x);
  return r;
}

/// Levenberg-Marquardt on the smooth objective over X = U W from one start.
struct FactorFit {
  Eigen::MatrixXd x;
  double value = 0.0;
};

FactorFit fit_factor_model(const Objective& obj, const Coupling& coupling, Eigen::MatrixXd u, Eigen::MatrixXd w,
                           int iterations) {
  const DsseProblem& pb = obj.problem;
  const Eigen::Index m = u.rows(), rank = u.cols(), c = w.cols();
  std::vector<Eigen::Index> seen;
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      if (pb.omega(i, j)) seen.push_back(j * m + i);
  const double wfit = std::sqrt(obj.mu), wpf = std::sqrt(pb.lambda_pf);
  const bool use_pf = pb.lambda_pf > 0.0;
  const auto n_seen = static_cast<Eigen::Index>(seen.size());
  const Eigen::Index rows = n_seen + (use_pf ? coupling.a.rows() : 0);
  const Eigen::Index n_u = m * rank, n_theta = n_u + rank * c;

  // Stacked weighted residual; value = |residual|^2 equals Objective::smooth.
  auto residual = [&](const Eigen::MatrixXd& x) {
    Eigen::VectorXd r(rows);
    for (Eigen::Index k = 0; k < n_seen; ++k)
      r(k) = wfit * (x(seen[static_cast<std::size_t>(k)] % m, seen[static_cast<std::size_t>(k)] / m) -
                     pb.z(seen[static_cast<std::size_t>(k)] % m, seen[static_cast<std::size_t>(k)] / m));
    if (use_pf) r.tail(coupling.a.rows()) = wpf * (coupling.a * flat(x) - coupling.b);
    return r;
  };
  auto jacobian = [&] {
    // d vec(U W) = (W' (x) I_m) d vec(U) + (I_c (x) U) d vec(W)
    Eigen::MatrixXd dx(m * c, n_theta);
    dx.leftCols(n_u) = kronecker_lift(w.transpose(), m);
    dx.rightCols(rank * c).setZero();
    for (Eigen::Index j = 0; j < c; ++j) dx.block(j * m, n_u + j * rank, m, rank) = u;
    Eigen::MatrixXd jac(rows, n_theta);
    for (Eigen::Index k = 0; k < n_seen; ++k) jac.row(k) = wfit * dx.row(seen[static_cast<std::size_t>(k)]);
    if (use_pf) jac.bottomRows(coupling.a.rows()) = wpf * coupling.a * dx;
    return jac;
  };

  FactorFit best{u * w, 0.0};
  Eigen::VectorXd r = residual(best.x);
  best.value = r.squaredNorm();
  double damping = 1e-3;
  for (int it = 0; it < iterations && best.value > 1e-28; ++it) {
    const Eigen::MatrixXd jac = jacobian();
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.norm() <= 1e-15 * std::max(1.0, best.value)) break;
    Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd scale = normal.diagonal().cwiseMax(1e-12);
    bool improved = false;
    while (damping < 1e12) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += damping * scale;
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      const Eigen::MatrixXd u_new = u + Eigen::Map<const Eigen::MatrixXd>(step.data(), m, rank);
      const Eigen::MatrixXd w_new = w + Eigen::Map<const Eigen::MatrixXd>(step.data() + n_u, rank, c);
      const Eigen::MatrixXd x_new = u_new * w_new;
      const Eigen::VectorXd r_new = residual(x_new);
      const double value = r_new.squaredNorm();
      if (value < best.value) {
        improved = best.value - value > 1e-15 * best.value;
        u = u_new;
        w = w_new;
        r = r_new;
        best = {x_new, value};
        damping = std::max(damping / 3.0, 1e-12);
        break;
      }
      damping *= 4.0;
    }
    if (!improved) break;
  }
  return best;
}

/// Smallest rank whose factor model meets the data-fit tolerance, searched from the
/// SVD of the nuclear-norm solution plus seeded random starts.
std::optional<Eigen::MatrixXd> lowest_rank_fit(const Objective& obj, const Coupling& coupling,
                                               const Eigen::MatrixXd& x, const SolverOptions& options) {
  const DsseProblem& pb = obj.problem;
  const auto m = x.rows(), c = x.cols();
  const Eigen::Index full = std::min(m, c);
  const Eigen::Index max_rank = options.max_rank > 0 ? std::min<Eigen::Index>(options.max_rank, full - 1) : full - 1;
  const Eigen::Index equations = pb.observed() + (pb.lambda_pf > 0.0 ? coupling.a.rows() : 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  std::mt19937_64 rng(options.seed);

  for (Eigen::Index r = 1; r <= max_rank; ++r) {
    if (r * (m + c - r) > equations) break;
    const Eigen::VectorXd root = svd.singularValues().head(r).cwiseSqrt();
    FactorFit best = fit_factor_model(obj, coupling, svd.matrixU().leftCols(r) * root.asDiagonal(),
                                      root.asDiagonal() * svd.matrixV().leftCols(r).transpose(), options.refine_iterations);
    for (int start = 0; start < options.restarts; ++start) {
      Eigen::MatrixXd u0(m, r), v0(r, c);
      for (Eigen::Index i = 0; i < u0.size(); ++i) u0(i) = standard_normal(rng);
      for (Eigen::Index i = 0; i < v0.size(); ++i) v0(i) = standard_normal(rng);
      FactorFit f = fit_factor_model(obj, coupling, std::move(u0), std::move(v0), options.refine_iterations);
      if (f.value < best.value) best = std::move(f);
    }
    if (project_observed(best.x - pb.z, pb.omega).squaredNorm() <= pb.epsilon) return best.x;
  }
  return std::nullopt;
}

}  // namespace

Eigen::MatrixXd project_observed(const Eigen::MatrixXd& x, const ObservationMask& omega) {
  return omega.select(x, Eigen::MatrixXd::Zero(x.rows(), x.cols()));
}

double nuclear_norm(const Eigen::MatrixXd& x) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  return svd.singularValues().sum();
}

DsseProblem assemble_problem(const ImputationResult& reconciled, Eigen::Index query_index,
                             const TaskColumns& columns, const LinearPFModel& pf,
                             const ObservationMask& meter_mask, double epsilon, double lambda_pf) {
  pf.validate();
  const int m = pf.phases();
  require(reconciled.nodes == m, ErrorCode::DimensionMismatch, "reconciled node count != phase count");
  require(meter_mask.rows() == m && meter_mask.cols() == kStateColumns, ErrorCode::DimensionMismatch,
          "meter mask must be m x 5");
  require(query_index >= 0 && query_index < reconciled.query_count(), ErrorCode::DimensionMismatch,
          "query index out of range");
  for (int col : columns)
    require(col < reconciled.tasks, ErrorCode::DimensionMismatch, "task column out of range");

  DsseProblem p;
  p.pf = pf;
  p.epsilon = epsilon;
  p.lambda_pf = lambda_pf;
  p.z = Eigen::MatrixXd::Zero(m, kStateColumns);
  p.omega = ObservationMask::Constant(m, kStateColumns, false);
  for (int b = 0; b < m; ++b) {
    for (int c = 0; c < kStateColumns; ++c) {
      const int task = columns[static_cast<std::size_t>(c)];
      if (task < 0 || !meter_mask(b, c)) continue;
      p.z(b, c) = reconciled.mean_at(task, b, query_index);
      p.omega(b, c) = true;
    }
  }
  return p;
}

DsseSolution solve(const DsseProblem& problem, const SolverOptions& options) {
  problem.pf.validate();
  require(problem.z.rows() == problem.pf.phases() && problem.z.cols() == kStateColumns &&
              problem.omega.rows() == problem.z.rows() && problem.omega.cols() == kStateColumns,
          ErrorCode::DimensionMismatch, "state matrix must be m x 5");
  require(problem.epsilon > 0.0 && problem.lambda_pf >= 0.0, ErrorCode::InvalidSpec,
          "epsilon must be positive and lambda_pf nonnegative");

  const Coupling coupling = make_coupling(problem.pf);
  double pf_lipschitz = 0.0;
  if (problem.lambda_pf > 0.0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(coupling.a);
    pf_lipschitz = 2.0 * problem.lambda_pf * std::pow(svd.singularValues()(0), 2);
  }

  auto run = [&](double mu, const Eigen::MatrixXd& start) {
    const Objective obj{problem, coupling, mu};
    return proximal_descent(obj, 2.0 * mu + pf_lipschitz, start, options);
  };
  auto fit_of = [&](const Eigen::MatrixXd& x) {
    return project_observed(x - problem.z, problem.omega).squaredNorm();
  };

  double mu = options.mu_initial;
  InnerResult accepted = run(mu, problem.z);
  double accepted_mu = mu;
  if (fit_of(accepted.x) > problem.epsilon) {
    double mu_fail = mu;
    InnerResult last = accepted;
    bool satisfied = false;
    while (mu < options.mu_max) {
      mu_fail = mu;
      mu *= 10.0;
      last = run(mu, last.x);
      if (fit_of(last.x) <= problem.epsilon) {
        satisfied = true;
        break;
      }
    }
    accepted = last;
    accepted_mu = mu;
    if (satisfied) {
      double lo = std::log(mu_fail), hi = std::log(mu);
      for (int k = 0; k < options.mu_bisections; ++k) {
        const double mid = 0.5 * (lo + hi);
        InnerResult trial = run(std::exp(mid), accepted.x);
        if (fit_of(trial.x) <= problem.epsilon) {
          hi = mid;
          accepted = std::move(trial);
          accepted_mu = std::exp(mid);
        } else {
          lo = mid;
        }
      }
    }
  }

  DsseSolution sol;
  sol.mu = accepted_mu;
  sol.iterations = accepted.iterations;
  sol.objective_log = accepted.log;
  sol.x_hat = accepted.x;

  if (options.refine_rank && problem.observed() > 0) {
    const Objective obj{problem, coupling, accepted_mu};
    if (auto low = lowest_rank_fit(obj, coupling, sol.x_hat, options)) sol.x_hat = std::move(*low);
  }

  sol.x_hat.col(static_cast<int>(StateColumn::v_mag)) =
      sol.x_hat.col(static_cast<int>(StateColumn::v_mag)).cwiseMax(0.0);
  const int m = problem.phases();
  const Eigen::VectorXd p = sol.x_hat.col(0), q = sol.x_hat.col(1);
  const Eigen::VectorXcd v_lin = problem.pf.phasor(p, q);
  Eigen::VectorXcd v(m);
  for (int i = 0; i < m; ++i) v(i) = {sol.x_hat(i, 2), sol.x_hat(i, 3)};
  sol.pf_residual_phasor = (v - v_lin).norm();
  sol.pf_residual_mag = (sol.x_hat.col(4) - problem.pf.magnitude(p, q)).norm();
  sol.fit_residual = std::sqrt(fit_of(sol.x_hat));
  sol.nuclear_norm = nuclear_norm(sol.x_hat);
  sol.converged = accepted.converged && sol.fit_residual * sol.fit_residual <= problem.epsilon;
  return sol;
}

std::vector<StateEstimate> estimate_states(const ImputationResult& reconciled,
                                           const std::vector<Eigen::Index>& query_indices,
                                           const TaskColumns& columns, const LinearPFModel& pf,
                                           const ObservationMask& meter_mask, double epsilon,
                                           double lambda_pf, const SolverOptions& options) {
  std::vector<StateEstimate> out;
  out.reserve(query_indices.size());
  for (Eigen::Index q : query_indices) {
    const DsseProblem problem = assemble_problem(reconciled, q, columns, pf, meter_mask, epsilon, lambda_pf);
    out.push_back({reconciled.query_times[static_cast<std::size_t>(q)], solve(problem, options)});
  }
  return out;
}

}  // namespace gridrecon
