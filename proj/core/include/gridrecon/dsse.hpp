#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gridrecon/measurements.hpp"
#include "gridrecon/power_flow.hpp"

namespace gridrecon {

/// Columns of the per-phase state matrix.
enum class StateColumn : int { p = 0, q = 1, v_real = 2, v_imag = 3, v_mag = 4 };
inline constexpr int kStateColumns = 5;
inline constexpr std::array<const char*, kStateColumns> kStateColumnNames{"P", "Q", "Re(v)", "Im(v)", "|v|"};

using ObservationMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct DsseProblem {
  Eigen::MatrixXd z;      // m x 5, zero outside omega
  ObservationMask omega;  // m x 5
  LinearPFModel pf;
  double epsilon = 1e-6;
  double lambda_pf = 1.0;

  int phases() const { return static_cast<int>(z.rows()); }
  int observed() const { return static_cast<int>(omega.count()); }
};

/// P_Omega(x): keeps entries in omega, zeroes the rest.
Eigen::MatrixXd project_observed(const Eigen::MatrixXd& x, const ObservationMask& omega);

struct SolverOptions {
  int max_iterations = 5000;
  double tolerance = 1e-8;
  /// Initial data-fit weight; raised and then bisected until |P_O(Z - X)|^2 <= epsilon.
  double mu_initial = 10.0;
  double mu_max = 1e8;
  int mu_bisections = 8;
  /// After the nuclear-norm solve, replace x_hat by the lowest-rank factor model that
  /// still meets the data-fit tolerance (Levenberg-Marquardt on the same penalties).
  bool refine_rank = true;
  /// Largest rank tried; 0 means min(m, 5) - 1.
  int max_rank = 0;
  /// Random factor starts per rank in addition to the SVD start.
  int restarts = 8;
  int refine_iterations = 300;
  std::uint64_t seed = 1;
};

struct DsseSolution {
  Eigen::MatrixXd x_hat;
  double fit_residual = 0.0;  // |P_O(Z) - P_O(X)|_F
  double pf_residual_phasor = 0.0;
  double pf_residual_mag = 0.0;
  double nuclear_norm = 0.0;
  double mu = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Penalised objective after every iteration of the accepted mu.
  std::vector<double> objective_log;
};

/// Columns of the reconciled tasks feeding each state column (-1 = not sensed).
using TaskColumns = std::array<int, kStateColumns>;

/// Fills Z from one query time of a reconciled series. meter_mask is m x 5.
DsseProblem assemble_problem(const ImputationResult& reconciled, Eigen::Index query_index,
                             const TaskColumns& columns, const LinearPFModel& pf,
                             const ObservationMask& meter_mask, double epsilon, double lambda_pf);

/// min |X|_* + mu |P_O(Z - X)|^2 + lambda (phasor^2 + magnitude^2 residuals) by
/// proximal gradient with singular-value thresholding.
DsseSolution solve(const DsseProblem& problem, const SolverOptions& options = {});

double nuclear_norm(const Eigen::MatrixXd& x);

struct StateEstimate {
  double time = 0.0;
  DsseSolution solution;
};

/// One assemble + solve per requested query index.
std::vector<StateEstimate> estimate_states(const ImputationResult& reconciled,
                                           const std::vector<Eigen::Index>& query_indices,
                                           const TaskColumns& columns, const LinearPFModel& pf,
                                           const ObservationMask& meter_mask, double epsilon,
                                           double lambda_pf, const SolverOptions& options = {});

}  // namespace gridrecon
