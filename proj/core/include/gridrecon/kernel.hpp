#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace gridrecon {

/// RBF kernel hyperparameters. Lengthscale is in fine-grid time steps.
struct Hyperparameters {
  double lengthscale = 10.0;
  double signal_variance = 1.0;
  double noise_variance = 1e-3;

  void validate() const;
  bool operator==(const Hyperparameters&) const = default;
};

/// Diagonal jitter added to square temporal Gram matrices: factor * sigma_s^2.
inline constexpr double kJitterFactor = 1e-8;

/// sigma_s^2 exp(-(x1 - x2)^2 / (2 l^2))
double rbf(double x1, double x2, const Hyperparameters& hp);

Eigen::MatrixXd kernel_matrix(std::span<const double> xa, std::span<const double> xb,
                              const Hyperparameters& hp);

/// kernel_matrix(x, x) with the standard jitter on the diagonal.
Eigen::MatrixXd jittered_gram(std::span<const double> x, const Hyperparameters& hp);

/// Task covariance K_c between the d sensor tasks.
class TaskKernel {
 public:
  static TaskKernel identity(int d);
  /// Correlation matrix with every off-diagonal entry equal to rho.
  static TaskKernel correlated(int d, double rho);
  static TaskKernel from_matrix(Eigen::MatrixXd kc);

  /// Per-task signal multipliers folded in as diag(s) K_c diag(s).
  TaskKernel scaled(const Eigen::VectorXd& scales) const;

  int tasks() const { return static_cast<int>(kc_.rows()); }
  const Eigen::MatrixXd& matrix() const { return kc_; }
  /// The off-diagonal correlation used to build this kernel, when uniform.
  double correlation() const { return rho_; }

 private:
  explicit TaskKernel(Eigen::MatrixXd kc, double rho);
  Eigen::MatrixXd kc_;
  double rho_ = 0.0;
};

/// Kronecker product a (x) b.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Flattened index in the global (task-major, node, time-minor) order.
inline Eigen::Index flat_index(Eigen::Index task, Eigen::Index node, Eigen::Index time,
                               Eigen::Index nodes, Eigen::Index times) {
  return task * nodes * times + node * times + time;
}

struct StructuredCovariance {
  Eigen::MatrixXd block_task;
  Eigen::MatrixXd block_space;
  Eigen::MatrixXd block_time;
  Eigen::MatrixXd assembled;
  bool noise_added = false;
};

/// block_task (x) block_space (x) block_time, plus sigma_e^2 I when requested.
/// Throws DimensionMismatch, NoiseOnRectangular.
StructuredCovariance assemble_prior(const TaskKernel& task, const Eigen::MatrixXd& space,
                                    const Eigen::MatrixXd& time_block, bool add_noise,
                                    const Hyperparameters& hp);

}  // namespace gridrecon
