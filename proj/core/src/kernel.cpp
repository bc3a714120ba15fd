#include "gridrecon/kernel.hpp"

#include <cmath>

#include "gridrecon/error.hpp"

namespace gridrecon {

void Hyperparameters::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  require(positive(lengthscale) && lengthscale <= 1e6, ErrorCode::InvalidHyperparameters,
          "lengthscale must lie in (0, 1e6]");
  require(positive(signal_variance), ErrorCode::InvalidHyperparameters,
          "signal variance must be positive");
  require(positive(noise_variance), ErrorCode::InvalidHyperparameters,
          "noise variance must be positive");
}

double rbf(double x1, double x2, const Hyperparameters& hp) {
  const double r = (x1 - x2) / hp.lengthscale;
  return hp.signal_variance * std::exp(-0.5 * r * r);
}

Eigen::MatrixXd kernel_matrix(std::span<const double> xa, std::span<const double> xb,
                              const Hyperparameters& hp) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(xa.size()), static_cast<Eigen::Index>(xb.size()));
  for (Eigen::Index j = 0; j < k.cols(); ++j)
    for (Eigen::Index i = 0; i < k.rows(); ++i)
      k(i, j) = rbf(xa[static_cast<std::size_t>(i)], xb[static_cast<std::size_t>(j)], hp);
  return k;
}

Eigen::MatrixXd jittered_gram(std::span<const double> x, const Hyperparameters& hp) {
  Eigen::MatrixXd k = kernel_matrix(x, x, hp);
  k.diagonal().array() += kJitterFactor * hp.signal_variance;
  return k;
}

TaskKernel::TaskKernel(Eigen::MatrixXd kc, double rho) : kc_(std::move(kc)), rho_(rho) {
  require(kc_.rows() > 0 && kc_.rows() == kc_.cols(), ErrorCode::DimensionMismatch,
          "task kernel must be square and non-empty");
  require((kc_ - kc_.transpose()).cwiseAbs().maxCoeff() <= 1e-12, ErrorCode::InvalidHyperparameters,
          "task kernel must be symmetric");
  require((kc_.diagonal().array() > 0.0).all(), ErrorCode::InvalidHyperparameters,
          "task kernel diagonal must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kc_, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() >= -1e-10, ErrorCode::InvalidHyperparameters,
          "task kernel must be positive semidefinite");
}

TaskKernel TaskKernel::identity(int d) {
  require(d > 0, ErrorCode::DimensionMismatch, "task count must be positive");
  return TaskKernel(Eigen::MatrixXd::Identity(d, d), 0.0);
}

TaskKernel TaskKernel::correlated(int d, double rho) {
  require(d > 0, ErrorCode::DimensionMismatch, "task count must be positive");
  require(rho > -1.0 && rho < 1.0, ErrorCode::InvalidHyperparameters,
          "task correlation must lie in (-1, 1)");
  Eigen::MatrixXd kc = Eigen::MatrixXd::Constant(d, d, rho);
  kc.diagonal().setOnes();
  return TaskKernel(std::move(kc), rho);
}

TaskKernel TaskKernel::from_matrix(Eigen::MatrixXd kc) { return TaskKernel(std::move(kc), 0.0); }

TaskKernel TaskKernel::scaled(const Eigen::VectorXd& scales) const {
  require(scales.size() == kc_.rows(), ErrorCode::DimensionMismatch, "one scale per task");
  require((scales.array() > 0.0).all(), ErrorCode::InvalidHyperparameters, "scales must be positive");
  Eigen::MatrixXd kc = scales.asDiagonal() * kc_ * scales.asDiagonal();
  return TaskKernel(std::move(kc), rho_);
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

StructuredCovariance assemble_prior(const TaskKernel& task, const Eigen::MatrixXd& space,
                                    const Eigen::MatrixXd& time_block, bool add_noise,
                                    const Hyperparameters& hp) {
  require(space.rows() == space.cols() && space.rows() > 0, ErrorCode::DimensionMismatch,
          "space block must be square");
  require((space - space.transpose()).cwiseAbs().maxCoeff() <= 1e-10, ErrorCode::DimensionMismatch,
          "space block must be symmetric");
  require(time_block.size() > 0, ErrorCode::DimensionMismatch, "time block is empty");
  const bool square = time_block.rows() == time_block.cols();
  require(!add_noise || square, ErrorCode::NoiseOnRectangular,
          "noise requested on a rectangular covariance block");

  StructuredCovariance c;
  c.block_task = task.matrix();
  c.block_space = space;
  c.block_time = time_block;
  c.assembled = kron(kron(c.block_task, c.block_space), c.block_time);
  if (add_noise) c.assembled.diagonal().array() += hp.noise_variance;
  c.noise_added = add_noise;
  return c;
}

}  // namespace gridrecon
