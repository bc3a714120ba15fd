#include <doctest.h>

#include <cmath>
#include <random>

#include "gridrecon/error.hpp"
#include "gridrecon/kernel.hpp"

using namespace gridrecon;

TEST_CASE("rbf closed form") {
  Hyperparameters hp{1.0, 1.0, 1e-3};
  CHECK(rbf(3.0, 3.0, {2.0, 1.7, 1e-3}) == doctest::Approx(1.7));
  CHECK(rbf(0.0, 1.0, hp) == doctest::Approx(0.6065306597126334).epsilon(1e-14));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int k = 0; k < 20; ++k) {
    double a = u(rng), b = u(rng);
    CHECK(rbf(a, b, {3.0, 2.0, 1e-3}) == rbf(b, a, {3.0, 2.0, 1e-3}));
  }
}

TEST_CASE("kernel matrix") {
  std::vector<double> zero{0.0};
  CHECK(kernel_matrix(zero, zero, {1.0, 2.0, 1e-3})(0, 0) == 2.0);

  std::vector<double> x{0.0, 1.0};
  auto k = kernel_matrix(x, x, {1.0, 1.0, 1e-3});
  CHECK(k(0, 1) == doctest::Approx(std::exp(-0.5)));
  CHECK(k(1, 0) == doctest::Approx(std::exp(-0.5)));
  CHECK(k(1, 1) == 1.0);

  std::vector<double> many;
  for (int i = 0; i < 30; ++i) many.push_back(0.37 * i);
  auto big = kernel_matrix(many, x, {0.5, 1.3, 1e-3});
  CHECK(big.rows() == 30);
  CHECK(big.cols() == 2);
  CHECK(big.maxCoeff() <= 1.3 + 1e-12);

  auto jittered = jittered_gram(x, {1.0, 2.0, 1e-3});
  CHECK(jittered(0, 0) == doctest::Approx(2.0 + kJitterFactor * 2.0).epsilon(1e-15));
}

TEST_CASE("hyperparameter validation") {
  CHECK_THROWS_AS(Hyperparameters({0.0, 1.0, 1e-3}).validate(), Error);
  CHECK_THROWS_AS(Hyperparameters({1.0, -1.0, 1e-3}).validate(), Error);
  CHECK_THROWS_AS(Hyperparameters({1.0, 1.0, -1e-3}).validate(), Error);
  CHECK_THROWS_AS(Hyperparameters({1.0, 1.0, 0.0}).validate(), Error);
  CHECK_NOTHROW(Hyperparameters({1.0, 1.0, 1e-12}).validate());
}

TEST_CASE("task kernels") {
  auto c = TaskKernel::correlated(3, 0.4);
  CHECK(c.matrix()(0, 0) == 1.0);
  CHECK(c.matrix()(1, 2) == 0.4);
  CHECK(c.correlation() == 0.4);
  CHECK(TaskKernel::identity(2).matrix().isIdentity());
  CHECK_THROWS_AS(TaskKernel::correlated(2, 1.0), Error);
  CHECK_THROWS_AS(TaskKernel::correlated(2, -1.0), Error);
  CHECK_NOTHROW(TaskKernel::correlated(2, -0.5));

  Eigen::Vector3d s(1, 2, 3);
  auto scaled = c.scaled(s);
  CHECK(scaled.matrix()(1, 2) == doctest::Approx(0.4 * 6));
  CHECK(scaled.matrix()(2, 2) == doctest::Approx(9));

  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(TaskKernel::from_matrix(bad), Error);
}

TEST_CASE("prior assembly") {
  Hyperparameters hp{1.0, 1.0, 0.01};
  auto scalar = assemble_prior(TaskKernel::identity(1), Eigen::MatrixXd::Identity(1, 1),
                               Eigen::MatrixXd::Identity(1, 1), true, hp);
  CHECK(scalar.assembled(0, 0) == doctest::Approx(1.01));
  CHECK(scalar.noise_added);

  auto eye = assemble_prior(TaskKernel::identity(2), Eigen::MatrixXd::Identity(2, 2),
                            Eigen::MatrixXd::Identity(2, 2), false, hp);
  CHECK(eye.assembled.isIdentity());
  CHECK(eye.assembled.rows() == 8);

  std::mt19937_64 rng(9);
  auto random_psd = [&](int n) {
    Eigen::MatrixXd g(n, n);
    std::normal_distribution<double> nd;
    for (int i = 0; i < n * n; ++i) g(i) = nd(rng);
    return Eigen::MatrixXd(g * g.transpose());
  };
  Eigen::MatrixXd kc = random_psd(2), sp = random_psd(3), tm = random_psd(4);
  auto prior = assemble_prior(TaskKernel::from_matrix(kc), sp, tm, false, hp);
  CHECK(prior.assembled.trace() == doctest::Approx(kc.trace() * sp.trace() * tm.trace()).epsilon(1e-12));

  // Independent dense Kronecker.
  Eigen::MatrixXd oracle(24, 24);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          for (int s = 0; s < 4; ++s)
            for (int t = 0; t < 4; ++t)
              oracle(flat_index(a, i, s, 3, 4), flat_index(b, j, t, 3, 4)) = kc(a, b) * sp(i, j) * tm(s, t);
  CHECK((prior.assembled - oracle).norm() < 1e-12 * oracle.norm());

  Eigen::MatrixXd rect = Eigen::MatrixXd::Ones(2, 3);
  try {
    assemble_prior(TaskKernel::identity(1), Eigen::MatrixXd::Identity(1, 1), rect, true, hp);
    FAIL("expected NoiseOnRectangular");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoiseOnRectangular);
  }
  CHECK_THROWS_AS(assemble_prior(TaskKernel::identity(2), Eigen::MatrixXd::Ones(2, 3), tm, false, hp), Error);
}
