#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "gridrecon/error.hpp"
#include "gridrecon/gp_batch.hpp"
#include "gridrecon/rng.hpp"

using namespace gridrecon;

namespace {

// Textbook single-output GP with loops and a Gauss-Jordan inverse.
struct ScalarGp {
  std::vector<double> mean, var;
};

ScalarGp textbook_gp(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& xq,
                     double l, double s2, double n2) {
  const std::size_t n = x.size();
  auto k = [&](double a, double b) { return s2 * std::exp(-(a - b) * (a - b) / (2 * l * l)); };
  std::vector<std::vector<double>> aug(n, std::vector<double>(2 * n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug[i][j] = k(x[i], x[j]) + (i == j ? n2 + 1e-8 * s2 : 0.0);
    aug[i][n + i] = 1.0;
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(aug[r][c]) > std::abs(aug[p][c])) p = r;
    std::swap(aug[c], aug[p]);
    double d = aug[c][c];
    for (auto& v : aug[c]) v /= d;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      double f = aug[r][c];
      for (std::size_t j = 0; j < 2 * n; ++j) aug[r][j] -= f * aug[c][j];
    }
  }
  ScalarGp out;
  for (double q : xq) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i] += aug[i][n + j] * k(x[j], q);
    double m = 0, v = s2;
    for (std::size_t i = 0; i < n; ++i) {
      m += w[i] * y[i];
      v -= w[i] * k(x[i], q);
    }
    out.mean.push_back(m);
    out.var.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("interpolates an observed point with vanishing noise") {
  BatchDataset data = empty_dataset(1, 1, {4.0});
  data.observations[0].values(0) = 3.25;
  data.observations[0].mask[0] = true;
  auto r = fit_predict_full(data, {4.0}, {2.0, 1.0, 1e-12}, TaskKernel::identity(1));
  CHECK(r.mean(0) == doctest::Approx(3.25).epsilon(1e-6));
  CHECK(r.variance(0) < 1e-6);
}

TEST_CASE("zero data gives a zero posterior mean") {
  std::mt19937_64 rng(1);
  auto data = gridrecon::testing::random_dataset(2, 3, 6, rng);
  for (auto& b : data.observations) b.values.setZero();
  auto r = fit_predict_full(data, gridrecon::testing::grid(0, 6, 13), {2.0, 1.0, 1e-2}, TaskKernel::correlated(2, 0.5));
  CHECK(r.mean.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matches a textbook single-output GP") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    auto data = gridrecon::testing::random_dataset(1, 1, 5, rng);
    std::vector<double> x, y;
    for (auto& b : data.observations) {
      x.push_back(b.time);
      y.push_back(b.values(0));
    }
    std::vector<double> q{0.5, 1.7, 2.5, 3.9, 6.0};
    auto r = fit_predict_full(data, q, {1.5, 0.8, 0.05}, TaskKernel::identity(1));
    auto oracle = textbook_gp(x, y, q, 1.5, 0.8, 0.05);
    for (std::size_t i = 0; i < q.size(); ++i) {
      CHECK(r.mean(static_cast<Eigen::Index>(i)) == doctest::Approx(oracle.mean[i]).epsilon(1e-8));
      CHECK(r.variance(static_cast<Eigen::Index>(i)) == doctest::Approx(oracle.var[i]).epsilon(1e-8));
    }
  }
}

TEST_CASE("standard mode drops missing slots, paper-literal zero-fills them") {
  std::mt19937_64 rng(4);
  auto data = gridrecon::testing::random_dataset(1, 2, 6, rng);
  data.observations[2].mask[1] = false;
  data.observations[2].values(1) = 0.0;
  Hyperparameters hp{2.0, 1.0, 0.01};
  auto standard = build_batch_system(data, hp, TaskKernel::identity(1), {});
  CHECK(standard.entries.size() == 11);
  BatchOptions literal;
  literal.noise_mode = NoiseMode::paper_literal;
  auto lit = build_batch_system(data, hp, TaskKernel::identity(1), literal);
  CHECK(lit.entries.size() == 12);

  // Dropping the slot is equivalent to conditioning on the observed subset only.
  BatchDataset node0 = empty_dataset(1, 1, data.times);
  for (std::size_t t = 0; t < data.size(); ++t) {
    node0.observations[t].values(0) = data.observations[t].values(0);
    node0.observations[t].mask[0] = true;
  }
  auto full = fit_predict_full(data, {2.5}, hp, TaskKernel::identity(1));
  auto single = fit_predict_full(node0, {2.5}, hp, TaskKernel::identity(1));
  CHECK(full.mean(0) == doctest::Approx(single.mean(0)).epsilon(1e-10));
}

TEST_CASE("graph spatial block couples nodes") {
  BatchDataset data = empty_dataset(1, 2, {0.0});
  data.observations[0].values(0) = 1.0;
  data.observations[0].mask[0] = true;
  Hyperparameters hp{2.0, 1.0, 1e-4};
  auto plain = fit_predict_full(data, {0.0}, hp, TaskKernel::identity(1));
  CHECK(plain.mean(1) == 0.0);
  BatchOptions opts;
  Eigen::Matrix2d s;
  s << 0.75, 0.25, 0.25, 0.75;
  opts.spatial = Eigen::MatrixXd(s * s);
  auto coupled = fit_predict_full(data, {0.0}, hp, TaskKernel::identity(1), opts);
  CHECK(coupled.mean(1) > 0.1);
}

TEST_CASE("full covariance output") {
  std::mt19937_64 rng(8);
  auto data = gridrecon::testing::random_dataset(2, 2, 4, rng);
  BatchOptions opts;
  opts.covariance = CovarianceOutput::full;
  auto r = fit_predict_full(data, {0.5, 1.5}, {2.0, 1.0, 0.1}, TaskKernel::correlated(2, 0.3), opts);
  CHECK(r.covariance.rows() == 8);
  CHECK((r.covariance - r.covariance.transpose()).norm() < 1e-12);
  CHECK((r.covariance.diagonal() - r.variance).norm() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.covariance);
  CHECK(eig.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("batch error paths") {
  BatchDataset none = empty_dataset(1, 1, {0.0, 1.0});
  CHECK_THROWS_AS(fit_predict_full(none, {0.5}, {1.0, 1.0, 0.1}, TaskKernel::identity(1)), Error);
  std::mt19937_64 rng(2);
  auto data = gridrecon::testing::random_dataset(1, 1, 3, rng);
  try {
    fit_predict_full(data, {}, {1.0, 1.0, 0.1}, TaskKernel::identity(1));
    FAIL("expected EmptyQuery");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyQuery);
  }
}
