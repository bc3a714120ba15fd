#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "gridrecon/error.hpp"
#include "gridrecon/hyper.hpp"
#include "gridrecon/rng.hpp"

using namespace gridrecon;
namespace fx = gridrecon::testing;

namespace {

BatchDataset sinusoid(int points) {
  std::vector<double> t;
  for (int k = 0; k < points; ++k) t.push_back(k);
  BatchDataset data = empty_dataset(1, 1, t);
  for (int k = 0; k < points; ++k) {
    data.observations[static_cast<std::size_t>(k)].values(0) = 2.0 + std::sin(2 * std::numbers::pi * k / 20.0);
    data.observations[static_cast<std::size_t>(k)].mask[0] = true;
  }
  return data;
}

GridSpec single(double l) {
  GridSpec g;
  g.lengthscale_grid = {l};
  g.signal_var_grid = {1.0};
  g.noise_var_grid = {1e-4};
  g.task_corr_grid = {0.0};
  return g;
}

}  // namespace

TEST_CASE("single candidate wins by default") {
  auto report = cross_validate(sinusoid(20), single(4.0), Method::full_gp, nullptr, 3);
  CHECK(report.table.size() == 1);
  CHECK(report.best.hp.lengthscale == 4.0);
}

TEST_CASE("well matched lengthscale beats an absurd one") {
  GridSpec g = single(4.0);
  g.lengthscale_grid = {1e-3, 4.0};
  for (Method m : {Method::full_gp, Method::rgp}) {
    auto report = cross_validate(sinusoid(40), g, m, nullptr, 7);
    CHECK(report.best.hp.lengthscale == 4.0);
    CHECK(report.table[0].mean_mape > report.table[1].mean_mape);
  }
}

TEST_CASE("cross validation is deterministic and order invariant") {
  std::mt19937_64 rng(2);
  auto data = fx::random_dataset(2, 2, 12, rng);
  for (auto& b : data.observations) b.values.array() += 5.0;
  GridSpec g;
  g.lengthscale_grid = {5.0, 2.0};
  g.signal_var_grid = {1.0};
  g.noise_var_grid = {1e-2, 1e-3};
  g.task_corr_grid = {0.3, 0.0};
  g.folds = 3;
  auto a = cross_validate(data, g, Method::full_gp, nullptr, 11);
  auto b = cross_validate(data, g, Method::full_gp, nullptr, 11);
  REQUIRE(a.table.size() == b.table.size());
  for (std::size_t i = 0; i < a.table.size(); ++i) {
    CHECK(a.table[i].candidate == b.table[i].candidate);
    CHECK(a.table[i].fold_mape == b.table[i].fold_mape);
  }
  CHECK(a.best == b.best);
  CHECK(std::is_sorted(a.table.begin(), a.table.end(),
                       [](const CvRow& x, const CvRow& y) { return x.candidate < y.candidate; }));

  GridSpec reversed = g;
  std::reverse(reversed.lengthscale_grid.begin(), reversed.lengthscale_grid.end());
  std::reverse(reversed.noise_var_grid.begin(), reversed.noise_var_grid.end());
  auto c = cross_validate(data, reversed, Method::full_gp, nullptr, 11);
  CHECK(c.best == a.best);
}

TEST_CASE("folds partition the observed times") {
  std::mt19937_64 rng(4);
  auto data = fx::random_dataset(1, 2, 13, rng);
  for (auto& b : data.observations) b.values.array() += 5.0;
  std::fill(data.observations[3].mask.begin(), data.observations[3].mask.end(), false);
  GridSpec g = single(3.0);
  g.folds = 4;
  std::set<std::size_t> seen;
  std::size_t total = 0;
  CvOptions opts;
  opts.on_fold = [&](int, const BatchDataset& train, const std::vector<std::size_t>& test) {
    for (std::size_t k : test) {
      CHECK_FALSE(train.observations[k].any_observed());
      seen.insert(k);
    }
    total += test.size();
  };
  cross_validate(data, g, Method::full_gp, nullptr, 5, opts);
  CHECK(total == 12);
  CHECK(seen.size() == 12);
  CHECK(seen.count(3) == 0);
}

TEST_CASE("cross validation errors") {
  GridSpec g = single(3.0);
  g.folds = 5;
  CHECK_THROWS_AS(cross_validate(sinusoid(3), g, Method::full_gp, nullptr, 1), Error);
  g.task_corr_grid = {1.0};
  CHECK_THROWS_AS(cross_validate(sinusoid(30), g, Method::full_gp, nullptr, 1), Error);
}

TEST_CASE("log marginal likelihood closed forms") {
  BatchDataset one = empty_dataset(1, 1, {0.0});
  one.observations[0].mask[0] = true;
  one.observations[0].values(0) = 0.0;
  Hyperparameters hp{1.0, 0.7, 0.3};
  const double v = 0.7 * (1.0 + kJitterFactor) + 0.3;
  CHECK(log_marginal_likelihood(one, hp, TaskKernel::identity(1)) ==
        doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * v)).epsilon(1e-12));

  one.observations[0].values(0) = 1.0;
  Hyperparameters unit{1.0, 0.5, 0.5 - 0.5 * kJitterFactor};
  CHECK(log_marginal_likelihood(one, unit, TaskKernel::identity(1)) == doctest::Approx(-1.4189385332046727).epsilon(1e-12));

  CHECK_THROWS_AS(log_marginal_likelihood(empty_dataset(1, 1, {0.0}), hp, TaskKernel::identity(1)), Error);
}

TEST_CASE("evidence prefers the generating lengthscale") {
  int wins = 0;
  for (int seed = 0; seed < 20; ++seed) {
    auto rng = RngStreams(seed).stream("draw");
    std::vector<double> t = fx::grid(0, 29, 30);
    Hyperparameters truth{3.0, 1.0, 0.01};
    Eigen::MatrixXd k = kernel_matrix(t, t, truth);
    k.diagonal().array() += truth.noise_variance;
    Eigen::MatrixXd chol = k.llt().matrixL();
    Eigen::VectorXd z(30);
    for (int i = 0; i < 30; ++i) z(i) = standard_normal(rng);
    Eigen::VectorXd y = chol * z;
    BatchDataset data = empty_dataset(1, 1, t);
    for (int i = 0; i < 30; ++i) {
      data.observations[static_cast<std::size_t>(i)].values(0) = y(i);
      data.observations[static_cast<std::size_t>(i)].mask[0] = true;
    }
    Hyperparameters wide = truth;
    wide.lengthscale *= 100;
    wins += log_marginal_likelihood(data, truth, TaskKernel::identity(1)) >
            log_marginal_likelihood(data, wide, TaskKernel::identity(1));
  }
  CHECK(wins >= 18);
}
