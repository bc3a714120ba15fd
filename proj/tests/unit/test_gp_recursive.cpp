#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "gridrecon/error.hpp"
#include "gridrecon/gp_batch.hpp"
#include "gridrecon/gp_recursive.hpp"
#include "gridrecon/rng.hpp"

using namespace gridrecon;
namespace fx = gridrecon::testing;

namespace {

MeasurementBatch scalar_batch(double t, double y) {
  MeasurementBatch b;
  b.time = t;
  b.values = Eigen::VectorXd::Constant(1, y);
  b.mask = {true};
  return b;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::ParseError;
}

}  // namespace

TEST_CASE("init state prior") {
  Hyperparameters hp{1.0, 1.0, 1e-2};
  auto s = init_state(RecursiveMode::rgp, 1, BasisConfig::explicit_times({0.0, 1.0}), hp, TaskKernel::identity(1), nullptr);
  CHECK(s.cov_f(0, 1) == doctest::Approx(std::exp(-0.5)));
  CHECK(s.cov_f(0, 0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.mu_f.isZero());

  auto g = build_laplacian(fx::path_adjacency(3));
  auto f0 = make_filter(g, 0.0);
  auto plain = init_state(RecursiveMode::rgp, 3, BasisConfig::uniform(0, 5, 4), hp, TaskKernel::correlated(2, 0.3), nullptr);
  auto graph = init_state(RecursiveMode::rgp_g, 3, BasisConfig::uniform(0, 5, 4), hp, TaskKernel::correlated(2, 0.3), &f0);
  CHECK((plain.cov_f - graph.cov_f).norm() < 1e-14);

  auto f = make_filter(g, 0.05);
  auto smoothed = init_state(RecursiveMode::rgp_g, 3, BasisConfig::uniform(0, 5, 4), hp, TaskKernel::correlated(2, 0.3), &f);
  CHECK(plain.trace() > smoothed.trace());

  CHECK(code_of([&] { init_state(RecursiveMode::rgp_g, 3, BasisConfig::uniform(0, 5, 4), hp, TaskKernel::identity(1), nullptr); }) ==
        ErrorCode::ModeFilterMismatch);
  CHECK(code_of([&] { init_state(RecursiveMode::rgp, 3, BasisConfig::uniform(0, 5, 4), hp, TaskKernel::identity(1), &f); }) ==
        ErrorCode::ModeFilterMismatch);
  CHECK(code_of([&] { BasisConfig::explicit_times({1.0, 1.0}); }) == ErrorCode::InvalidBasis);
}

TEST_CASE("inference step") {
  Hyperparameters hp{1.0, 1.0, 1e-12};
  auto s = init_state(RecursiveMode::rgp, 1, BasisConfig::explicit_times({0.0, 1.0}), hp, TaskKernel::identity(1), nullptr);
  auto p = infer_step(s, 1.0);
  CHECK(p.mu_p.isZero());
  CHECK(p.gain_j(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(p.gain_j(0, 0)) < 1e-9);
  CHECK(std::abs(p.bridge_b(0, 0)) < 1e-9);

  // cov_p at init equals the prior marginal at t.
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    Hyperparameters h{1.0 + 2 * uniform01(rng), 0.5 + uniform01(rng), 1e-2};
    auto st = init_state(RecursiveMode::rgp, 2, BasisConfig::uniform(0, 6, 5), h, TaskKernel::correlated(2, 0.4), nullptr);
    double t = 6 * uniform01(rng);
    auto pred = infer_step(st, t);
    Eigen::MatrixXd prior = kron(TaskKernel::correlated(2, 0.4).matrix(), Eigen::MatrixXd::Identity(2, 2)) * h.signal_variance;
    prior *= 1.0 + kJitterFactor;  // the jitter acts as a nugget on the diagonal time
    CHECK((pred.cov_p - prior).norm() < 1e-12 * prior.norm());
  }
}

TEST_CASE("scalar Kalman update") {
  Hyperparameters hp{1.0, 1.0, 1.0};
  auto s = init_state(RecursiveMode::rgp, 1, BasisConfig::explicit_times({0.0, 50.0}), hp, TaskKernel::identity(1), nullptr);
  auto p = infer_step(s, 0.0);
  auto after = update_step(s, p, scalar_batch(0.0, 2.0));
  CHECK(after.mu_f(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(after.cov_f(0, 0) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(after.trace() < s.trace());
}

TEST_CASE("all-missing batch leaves the state unchanged") {
  std::mt19937_64 rng(12);
  auto data = fx::random_dataset(2, 3, 6, rng);
  Hyperparameters hp{2.0, 1.0, 0.05};
  auto s = init_state(RecursiveMode::rgp, 3, BasisConfig::uniform(0, 6, 6), hp, TaskKernel::correlated(2, 0.2), nullptr);
  s = update_step(s, infer_step(s, data.times[0]), data.observations[0]);
  MeasurementBatch empty = data.observations[1];
  std::fill(empty.mask.begin(), empty.mask.end(), false);
  auto next = update_step(s, infer_step(s, empty.time), empty);
  CHECK(next.mu_f == s.mu_f);
  CHECK(next.trace() == s.trace());
  CHECK(next.step_count == s.step_count + 1);

  auto full = update_step(s, infer_step(s, data.times[1]), data.observations[1]);
  CHECK(full.trace() < s.trace());
}

TEST_CASE("update guards") {
  Hyperparameters hp{1.0, 1.0, 0.1};
  auto s = init_state(RecursiveMode::rgp, 1, BasisConfig::explicit_times({0.0, 1.0}), hp, TaskKernel::identity(1), nullptr);
  auto p = infer_step(s, 0.5);
  CHECK(code_of([&] { update_step(s, p, scalar_batch(0.7, 1.0)); }) == ErrorCode::StaleStep);
  auto s2 = update_step(s, p, scalar_batch(0.5, 1.0));
  CHECK(code_of([&] { update_step(s2, p, scalar_batch(0.5, 1.0)); }) == ErrorCode::StaleStep);
  MeasurementBatch wide;
  wide.time = 0.5;
  wide.values = Eigen::VectorXd::Zero(2);
  wide.mask = {true, true};
  CHECK(code_of([&] { update_step(s, p, wide); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("interpolation at init and far from the data") {
  Hyperparameters hp{1.0, 1.5, 0.1};
  auto s = init_state(RecursiveMode::rgp, 1, BasisConfig::explicit_times({0.0, 1.0, 2.0}), hp, TaskKernel::identity(1), nullptr);
  auto r = interpolate(s, {1.0});
  CHECK(r.mean(0) == 0.0);
  CHECK(r.variance(0) == doctest::Approx(1.5).epsilon(1e-7));

  auto ahead = predict_ahead(s, {7.0});
  CHECK(ahead.mean(0) == 0.0);

  s = update_step(s, infer_step(s, 1.0), scalar_batch(1.0, 3.0));
  auto far = predict_ahead(s, {40.0});
  CHECK(std::abs(far.mean(0)) < 1e-12);
  CHECK(far.variance(0) == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(code_of([&] { predict_ahead(s, {0.5}); }) == ErrorCode::NonCausalQuery);
  CHECK(code_of([&] { predict_ahead(s, {1.0}); }) == ErrorCode::NonCausalQuery);
  CHECK(code_of([&] { interpolate(s, {}); }) == ErrorCode::EmptyQuery);
}

TEST_CASE("recursive interpolation equals the batch posterior") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 2), m = 1 + static_cast<int>(rng() % 4);
    auto data = fx::random_dataset(d, m, 4 + static_cast<int>(rng() % 8), rng);
    Hyperparameters hp{2.0 + uniform01(rng), 1.0, 0.05};
    TaskKernel task = TaskKernel::correlated(d, d == 1 ? 0.0 : 0.5);
    auto q = fx::grid(-1, static_cast<double>(data.size()) + 1, 17);
    auto batch = fit_predict_full(data, q, hp, task);
    auto rec = run_session(RecursiveMode::rgp, data, BasisConfig::explicit_times(data.times), Schedule::interpolation, q, hp,
                           task, nullptr);
    CHECK((rec.result.mean - batch.mean).norm() <= 1e-6 * batch.mean.norm());
    for (Eigen::Index i = 0; i < batch.variance.size(); ++i)
      CHECK(std::abs(rec.result.variance(i) - batch.variance(i)) <= 1e-5 * batch.variance(i));
  }
}

TEST_CASE("graph filtering lowers the posterior trace") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    auto g = build_laplacian(fx::random_tree(4, rng));
    auto f = make_filter(g, 0.05);
    auto data = fx::random_dataset(2, 4, 8, rng);
    fx::drop_entries(data, 0.3, rng);
    Hyperparameters hp{2.0, 1.0, 0.05};
    RecursiveOptions opts;
    opts.verify_theorems = true;
    auto basis = BasisConfig::uniform(0, 8, 6);
    auto plain = run_session(RecursiveMode::rgp, data, basis, Schedule::interpolation, fx::grid(0, 8, 9), hp,
                             TaskKernel::correlated(2, 0.3), nullptr, opts);
    auto graph = run_session(RecursiveMode::rgp_g, data, basis, Schedule::interpolation, fx::grid(0, 8, 9), hp,
                             TaskKernel::correlated(2, 0.3), &f, opts);
    CHECK(plain.final_state.trace() > graph.final_state.trace());
    for (std::size_t k = 0; k < plain.trace_log.size(); ++k) CHECK(plain.trace_log[k].trace > graph.trace_log[k].trace);
  }
}

TEST_CASE("prior traces factor over the blocks") {
  auto g = build_laplacian(fx::star_adjacency(4));
  auto f = make_filter(g, 0.05);
  auto basis = BasisConfig::uniform(0, 10, 5);
  Hyperparameters hp{3.0, 2.0, 0.1};
  auto traces = prior_traces(basis, hp, TaskKernel::correlated(2, 0.5), f);
  auto plain = init_state(RecursiveMode::rgp, 4, basis, hp, TaskKernel::correlated(2, 0.5), nullptr);
  auto graph = init_state(RecursiveMode::rgp_g, 4, basis, hp, TaskKernel::correlated(2, 0.5), &f);
  CHECK(traces.without_graph == doctest::Approx(plain.trace()).epsilon(1e-12));
  CHECK(traces.with_graph == doctest::Approx(graph.trace()).epsilon(1e-12));
  CHECK(traces.without_graph > traces.with_graph);
}

TEST_CASE("prediction schedule is causal and covers the grid") {
  std::mt19937_64 rng(51);
  BatchDataset data = empty_dataset(2, 2, fx::grid(0, 29, 30));
  for (std::size_t t = 0; t < data.size(); ++t) {
    for (int node = 0; node < 2; ++node) {
      data.observations[t].values(node) = std::sin(0.2 * static_cast<double>(t));
      data.observations[t].mask[static_cast<std::size_t>(node)] = t % 15 == 7;
      data.observations[t].values(2 + node) = std::cos(0.2 * static_cast<double>(t)) + 0.01 * standard_normal(rng);
      data.observations[t].mask[static_cast<std::size_t>(2 + node)] = true;
    }
    for (int s = 0; s < 4; ++s)
      if (!data.observations[t].mask[static_cast<std::size_t>(s)]) data.observations[t].values(s) = 0.0;
  }
  std::vector<double> consumed;
  bool causal = true;
  SessionObserver obs;
  obs.on_batch = [&](double t) { consumed.push_back(t); };
  obs.on_emit = [&](const std::vector<double>& q, std::optional<double>) {
    for (double b : consumed)
      for (double t : q) causal = causal && b < t;
  };
  auto fine = fx::grid(0, 31, 32);
  auto out = run_session(RecursiveMode::rgp, data, BasisConfig::uniform(0, 31, 12), Schedule::prediction, fine,
                         {4.0, 1.0, 0.01}, TaskKernel::correlated(2, 0.3), nullptr, {}, &obs);
  CHECK(causal);
  CHECK(out.result.query_count() == 32);
  CHECK(out.result.mean.allFinite());
  CHECK(consumed.size() == 30);
}

TEST_CASE("empty dataset gives the prior") {
  BatchDataset data = empty_dataset(1, 2, {0.0, 1.0, 2.0});
  auto out = run_session(RecursiveMode::rgp, data, BasisConfig::uniform(0, 2, 3), Schedule::interpolation, {0.5, 1.5},
                         {1.0, 2.0, 0.1}, TaskKernel::identity(1), nullptr);
  CHECK(out.result.mean.isZero());
  CHECK(out.result.variance(0) == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("covariance health clamps round-off") {
  Hyperparameters hp{1.0, 1.0, 0.1};
  auto s = init_state(RecursiveMode::rgp, 1, BasisConfig::explicit_times({0.0, 1.0}), hp, TaskKernel::identity(1), nullptr);
  s.cov_f = Eigen::Vector2d(1.0, -1e-9).asDiagonal();
  CHECK(enforce_covariance_health(s) == doctest::Approx(-1e-9));
  CHECK(s.cov_f(1, 1) == doctest::Approx(0.0));
  s.cov_f = Eigen::Vector2d(1.0, -1e-3).asDiagonal();
  CHECK(code_of([&] { enforce_covariance_health(s); }) == ErrorCode::VerificationFailure);
}
