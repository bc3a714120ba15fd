#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gridrecon/dsse.hpp"
#include "gridrecon/gp_batch.hpp"
#include "gridrecon/gp_recursive.hpp"
#include "gridrecon/rng.hpp"

using namespace gridrecon;

namespace {

Eigen::MatrixXd path_graph(int m) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  return a;
}

BatchDataset dataset(int tasks, int nodes, int steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> times;
  for (int t = 0; t < steps; ++t) times.push_back(t);
  auto data = empty_dataset(tasks, nodes, times);
  for (auto& b : data.observations) {
    std::fill(b.mask.begin(), b.mask.end(), true);
    for (int s = 0; s < data.slots(); ++s) b.values(s) = standard_normal(rng);
  }
  return data;
}

// One infer + update of rgp-g with d = 2, M = 12 and n basis points.
void BM_RecursiveStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto filter = make_filter(build_laplacian(path_graph(12)), 0.05);
  const auto data = dataset(2, 12, 64, 5);
  auto s0 = init_state(RecursiveMode::rgp_g, 12, BasisConfig::uniform(0.0, 64.0, n), {8.0, 1.0, 1e-2},
                       TaskKernel::correlated(2, 0.3), &filter);
  std::size_t k = 0;
  auto s = s0;
  for (auto _ : state) {
    if (k == data.size()) {
      s = s0;
      k = 0;
    }
    s = update_step(std::move(s), infer_step(s, data.times[k]), data.observations[k]);
    ++k;
  }
}
BENCHMARK(BM_RecursiveStep)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_FullGp(benchmark::State& state) {
  const int steps = static_cast<int>(state.range(0));
  const auto data = dataset(2, 4, steps, 6);
  std::vector<double> grid;
  for (int t = 0; t < steps; ++t) grid.push_back(t + 0.5);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_predict_full(data, grid, {5.0, 1.0, 1e-2}, TaskKernel::correlated(2, 0.3)).mean);
}
BENCHMARK(BM_FullGp)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

// Rank-2 completion of a 9 x 5 matrix with 60% observed.
void BM_CompletionSolve(benchmark::State& state) {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd u(9, 2), v(5, 2);
  for (auto* m : {&u, &v})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = standard_normal(rng);
  DsseProblem p;
  p.omega = ObservationMask::Constant(9, 5, false);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 5; ++j) p.omega(i, j) = (i + j) % 5 < 3;
  p.z = project_observed(u * v.transpose(), p.omega);
  p.pf.k_matrix = Eigen::MatrixXd::Zero(9, 18);
  p.pf.m_matrix = Eigen::MatrixXcd::Zero(9, 18);
  p.pf.v0 = Eigen::VectorXcd::Ones(9);
  p.pf.magnitude_offset = Eigen::VectorXd::Ones(9);
  p.lambda_pf = 0.0;
  p.epsilon = 1e-6;
  SolverOptions options;
  options.refine_rank = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(solve(p, options).x_hat);
}
BENCHMARK(BM_CompletionSolve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
