#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "commands.hpp"
#include "gridrecon/error.hpp"
#include "gridrecon/gp_batch.hpp"
#include "gridrecon/gp_recursive.hpp"
#include "gridrecon/power_flow.hpp"
#include "gridrecon/rng.hpp"

namespace gridrecon::cli {

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int draw(std::mt19937_64& rng, int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1)); }

Eigen::MatrixXd random_tree(int m, std::mt19937_64& rng) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) {
    const int j = draw(rng, 0, i - 1);
    a(i, j) = a(j, i) = 1.0;
  }
  return a;
}

/// Tree plus `chords` extra edges where possible.
Eigen::MatrixXd random_mesh(int m, int chords, std::mt19937_64& rng) {
  Eigen::MatrixXd a = random_tree(m, rng);
  for (int k = 0, tries = 0; k < chords && tries < 100 * m; ++tries) {
    const int i = draw(rng, 0, m - 1), j = draw(rng, 0, m - 1);
    if (i == j || a(i, j) != 0.0) continue;
    a(i, j) = a(j, i) = 1.0;
    ++k;
  }
  return a;
}

/// Toggles `flips` node pairs while keeping the graph connected.
Eigen::MatrixXd perturb(const Eigen::MatrixXd& base, int flips, std::mt19937_64& rng) {
  const int m = static_cast<int>(base.rows());
  Eigen::MatrixXd a = base;
  for (int k = 0; k < flips;) {
    const int i = draw(rng, 0, m - 1), j = draw(rng, 0, m - 1);
    if (i == j) continue;
    Eigen::MatrixXd trial = a;
    trial(i, j) = trial(j, i) = 1.0 - trial(i, j);
    try {
      build_laplacian(trial);
    } catch (const Error&) {
      continue;
    }
    a = trial;
    ++k;
  }
  return a;
}

BatchDataset random_dataset(int tasks, int nodes, int steps, double missing, std::mt19937_64& rng) {
  std::vector<double> times;
  for (int t = 0; t < steps; ++t) times.push_back(t + 0.3 * uniform01(rng));
  auto data = empty_dataset(tasks, nodes, times);
  for (auto& b : data.observations)
    for (int s = 0; s < data.slots(); ++s) {
      const bool keep = uniform01(rng) >= missing;
      b.mask[static_cast<std::size_t>(s)] = keep;
      b.values(s) = keep ? standard_normal(rng) : 0.0;
    }
  return data;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

CheckResult theorem1(std::mt19937_64& rng) {
  int violations = 0;
  for (int g = 0; g < 50; ++g) {
    const int m = draw(rng, 3, 20);
    const auto filter = make_filter(build_laplacian(g % 2 ? random_tree(m, rng) : random_mesh(m, m / 3, rng)), 0.05);
    const auto basis = BasisConfig::uniform(0.0, 20.0, draw(rng, 4, 9));
    const Hyperparameters hp{1.0 + 10.0 * uniform01(rng), 0.2 + 2.0 * uniform01(rng), 1e-2};
    const auto task = TaskKernel::correlated(2, 0.6 * uniform01(rng));
    const auto plain = init_state(RecursiveMode::rgp, m, basis, hp, task, nullptr);
    const auto smooth = init_state(RecursiveMode::rgp_g, m, basis, hp, task, &filter);
    violations += !(plain.trace() > smooth.trace());
  }
  return {"theorem1", violations == 0, fmt("%d violations over 50 graphs", violations)};
}

CheckResult theorem2(std::mt19937_64& rng) {
  int violations = 0;
  for (int s = 0; s < 10; ++s) {
    const int m = draw(rng, 3, 8);
    const auto filter = make_filter(build_laplacian(random_tree(m, rng)), 0.05);
    auto data = random_dataset(2, m, 15, 0.3, rng);
    for (std::size_t k = 3; k < data.size(); k += 5) {
      std::fill(data.observations[k].mask.begin(), data.observations[k].mask.end(), false);
      data.observations[k].values.setZero();
    }
    const Hyperparameters hp{3.0, 1.0, 0.05};
    const auto basis = BasisConfig::uniform(0.0, 15.0, 8);
    const auto grid = linspace(0.0, 15.0, 31);
    const auto task = TaskKernel::correlated(2, 0.3);
    RecursiveOptions opts;
    opts.covariance = CovarianceOutput::full;
    const auto plain = run_session(RecursiveMode::rgp, data, basis, Schedule::interpolation, grid, hp, task, nullptr, opts);
    const auto smooth = run_session(RecursiveMode::rgp_g, data, basis, Schedule::interpolation, grid, hp, task, &filter, opts);
    violations += !(plain.result.covariance.trace() > smooth.result.covariance.trace());
    for (std::size_t k = 0; k < plain.steps.size(); ++k) {
      const double a = plain.steps[k].trace_after, b = smooth.steps[k].trace_after;
      violations += plain.steps[k].observed > 0 ? !(a > b) : !(a >= b);
    }
  }
  return {"theorem2", violations == 0, fmt("%d violations over 10 sessions", violations)};
}

CheckResult stability(std::mt19937_64& rng) {
  int violations = 0, checks = 0;
  for (int k = 0; k < 60; ++k) {
    const int m = draw(rng, 4, 15);
    const Eigen::MatrixXd base = k % 2 ? random_tree(m, rng) : random_mesh(m, 2, rng);
    const auto a = build_laplacian(base);
    const auto b = build_laplacian(perturb(base, 1 + k % 2, rng));
    for (double alpha : {0.01, 0.05, 0.5}) {
      const auto r = stability_gap(a, b, alpha);
      ++checks;
      violations += !(r.filter_gap <= alpha * r.laplacian_gap + 1e-9);
    }
  }
  return {"stability", violations == 0, fmt("%d violations over %d perturbations", violations, checks)};
}

CheckResult oracle(std::mt19937_64& rng) {
  double worst_mean = 0.0, worst_var = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int d = draw(rng, 1, 2), m = draw(rng, 1, 5), t = draw(rng, 2, 20);
    const auto data = random_dataset(d, m, t, 0.0, rng);
    const Hyperparameters hp{2.0 + 3.0 * uniform01(rng), 0.5 + uniform01(rng), 1e-2 + 0.1 * uniform01(rng)};
    const auto task = d == 1 ? TaskKernel::identity(1) : TaskKernel::correlated(d, 0.4);
    const auto q = linspace(-1.0, t + 0.5, 25);
    const auto full = fit_predict_full(data, q, hp, task);
    const auto rec = run_session(RecursiveMode::rgp, data, BasisConfig::explicit_times(data.times), Schedule::interpolation,
                                 q, hp, task, nullptr);
    worst_mean = std::max(worst_mean, (rec.result.mean - full.mean).norm() / std::max(1e-300, full.mean.norm()));
    worst_var = std::max(worst_var, ((rec.result.variance - full.variance).array().abs() / full.variance.array()).maxCoeff());
  }
  return {"oracle", worst_mean <= 1e-6 && worst_var <= 1e-5,
          fmt("recursive vs batch: mean rel %.2e (<=1e-6), variance rel %.2e (<=1e-5)", worst_mean, worst_var)};
}

CheckResult causality(std::mt19937_64& rng) {
  int leaks = 0;
  double worst = 0.0;
  for (int s = 0; s < 5; ++s) {
    const int m = draw(rng, 2, 4);
    const auto data = random_dataset(2, m, 20, 0.2, rng);
    const Hyperparameters hp{3.0, 1.0, 0.05};
    const auto basis = BasisConfig::uniform(0.0, 21.0, 10);
    const auto task = TaskKernel::correlated(2, 0.3);
    const auto filter = make_filter(build_laplacian(random_tree(m, rng)), 0.05);
    const auto grid = linspace(0.0, 21.0, 43);
    std::vector<double> read;
    SessionObserver obs;
    obs.on_batch = [&](double t) { read.push_back(t); };
    obs.on_emit = [&](const std::vector<double>& q, std::optional<double>) {
      for (double b : read)
        for (double t : q) leaks += b >= t;
    };
    const auto session = run_session(RecursiveMode::rgp_g, data, basis, Schedule::prediction, grid, hp, task, &filter, {}, &obs);
    const auto nq = static_cast<Eigen::Index>(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      auto state = init_state(RecursiveMode::rgp_g, m, basis, hp, task, &filter);
      for (std::size_t k = 0; k < data.size() && data.times[k] < grid[g]; ++k)
        state = update_step(std::move(state), infer_step(state, data.times[k]), data.observations[k]);
      const auto ref = interpolate(state, {grid[g]});
      for (int r = 0; r < 2 * m; ++r) {
        const auto i = r * nq + static_cast<Eigen::Index>(g);
        worst = std::max({worst, std::abs(session.result.mean(i) - ref.mean(r)),
                          std::abs(session.result.variance(i) - ref.variance(r))});
      }
    }
  }
  return {"causality", leaks == 0 && worst <= 1e-8,
          fmt("%d future reads, streaming vs recompute gap %.2e (<=1e-8)", leaks, worst)};
}

/// Laplacians, filters and basis covariances of random graphs stay symmetric.
CheckResult symmetry(std::mt19937_64& rng, bool break_symmetry) {
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int m = draw(rng, 3, 12);
    Eigen::MatrixXd adjacency = random_mesh(m, 2, rng);
    if (break_symmetry && k == 0) adjacency(0, m - 1) = 1.0 - adjacency(0, m - 1);
    const auto graph = build_laplacian(adjacency);
    const auto filter = make_filter(graph, 0.05);
    auto state = init_state(RecursiveMode::rgp_g, m, BasisConfig::uniform(0.0, 10.0, 6), {3.0, 1.0, 0.05},
                            TaskKernel::correlated(2, 0.3), &filter);
    const auto data = random_dataset(2, m, 5, 0.2, rng);
    for (std::size_t t = 0; t < data.size(); ++t)
      state = update_step(std::move(state), infer_step(state, data.times[t]), data.observations[t]);
    for (const Eigen::MatrixXd* x : std::initializer_list<const Eigen::MatrixXd*>{&graph.laplacian(), &filter.matrix_s, &state.cov_f})
      worst = std::max(worst, (*x - x->transpose()).cwiseAbs().maxCoeff());
  }
  return {"symmetry", worst <= 1e-10, fmt("max asymmetry %.2e (<=1e-10)", worst)};
}

}  // namespace

std::vector<CheckResult> run_checks(const std::vector<std::string>& names, std::uint64_t seed, bool break_symmetry) {
  const RngStreams streams(seed);
  const std::map<std::string, std::function<CheckResult(std::mt19937_64&)>> battery{
      {"theorem1", theorem1},
      {"theorem2", theorem2},
      {"stability", stability},
      {"oracle", oracle},
      {"causality", causality},
      {"symmetry", [&](std::mt19937_64& rng) { return symmetry(rng, break_symmetry); }},
  };
  std::vector<CheckResult> results;
  for (const auto& name : known_checks()) {
    if (!names.empty() && std::find(names.begin(), names.end(), name) == names.end()) continue;
    auto rng = streams.stream("verify/" + name);
    try {
      results.push_back(battery.at(name)(rng));
    } catch (const Error& e) {
      results.push_back({name, false, e.what()});
    }
  }
  return results;
}

}  // namespace gridrecon::cli
