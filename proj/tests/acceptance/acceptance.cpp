// One PASS/FAIL line per acceptance criterion. Usage: gridrecon_acceptance [N ...]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gridrecon/dsse.hpp"
#include "gridrecon/experiment.hpp"
#include "gridrecon/gp_batch.hpp"
#include "gridrecon/gp_recursive.hpp"
#include "gridrecon/io.hpp"
#include "gridrecon/rng.hpp"

using namespace gridrecon;
namespace fx = gridrecon::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared imputation settings of the method-ordering and noise-family runs.
ExperimentConfig imputation_config() {
  ExperimentConfig c;
  c.seed_count = 20;
  c.feeder.buses = 12;
  c.profile.horizon_steps = 180;
  c.profile.start_minute = 420;
  c.tasks = {{Quantity::p, 15, 0, true, {}}, {Quantity::v_mag, 1, 0, false, {}}};
  c.gp.basis_n = 32;
  c.gp.hp = {15.0, 1.0, 1e-2};
  c.gp.task_corr = -0.3;
  c.gp.alpha = 0.05;
  return c;
}

Verdict oracle_equivalence() {
  const auto start = Clock::now();
  std::mt19937_64 rng(7);
  double worst_mean = 0.0, worst_var = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int d = 1 + static_cast<int>(rng() % 2), m = 1 + static_cast<int>(rng() % 5), t = 2 + static_cast<int>(rng() % 19);
    auto data = fx::random_dataset(d, m, t, rng);
    Hyperparameters hp{2.0 + 3.0 * uniform01(rng), 0.5 + uniform01(rng), 1e-2 + 0.1 * uniform01(rng)};
    TaskKernel task = d == 1 ? TaskKernel::identity(1) : TaskKernel::correlated(d, 0.4);
    auto q = fx::grid(-1.0, t + 0.5, 25);
    auto full = fit_predict_full(data, q, hp, task);
    auto rec = run_session(RecursiveMode::rgp, data, BasisConfig::explicit_times(data.times), Schedule::interpolation, q,
                           hp, task, nullptr);
    worst_mean = std::max(worst_mean, (rec.result.mean - full.mean).norm() / std::max(1e-300, full.mean.norm()));
    worst_var = std::max(worst_var, ((rec.result.variance - full.variance).array().abs() / full.variance.array()).maxCoeff());
  }
  const double secs = seconds_since(start);
  return {worst_mean <= 1e-6 && worst_var <= 1e-5 && secs < 30.0,
          fmt("worst mean rel %.2e (<=1e-6), worst var rel %.2e (<=1e-5), %.1fs (<30s)", worst_mean, worst_var, secs)};
}

Verdict prior_trace_order() {
  std::mt19937_64 rng(101);
  int violations = 0;
  for (int g = 0; g < 100; ++g) {
    const int m = 3 + static_cast<int>(rng() % 18);
    auto graph = build_laplacian(g % 2 ? fx::random_tree(m, rng) : fx::random_mesh(m, m / 3, rng));
    auto filter = make_filter(graph, 0.05);
    auto basis = BasisConfig::uniform(0.0, 20.0, 4 + static_cast<int>(rng() % 6));
    Hyperparameters hp{1.0 + 10.0 * uniform01(rng), 0.2 + 2.0 * uniform01(rng), 1e-2};
    TaskKernel task = TaskKernel::correlated(2, 0.6 * uniform01(rng));
    auto plain = init_state(RecursiveMode::rgp, m, basis, hp, task, nullptr);
    auto smooth = init_state(RecursiveMode::rgp_g, m, basis, hp, task, &filter);
    violations += !(plain.trace() > smooth.trace());
  }
  return {violations == 0, fmt("%d violations over 100 graphs (M in [3, 20], alpha 0.05)", violations)};
}

Verdict posterior_trace_order() {
  std::mt19937_64 rng(202);
  int violations = 0, strict_steps = 0, missing_steps = 0;
  for (int s = 0; s < 20; ++s) {
    const int m = 3 + static_cast<int>(rng() % 6);
    auto filter = make_filter(build_laplacian(fx::random_tree(m, rng)), 0.05);
    auto data = fx::random_dataset(2, m, 15, rng);
    fx::drop_entries(data, 0.3, rng);
    for (std::size_t k = 3; k < data.size(); k += 5) {
      std::fill(data.observations[k].mask.begin(), data.observations[k].mask.end(), false);
      data.observations[k].values.setZero();
    }
    Hyperparameters hp{3.0, 1.0, 0.05};
    auto basis = BasisConfig::uniform(0.0, 15.0, 8);
    auto grid = fx::grid(0.0, 15.0, 31);
    RecursiveOptions opts;
    opts.covariance = CovarianceOutput::full;
    auto plain = run_session(RecursiveMode::rgp, data, basis, Schedule::interpolation, grid, hp, TaskKernel::correlated(2, 0.3),
                             nullptr, opts);
    auto smooth = run_session(RecursiveMode::rgp_g, data, basis, Schedule::interpolation, grid, hp,
                              TaskKernel::correlated(2, 0.3), &filter, opts);
    violations += !(plain.result.covariance.trace() > smooth.result.covariance.trace());
    for (std::size_t k = 0; k < plain.steps.size(); ++k) {
      const double a = plain.steps[k].trace_after, b = smooth.steps[k].trace_after;
      if (plain.steps[k].observed > 0) {
        ++strict_steps;
        violations += !(a > b);
      } else {
        ++missing_steps;
        violations += !(a >= b);
      }
    }
  }
  return {violations == 0, fmt("%d violations over 20 sessions (%d observed steps strict, %d all-missing steps)", violations,
                               strict_steps, missing_steps)};
}

Verdict stability_bound() {
  std::mt19937_64 rng(303);
  int violations = 0, checks = 0;
  double worst = -1e300;
  for (int k = 0; k < 200; ++k) {
    const int m = 4 + static_cast<int>(rng() % 12);
    Eigen::MatrixXd base = k % 2 ? fx::random_tree(m, rng) : fx::random_mesh(m, 2, rng);
    Eigen::MatrixXd other = fx::perturb_edges(base, 1 + k % 2 * 1, rng);
    auto a = build_laplacian(base);
    auto b = build_laplacian(other, {}, {.allow_disconnected = true});
    for (double alpha : {0.01, 0.05, 0.5}) {
      auto r = stability_gap(a, b, alpha);
      ++checks;
      const double slack = r.filter_gap - alpha * r.laplacian_gap;
      worst = std::max(worst, slack);
      violations += !(slack <= 1e-9);
    }
  }
  return {violations == 0, fmt("%d violations over %d checks, max |S-Sp| - alpha|L-Lp| = %.2e", violations, checks, worst)};
}

Verdict method_ordering() {
  const auto start = Clock::now();
  ExperimentConfig c = imputation_config();
  auto report = run_experiment(c);
  const double secs = seconds_since(start);
  bool ok = secs < 300.0;
  std::string detail;
  for (double miss : c.missing_levels) {
    for (Quantity q : {Quantity::p, Quantity::v_mag}) {
      const double g = report.mean_mape(Method::rgp_g, q, miss, NoiseFamily::gaussian, 0.01);
      const double r = report.mean_mape(Method::rgp, q, miss, NoiseFamily::gaussian, 0.01);
      const double l = report.mean_mape(Method::linear, q, miss, NoiseFamily::gaussian, 0.01);
      ok = ok && g < r && g < l;
      detail += fmt("%s@%.0f%% %.4g/%.4g/%.4g ", std::string(to_string(q)).c_str(), 100 * miss, g, r, l);
    }
  }
  const double g0 = report.mean_mape(Method::rgp_g, Quantity::p, 0.0, NoiseFamily::gaussian, 0.01);
  const double l0 = report.mean_mape(Method::linear, Quantity::p, 0.0, NoiseFamily::gaussian, 0.01);
  const double gain = 1.0 - g0 / l0;
  ok = ok && gain >= 0.20;
  return {ok, detail + fmt("(rgp-g/rgp/linear); slow-task gain %.1f%% (>=20%%); %.0fs (<300s)", 100 * gain, secs)};
}

Verdict noise_family() {
  ExperimentConfig c = imputation_config();
  c.missing_levels = {0.0};
  c.methods = {Method::rgp_g};
  c.noises = {{NoiseFamily::gaussian, 0.05, 0}, {NoiseFamily::laplacian, 0.05, 0},
              {NoiseFamily::gaussian, 0.10, 0}, {NoiseFamily::laplacian, 0.10, 0}};
  auto report = run_experiment(c);
  int worse5 = 0, worse10 = 0;
  for (int s = 0; s < c.seed_count; ++s) {
    auto pick = [&](NoiseFamily f, double std) {
      for (const auto& row : report.mape)
        if (row.seed == c.seed + static_cast<std::uint64_t>(s) && row.quantity == Quantity::p && row.noise_family == f &&
            row.noise_std == std)
          return row.mape;
      return std::nan("");
    };
    worse5 += pick(NoiseFamily::laplacian, 0.05) > pick(NoiseFamily::gaussian, 0.05);
    worse10 += pick(NoiseFamily::laplacian, 0.10) > pick(NoiseFamily::gaussian, 0.10);
  }
  return {worse5 >= 16 && worse10 >= 16,
          fmt("laplacian worse in %d/20 seeds at 5%% and %d/20 at 10%% (need >=16 each)", worse5, worse10)};
}

Verdict dsse_monotonicity() {
  ExperimentConfig c;
  c.seed_count = 20;
  c.feeder.buses = 9;
  c.profile.horizon_steps = 120;
  c.profile.start_minute = 420;
  c.methods = {Method::linear};
  c.missing_levels = {0.0};
  c.gp.basis_n = 32;
  c.gp.hp = {15.0, 1.0, 1e-2};
  c.dsse.enabled = true;
  c.dsse.epsilon = 1e-4;
  c.dsse.lambda_pf = 1.0;
  GpSettings g = c.gp;
  g.task_matrix = Eigen::MatrixXd(3, 3);
  *g.task_matrix << 1.0, 0.9, -0.3, 0.9, 1.0, -0.3, -0.3, -0.3, 1.0;
  c.dsse.gp = g;
  auto report = run_experiment(c);

  bool ok = true;
  std::string detail;
  for (Method src : c.dsse.sources)
    for (Quantity q : {Quantity::p, Quantity::q, Quantity::v_mag}) {
      const double e50 = report.mean_dsse(src, q, 0.5), e70 = report.mean_dsse(src, q, 0.7), e90 = report.mean_dsse(src, q, 0.9);
      ok = ok && e90 < e70 && e70 < e50;
      detail += fmt("%s/%s %.3g>%.3g>%.3g ", std::string(to_string(src)).c_str(), std::string(to_string(q)).c_str(), e50, e70,
                    e90);
    }
  int wins = 0;
  for (int s = 0; s < c.seed_count; ++s) {
    double lin = 0.0, gp = 0.0;
    for (const auto& row : report.dsse)
      if (row.seed == c.seed + static_cast<std::uint64_t>(s) && row.fad == 0.9 && row.quantity == Quantity::q)
        (row.source == Method::linear ? lin : gp) = row.mae;
    wins += gp < lin;
  }
  ok = ok && wins >= 15;
  return {ok, detail + fmt("; GP Q wins at FAD 90%%: %d/20 (>=15)", wins)};
}

Verdict completion_recovery() {
  const auto start = Clock::now();
  int recovered = 0;
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    auto rng = RngStreams(100 + static_cast<std::uint64_t>(s)).stream("completion");
    Eigen::MatrixXd u(9, 2), v(5, 2);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = 0.2 + uniform01(rng);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = standard_normal(rng);
    v.row(4) = v.row(4).cwiseAbs();  // the |v| column is nonnegative
    const Eigen::MatrixXd x = u * v.transpose();
    // 60% observed: 3 of 5 entries in every row.
    ObservationMask omega = ObservationMask::Constant(9, 5, false);
    for (int i = 0; i < 9; ++i)
      for (int placed = 0; placed < 3;) {
        const int j = std::min(4, static_cast<int>(5 * uniform01(rng)));
        if (!omega(i, j)) omega(i, j) = true, ++placed;
      }
    LinearPFModel pf;
    pf.m_matrix = Eigen::MatrixXcd::Zero(9, 18);
    pf.k_matrix = Eigen::MatrixXd::Zero(9, 18);
    pf.v0 = Eigen::VectorXcd::Ones(9);
    pf.magnitude_offset = Eigen::VectorXd::Ones(9);
    const DsseProblem problem{project_observed(x, omega), omega, pf, 1e-12, 0.0};
    const double err = (solve(problem).x_hat - x).norm() / x.norm();
    worst = std::max(worst, err);
    recovered += err <= 1e-3;
  }
  const double secs = seconds_since(start);
  return {recovered >= 18 && secs < 10.0, fmt("%d/20 recovered to 1e-3 (>=18), %.2fs (<10s)", recovered, secs)};
}

Verdict complexity_scaling() {
  // The three sizes advance in lockstep so clock drift hits them alike.
  const int d = 2, m = 12;
  const std::vector<int> sizes{32, 64, 128};
  auto filter = make_filter(build_laplacian(fx::path_adjacency(m)), 0.05);
  std::vector<RecursiveState> states;
  for (int n : sizes)
    states.push_back(init_state(RecursiveMode::rgp_g, m, BasisConfig::uniform(0.0, 100.0, n), {5.0, 1.0, 1e-2},
                                TaskKernel::correlated(d, 0.3), &filter));
  std::vector<std::vector<double>> samples(sizes.size());
  std::mt19937_64 rng(9);
  for (int step = 0; step < 55; ++step) {
    MeasurementBatch batch;
    batch.time = 0.5 + step * 1.7;
    batch.values.resize(d * m);
    for (int i = 0; i < d * m; ++i) batch.values(i) = standard_normal(rng);
    batch.mask.assign(static_cast<std::size_t>(d * m), true);
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      const auto t0 = Clock::now();
      auto pred = infer_step(states[s], batch.time);
      states[s] = update_step(std::move(states[s]), pred, batch);
      if (step >= 5) samples[s].push_back(seconds_since(t0));
    }
  }
  std::vector<double> medians;
  for (auto& v : samples) {
    std::nth_element(v.begin(), v.begin() + 25, v.end());
    medians.push_back(v[25]);
  }
  const double r1 = medians[1] / medians[0], r2 = medians[2] / medians[1];
  const bool ok = r1 >= 3.0 && r1 <= 6.0 && r2 >= 3.0 && r2 <= 6.0;
  return {ok, fmt("median step %.3g/%.3g/%.3g ms at n=32/64/128, ratios %.2f and %.2f (in [3, 6])", 1e3 * medians[0],
                  1e3 * medians[1], 1e3 * medians[2], r1, r2)};
}

Verdict prediction_causality() {
  std::mt19937_64 rng(404);
  int leaks = 0;
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    const int m = 2 + static_cast<int>(rng() % 3);
    auto data = fx::random_dataset(2, m, 20, rng);
    fx::drop_entries(data, 0.2, rng);
    Hyperparameters hp{3.0, 1.0, 0.05};
    auto basis = BasisConfig::uniform(0.0, 21.0, 10);
    auto task = TaskKernel::correlated(2, 0.3);
    auto filter = make_filter(build_laplacian(fx::random_tree(m, rng)), 0.05);
    auto grid = fx::grid(0.0, 21.0, 43);

    std::vector<double> read;
    SessionObserver obs;
    obs.on_batch = [&](double t) { read.push_back(t); };
    obs.on_emit = [&](const std::vector<double>& q, std::optional<double>) {
      for (double b : read)
        for (double t : q) leaks += b >= t;
    };
    auto session = run_session(RecursiveMode::rgp_g, data, basis, Schedule::prediction, grid, hp, task, &filter, {}, &obs);

    // Recompute from scratch: replay every batch strictly before each grid time, then interpolate.
    for (std::size_t g = 0; g < grid.size(); ++g) {
      auto state = init_state(RecursiveMode::rgp_g, m, basis, hp, task, &filter);
      for (std::size_t k = 0; k < data.size() && data.times[k] < grid[g]; ++k)
        state = update_step(std::move(state), infer_step(state, data.times[k]), data.observations[k]);
      auto ref = interpolate(state, {grid[g]});
      for (int r = 0; r < 2 * m; ++r) {
        const double a = session.result.mean(r * static_cast<Eigen::Index>(grid.size()) + static_cast<Eigen::Index>(g));
        const double v = session.result.variance(r * static_cast<Eigen::Index>(grid.size()) + static_cast<Eigen::Index>(g));
        worst = std::max({worst, std::abs(a - ref.mean(r)), std::abs(v - ref.variance(r))});
      }
    }
  }
  return {leaks == 0 && worst <= 1e-8, fmt("%d future reads, worst streaming vs recompute gap %.2e (<=1e-8)", leaks, worst)};
}

Verdict determinism() {
  ExperimentConfig c;
  c.seed_count = 2;
  c.feeder.buses = 6;
  c.profile.horizon_steps = 60;
  c.gp.basis_n = 12;
  c.methods = {Method::rgp_g, Method::rgp, Method::full_gp, Method::linear};
  c.missing_levels = {0.0, 0.2};
  c.noises = {{NoiseFamily::gaussian, 0.01, 0}, {NoiseFamily::laplacian, 0.01, 0}};
  c.areas = 2;
  c.dsse.enabled = true;
  c.dsse.snapshots = 2;
  const auto root = std::filesystem::temp_directory_path() / "gridrecon_acceptance_determinism";
  std::filesystem::remove_all(root);
  OutputStamp stamp{digest_hex("determinism"), c.seed};
  write_report(run_experiment(c), c, root / "a", stamp);
  write_report(run_experiment(c), c, root / "b", stamp);
  int files = 0, differing = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto twin = root / "b" / std::filesystem::relative(entry.path(), root / "a");
    differing += !std::filesystem::exists(twin) || read_text(entry.path()) != read_text(twin);
  }
  return {files > 0 && differing == 0, fmt("%d report files, %d differ", files, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"prior trace inequality", prior_trace_order},
      {"posterior trace inequality", posterior_trace_order},
      {"filter stability bound", stability_bound},
      {"method ordering", method_ordering},
      {"noise family direction", noise_family},
      {"DSSE FAD monotonicity", dsse_monotonicity},
      {"matrix completion recovery", completion_recovery},
      {"complexity scaling", complexity_scaling},
      {"prediction causality", prediction_causality},
      {"determinism", determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.push_back(i);

  int failures = 0;
  for (int id : selected) {
    if (id < 1 || id > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    const auto& [name, run] = criteria[static_cast<std::size_t>(id - 1)];
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
