#include "gridrecon/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "gridrecon/error.hpp"
#include "gridrecon/rng.hpp"

namespace gridrecon {

TaskKernel GpSettings::task_kernel(int tasks) const {
  if (task_matrix) {
    require(task_matrix->rows() == tasks, ErrorCode::DimensionMismatch, "task matrix size differs from task count");
    return TaskKernel::from_matrix(*task_matrix);
  }
  return tasks == 1 ? TaskKernel::identity(1) : TaskKernel::correlated(tasks, task_corr);
}

ImputeOptions GpSettings::impute_options() const {
  ImputeOptions o;
  o.noise_mode = noise_mode;
  o.schedule = schedule;
  o.basis_n_max = basis_n;
  o.standardize = standardize;
  o.verify_theorems = verify_theorems;
  return o;
}

void ExperimentConfig::validate() const {
  require(seed_count >= 1, ErrorCode::InvalidSpec, "seed_count must be at least 1");
  require(!tasks.empty() && !missing_levels.empty() && !noises.empty() && !methods.empty(), ErrorCode::InvalidSpec,
          "tasks, missing levels, noises and methods must be nonempty");
  require(grid_stride >= 1, ErrorCode::InvalidSpec, "grid_stride must be at least 1");
  require(areas >= 1, ErrorCode::InvalidSpec, "areas must be at least 1");
  require(gp.alpha >= 0.0, ErrorCode::InvalidSpec, "alpha must be nonnegative");
  require(gp.basis_n >= 2, ErrorCode::InvalidSpec, "basis_n must be at least 2");
  gp.hp.validate();
  profile.validate(profile.classes.empty() && profile.base_load.empty() ? feeder.buses
                   : static_cast<int>(std::max(profile.classes.size(), profile.base_load.size())));
  SamplingSchedule probe{tasks, 0.0, fad, 0, 0};
  probe.validate(profile.horizon_steps);
  for (double m : missing_levels) require(m >= 0.0 && m < 1.0, ErrorCode::InvalidSpec, "missing levels in [0, 1)");
  if (tune) grid.validate();
  if (dsse.enabled) {
    require(!dsse.fad_levels.empty() && !dsse.sources.empty() && dsse.snapshots >= 1, ErrorCode::InvalidSpec,
            "dsse needs fad levels, sources and snapshots");
    for (double f : dsse.fad_levels) require(f > 0.0 && f <= 1.0, ErrorCode::InvalidSpec, "fad in (0, 1]");
    SamplingSchedule dprobe{dsse.tasks, 0.0, 1.0, 0, 0};
    dprobe.validate(profile.horizon_steps);
  }
}

SeedSetup prepare_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const RngStreams streams(seed);
  auto feeder_rng = streams.stream("feeder");
  SeedSetup s;
  s.feeder = random_radial_feeder(config.feeder, feeder_rng);
  s.graph = feeder_graph(s.feeder, {.allow_disconnected = true});
  s.filter = make_filter(s.graph, config.gp.alpha);
  ProfileSpec profile = config.profile;
  profile.seed = streams.derive("profile");
  s.truth = generate_truth(profile, s.feeder);
  for (int t = 0; t < profile.horizon_steps; t += config.grid_stride) s.fine_grid.push_back(t);
  return s;
}

namespace {

/// MAPE of every node of one task against the truth.
double task_mape(const ImputationResult& r, int task, const Truth& truth, Quantity q, const std::vector<double>& grid,
                 const std::vector<int>& nodes) {
  const Eigen::VectorXd all = truth_on_grid(truth, q, grid);
  const auto nq = static_cast<Eigen::Index>(grid.size());
  std::vector<double> est, ref;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (Eigen::Index k = 0; k < nq; ++k) {
      est.push_back(r.mean_at(task, static_cast<int>(i), k));
      ref.push_back(all(nodes[i] * nq + k));
    }
  return mape(est, ref);
}

std::vector<int> iota_nodes(int m) {
  std::vector<int> v(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

BatchDataset restrict_nodes(const BatchDataset& data, const std::vector<int>& nodes) {
  const int k = static_cast<int>(nodes.size());
  BatchDataset out = empty_dataset(data.tasks, k, data.times);
  for (std::size_t t = 0; t < data.size(); ++t)
    for (int a = 0; a < data.tasks; ++a)
      for (int i = 0; i < k; ++i) {
        const auto src = static_cast<std::size_t>(a * data.nodes + nodes[static_cast<std::size_t>(i)]);
        const auto dst = static_cast<std::size_t>(a * k + i);
        out.observations[t].mask[dst] = data.observations[t].mask[src];
        out.observations[t].values(static_cast<Eigen::Index>(dst)) =
            data.observations[t].values(static_cast<Eigen::Index>(src));
      }
  return out;
}

void run_dsse(const ExperimentConfig& config, const SeedSetup& setup, std::uint64_t seed, ExperimentReport& report) {
  const RngStreams streams(seed);
  const DsseSettings& ds = config.dsse;
  const GpSettings& gp = ds.gp ? *ds.gp : config.gp;
  const GraphFilter filter = make_filter(setup.graph, gp.alpha);
  NoiseSpec noise = config.noises.front();
  noise.seed = streams.derive("noise");
  const int m = setup.truth.nodes;
  const double base = setup.truth.base_power_kw;

  TaskColumns columns;
  columns.fill(-1);
  for (std::size_t a = 0; a < ds.tasks.size(); ++a) {
    const auto c = static_cast<std::size_t>(ds.tasks[a].quantity);
    if (columns[c] < 0) columns[c] = static_cast<int>(a);
  }
  std::vector<Eigen::Index> snaps;
  const auto nq = static_cast<Eigen::Index>(setup.fine_grid.size());
  for (int k = 0; k < ds.snapshots; ++k)
    snaps.push_back(std::min<Eigen::Index>(nq - 1, static_cast<Eigen::Index>((k + 0.5) * static_cast<double>(nq) / ds.snapshots)));

  for (double fad : ds.fad_levels) {
    const SamplingSchedule schedule{ds.tasks, 0.0, fad, streams.derive("meter"), streams.derive("missing")};
    const BatchDataset data = sample(setup.truth, schedule, noise);
    const auto meters = place_meters(m, fad, schedule.meter_seed);
    ObservationMask mask = ObservationMask::Constant(m, kStateColumns, false);
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < kStateColumns; ++c) {
        const int task = columns[static_cast<std::size_t>(c)];
        if (task >= 0) mask(b, c) = !ds.tasks[static_cast<std::size_t>(task)].metered || meters[static_cast<std::size_t>(b)];
      }

    for (Method source : ds.sources) {
      ImputationResult r = impute(source, data, setup.fine_grid, gp.hp, gp.task_kernel(data.tasks),
                                  source == Method::rgp_g ? &filter : nullptr, gp.impute_options());
      for (std::size_t a = 0; a < ds.tasks.size(); ++a) {
        const Quantity q = ds.tasks[a].quantity;
        if (q == Quantity::p || q == Quantity::q)
          for (int b = 0; b < m; ++b) r.mean.segment(r.index(static_cast<int>(a), b, 0), nq) /= base;
      }
      const auto states = estimate_states(r, snaps, columns, setup.truth.pf, mask, ds.epsilon, ds.lambda_pf, ds.solver);
      if (ds.keep_states) {
        for (std::size_t k = 0; k < states.size(); ++k) {
          const auto step = static_cast<Eigen::Index>(setup.fine_grid[static_cast<std::size_t>(snaps[k])]);
          DsseSnapshot snap{seed, source, fad, states[k].time, states[k].solution.x_hat, Eigen::MatrixXd(m, kStateColumns)};
          snap.estimate.leftCols(2) *= base;
          for (int c = 0; c < kStateColumns; ++c) snap.truth.col(c) = setup.truth.series[static_cast<std::size_t>(c)].col(step);
          report.dsse_states.push_back(std::move(snap));
        }
      }
      for (Quantity q : {Quantity::p, Quantity::q, Quantity::v_mag}) {
        const int c = static_cast<int>(q);
        const double scale = (q == Quantity::v_mag) ? 1.0 : base;
        double sum = 0.0;
        for (std::size_t k = 0; k < states.size(); ++k) {
          const auto step = static_cast<Eigen::Index>(setup.fine_grid[static_cast<std::size_t>(snaps[k])]);
          for (int b = 0; b < m; ++b)
            sum += std::abs(scale * states[k].solution.x_hat(b, c) - setup.truth[q](b, step));
        }
        report.dsse.push_back({seed, source, fad, q, sum / static_cast<double>(states.size() * static_cast<std::size_t>(m))});
      }
    }
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport report;
  for (int si = 0; si < config.seed_count; ++si) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(si);
    const RngStreams streams(seed);
    const SeedSetup setup = prepare_seed(config, seed);
    const int m = setup.truth.nodes;
    const auto d = static_cast<int>(config.tasks.size());

    Hyperparameters hp = config.gp.hp;
    TaskKernel task = config.gp.task_kernel(d);
    const ImputeOptions options = config.gp.impute_options();
    bool tuned = !config.tune;

    for (NoiseSpec noise : config.noises) {
      noise.seed = streams.derive("noise");
      for (double missing : config.missing_levels) {
        const SamplingSchedule schedule{config.tasks, missing, config.fad, streams.derive("meter"),
                                        streams.derive("missing")};
        const BatchDataset data = sample(setup.truth, schedule, noise);
        if (!tuned) {
          CvOptions cv;
          cv.impute = options;
          const CvReport cvr = cross_validate(data, config.grid, Method::rgp_g, &setup.filter, streams.derive("fold"), cv);
          hp = cvr.best.hp;
          if (!config.gp.task_matrix) task = d == 1 ? TaskKernel::identity(1) : TaskKernel::correlated(d, cvr.best.task_corr);
          report.tuned.push_back({seed, cvr.best});
          tuned = true;
        }
        for (Method method : config.methods) {
          const ImputationResult r = impute(method, data, setup.fine_grid, hp, task,
                                            method == Method::rgp_g ? &setup.filter : nullptr, options);
          for (int a = 0; a < d; ++a) {
            const Quantity q = config.tasks[static_cast<std::size_t>(a)].quantity;
            report.mape.push_back({seed, noise.family, noise.relative_std, missing, method, q,
                                   task_mape(r, a, setup.truth, q, setup.fine_grid, iota_nodes(m))});
          }
        }
      }
    }

    if (config.areas > 1) {
      NoiseSpec noise = config.noises.front();
      noise.seed = streams.derive("noise");
      const SamplingSchedule schedule{config.tasks, config.missing_levels.front(), config.fad, streams.derive("meter"),
                                      streams.derive("missing")};
      const BatchDataset data = sample(setup.truth, schedule, noise);
      const auto areas = partition_areas(setup.graph, config.areas, streams.derive("partition"));
      for (std::size_t ai = 0; ai < areas.size(); ++ai) {
        const GraphFilter af = make_filter(areas[ai].graph, config.gp.alpha);
        const ImputationResult r = impute(Method::rgp_g, restrict_nodes(data, areas[ai].nodes), setup.fine_grid, hp,
                                          task, &af, options);
        double sum = 0.0;
        int count = 0;
        for (int a = 0; a < d; ++a) {
          const Quantity q = config.tasks[static_cast<std::size_t>(a)].quantity;
          if (q != Quantity::p && q != Quantity::q) continue;
          sum += task_mape(r, a, setup.truth, q, setup.fine_grid, areas[ai].nodes);
          ++count;
        }
        report.areas.push_back({seed, static_cast<int>(ai) + 1, static_cast<int>(areas[ai].nodes.size()),
                                count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN()});
      }
    }

    if (config.dsse.enabled) run_dsse(config, setup, seed, report);
  }
  return report;
}

double ExperimentReport::mean_mape(Method method, Quantity q, double missing, NoiseFamily family,
                                   double noise_std) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : mape)
    if (r.method == method && r.quantity == q && r.missing == missing && r.noise_family == family &&
        r.noise_std == noise_std) {
      sum += r.mape;
      ++n;
    }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double ExperimentReport::mean_dsse(Method source, Quantity q, double fad) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : dsse)
    if (r.source == source && r.quantity == q && r.fad == fad) {
      sum += r.mae;
      ++n;
    }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

void write_report(const ExperimentReport& report, const ExperimentConfig& config, const std::filesystem::path& dir,
                  const OutputStamp& stamp) {
  using nlohmann::ordered_json;
  const auto num = format_number;
  ordered_json j;
  j["schema"] = kSchemaVersion;
  j["config_digest"] = stamp.config_digest;
  j["seed"] = stamp.seed;
  j["seed_count"] = config.seed_count;
  auto& rows = j["imputation"] = ordered_json::array();
  for (const auto& r : report.mape)
    rows.push_back({{"seed", r.seed}, {"noise_family", to_string(r.noise_family)}, {"noise_std", r.noise_std},
                    {"missing", r.missing}, {"method", to_string(r.method)}, {"quantity", to_string(r.quantity)},
                    {"mape", r.mape}});
  auto& drows = j["dsse"] = ordered_json::array();
  for (const auto& r : report.dsse)
    drows.push_back({{"seed", r.seed}, {"source", to_string(r.source)}, {"fad", r.fad},
                     {"quantity", to_string(r.quantity)}, {"mae", r.mae}});
  auto& arows = j["areas"] = ordered_json::array();
  for (const auto& r : report.areas)
    arows.push_back({{"seed", r.seed}, {"area", r.area}, {"nodes", r.nodes}, {"mape", r.mape}});
  auto& trows = j["tuned"] = ordered_json::array();
  for (const auto& r : report.tuned)
    trows.push_back({{"seed", r.seed}, {"lengthscale", r.best.hp.lengthscale},
                     {"signal_variance", r.best.hp.signal_variance}, {"noise_variance", r.best.hp.noise_variance},
                     {"task_corr", r.best.task_corr}});
  write_text(dir / "report.json", j.dump(2) + "\n");

  // Mean MAPE by missing level, method and task (first noise setting).
  const NoiseSpec& first = config.noises.front();
  std::string t1 = stamp.csv_header() + "missing,method,quantity,mean_mape\n";
  for (double missing : config.missing_levels)
    for (Method method : config.methods)
      for (const auto& task : config.tasks)
        t1 += num(missing) + "," + std::string(to_string(method)) + "," + std::string(to_string(task.quantity)) + "," +
              num(report.mean_mape(method, task.quantity, missing, first.family, first.relative_std)) + "\n";
  write_text(dir / "tables" / "imputation_mape.csv", t1);

  // Noise family by relative std at the first missing level.
  std::string t4 = stamp.csv_header() + "noise_family,relative_std,method,quantity,mean_mape\n";
  for (const auto& noise : config.noises)
    for (Method method : config.methods)
      for (const auto& task : config.tasks)
        t4 += std::string(to_string(noise.family)) + "," + num(noise.relative_std) + "," +
              std::string(to_string(method)) + "," + std::string(to_string(task.quantity)) + "," +
              num(report.mean_mape(method, task.quantity, config.missing_levels.front(), noise.family,
                                   noise.relative_std)) +
              "\n";
  write_text(dir / "tables" / "noise_family.csv", t4);

  if (config.dsse.enabled) {
    // Absolute errors per quantity and FAD, one column per source.
    std::string t5 = stamp.csv_header() + "fad,quantity";
    for (Method s : config.dsse.sources) t5 += "," + std::string(to_string(s));
    const bool paired = std::count(config.dsse.sources.begin(), config.dsse.sources.end(), Method::linear) &&
                        std::count(config.dsse.sources.begin(), config.dsse.sources.end(), Method::rgp_g);
    t5 += paired ? ",reduction_pct\n" : "\n";
    for (double fad : config.dsse.fad_levels)
      for (Quantity q : {Quantity::p, Quantity::q, Quantity::v_mag}) {
        t5 += num(fad) + "," + std::string(to_string(q));
        for (Method s : config.dsse.sources) t5 += "," + num(report.mean_dsse(s, q, fad));
        if (paired) {
          const double lin = report.mean_dsse(Method::linear, q, fad);
          t5 += "," + num(100.0 * (lin - report.mean_dsse(Method::rgp_g, q, fad)) / lin);
        }
        t5 += "\n";
      }
    write_text(dir / "tables" / "dsse_errors.csv", t5);
  }

  if (!report.areas.empty()) {
    // Per-area MAPE averaged over seeds.
    std::string t6 = stamp.csv_header() + "area,nodes,mean_mape\n";
    for (int a = 1; a <= config.areas; ++a) {
      double sum = 0.0;
      int n = 0, nodes = 0;
      for (const auto& r : report.areas)
        if (r.area == a) {
          sum += r.mape;
          nodes = r.nodes;
          ++n;
        }
      t6 += std::to_string(a) + "," + std::to_string(nodes) + "," + num(n > 0 ? sum / n : 0.0) + "\n";
    }
    write_text(dir / "tables" / "area_mape.csv", t6);
  }
}

}  // namespace gridrecon
