#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>

#include <json.hpp>

#include "gridrecon/error.hpp"
#include "gridrecon/io.hpp"

namespace gridrecon::cli {

namespace {

using nlohmann::ordered_json;

int node_index(const std::string& label, int nodes, const std::filesystem::path& file) {
  int v = -1;
  const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), v);
  if (ec != std::errc() || ptr != label.data() + label.size() || v < 0 || v >= nodes)
    fail(ErrorCode::ParseError, file.string() + ": node '" + label + "' is not an index below " + std::to_string(nodes));
  return v;
}

/// Sensing graph over the measurement node indices.
FeederGraph load_graph(const std::filesystem::path& file, int nodes) {
  Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(nodes, nodes);
  for (const auto& [a, b] : read_edges_csv(file)) {
    const int i = node_index(a, nodes, file), j = node_index(b, nodes, file);
    require(i != j, ErrorCode::SelfLoop, file.string() + ": self loop at node " + a);
    adjacency(i, j) = adjacency(j, i) = 1.0;
  }
  return build_laplacian(adjacency);
}

std::optional<GraphFilter> filter_for(const RunConfig& rc, Method method, const GpSettings& gp, int nodes) {
  if (method != Method::rgp_g) return std::nullopt;
  require(rc.edges.has_value(), ErrorCode::MissingRequired, "rgp-g needs input.edges (or --edges)");
  return make_filter(load_graph(*rc.edges, nodes), gp.alpha);
}

std::vector<double> fine_grid(const RunConfig& rc, const BatchDataset& data) {
  const auto [lo, hi] = std::minmax_element(data.times.begin(), data.times.end());
  const double start = rc.fine_grid.start.value_or(std::floor(*lo));
  const double end = rc.fine_grid.end.value_or(std::ceil(*hi));
  require(end >= start, ErrorCode::InvalidSpec, "impute.grid_end is before impute.grid_start");
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor((end - start) / rc.fine_grid.step + 1e-9));
  for (long k = 0; k <= n; ++k) grid.push_back(start + static_cast<double>(k) * rc.fine_grid.step);
  return grid;
}

ordered_json stamp_json(const OutputStamp& stamp) {
  ordered_json j;
  j["schema"] = kSchemaVersion;
  j["config_digest"] = stamp.config_digest;
  j["seed"] = stamp.seed;
  return j;
}

int impute_command(const RunConfig& rc, const OutputStamp& stamp) {
  const auto data = read_measurements_csv(*rc.measurements);
  const GpSettings& gp = rc.experiment.gp;
  const auto filter = filter_for(rc, rc.method, gp, data.nodes);
  const auto grid = fine_grid(rc, data);
  std::vector<TracePoint> trace;
  auto options = gp.impute_options();
  if (rc.trace_log) options.trace_sink = &trace;
  const auto result = impute(rc.method, data, grid, gp.hp, gp.task_kernel(data.tasks), filter ? &*filter : nullptr, options);
  write_imputation_csv(rc.out / "imputation.csv", result, stamp);
  if (rc.trace_log) write_trace_log_csv(rc.out / "trace_log.csv", trace, stamp);
  return kExitOk;
}

int tune_command(const RunConfig& rc, const OutputStamp& stamp) {
  const auto data = read_measurements_csv(*rc.measurements);
  const auto& ex = rc.experiment;
  const auto filter = filter_for(rc, rc.tune_method, ex.gp, data.nodes);
  CvOptions options;
  options.impute = ex.gp.impute_options();
  const auto report = cross_validate(data, ex.grid, rc.tune_method, filter ? &*filter : nullptr, rc.seed, options);

  auto j = stamp_json(stamp);
  j["method"] = to_string(rc.tune_method);
  j["folds"] = ex.grid.folds;
  const auto candidate = [](const CvCandidate& c) {
    return ordered_json{{"lengthscale", c.hp.lengthscale},
                        {"signal_variance", c.hp.signal_variance},
                        {"noise_variance", c.hp.noise_variance},
                        {"task_correlation", c.task_corr}};
  };
  j["best"] = candidate(report.best);
  auto& rows = j["table"] = ordered_json::array();
  std::string table = "# gridrecon schema=" + std::to_string(kSchemaVersion) + " config=" + stamp.config_digest +
                      " seed=" + std::to_string(stamp.seed) + "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%12s %12s %12s %12s %12s  %s\n", "lengthscale", "signal_var", "noise_var", "task_corr",
                "mean_mape", "status");
  table += line;
  for (const auto& r : report.table) {
    auto row = candidate(r.candidate);
    row["ok"] = r.ok;
    row["mean_mape"] = r.ok ? ordered_json(r.mean_mape) : ordered_json(nullptr);
    row["fold_mape"] = r.fold_mape;
    rows.push_back(std::move(row));
    const bool best = r.candidate == report.best;
    std::snprintf(line, sizeof line, "%12g %12g %12g %12g %12.6g  %s\n", r.candidate.hp.lengthscale,
                  r.candidate.hp.signal_variance, r.candidate.hp.noise_variance, r.candidate.task_corr, r.mean_mape,
                  !r.ok ? "failed" : best ? "best" : "");
    table += line;
  }
  write_text(rc.out / "cv_report.json", j.dump(2) + "\n");
  write_text(rc.out / "cv_table.txt", table);
  return kExitOk;
}

std::string time_label(double t) {
  std::string s = format_number(t);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

void write_state_csv(const std::filesystem::path& path, const Eigen::MatrixXd& estimate, const Eigen::MatrixXd* truth,
                     const OutputStamp& stamp) {
  std::string out = stamp.csv_header() + "phase,quantity,true,estimated,abs_error\n";
  for (Eigen::Index b = 0; b < estimate.rows(); ++b)
    for (int c = 0; c < kStateColumns; ++c) {
      out += std::to_string(b) + "," + kStateColumnNames[static_cast<std::size_t>(c)] + ",";
      out += truth ? format_number((*truth)(b, c)) : "";
      out += "," + format_number(estimate(b, c)) + ",";
      out += truth ? format_number(std::abs(estimate(b, c) - (*truth)(b, c))) : "";
      out += "\n";
    }
  write_text(path, out);
}

/// Simulated feeders: reconcile, estimate and compare against the truth.
int dsse_simulated(const RunConfig& rc, const OutputStamp& stamp) {
  ExperimentConfig config = rc.experiment;
  config.dsse.enabled = true;
  config.dsse.keep_states = true;
  config.methods = {Method::linear};
  config.missing_levels = {0.0};
  config.tune = false;
  config.areas = 1;
  config.validate();
  const auto report = run_experiment(config);

  for (const auto& s : report.dsse_states) {
    const std::string name = "seed" + std::to_string(s.seed) + "_" + std::string(to_string(s.source)) + "_fad" +
                             time_label(s.fad) + "_t" + time_label(s.time) + ".csv";
    write_state_csv(rc.out / "states" / name, s.estimate, &s.truth, stamp);
  }
  auto j = stamp_json(stamp);
  j["seed_count"] = config.seed_count;
  j["units"] = {{"P", "kW"}, {"Q", "kvar"}, {"v_mag", "pu"}};
  auto& by_fad = j["mean_abs_error"] = ordered_json::array();
  for (double fad : config.dsse.fad_levels)
    for (Method source : config.dsse.sources) {
      ordered_json row{{"fad", fad}, {"source", to_string(source)}};
      for (Quantity q : {Quantity::p, Quantity::q, Quantity::v_mag}) row[std::string(to_string(q))] = report.mean_dsse(source, q, fad);
      by_fad.push_back(std::move(row));
    }
  write_text(rc.out / "dsse_summary.json", j.dump(2) + "\n");
  return kExitOk;
}

/// Measured data: reconcile the file, then estimate states at evenly spaced grid times.
int dsse_measured(const RunConfig& rc, const OutputStamp& stamp) {
  const auto data = read_measurements_csv(*rc.measurements);
  const auto pf = read_pf_model_json(*rc.pf_model);
  const auto& ds = rc.experiment.dsse;
  const GpSettings& gp = ds.gp ? *ds.gp : rc.experiment.gp;
  const int m = pf.phases();
  require(data.nodes == m, ErrorCode::DimensionMismatch,
          "measurement nodes (" + std::to_string(data.nodes) + ") differ from pf model phases (" + std::to_string(m) + ")");
  for (int c : rc.dsse_input.task_columns)
    require(c < data.tasks, ErrorCode::InvalidSpec, "dsse.task_columns refers to a task missing from the measurements");
  require(ds.snapshots >= 1, ErrorCode::InvalidSpec, "dsse.snapshots must be at least 1");

  const auto filter = filter_for(rc, rc.method, gp, m);
  const auto grid = fine_grid(rc, data);
  const auto reconciled = impute(rc.method, data, grid, gp.hp, gp.task_kernel(data.tasks), filter ? &*filter : nullptr,
                                 gp.impute_options());
  std::vector<bool> metered(static_cast<std::size_t>(m), rc.dsse_input.metered_phases.empty());
  for (int b : rc.dsse_input.metered_phases) {
    require(b >= 0 && b < m, ErrorCode::InvalidSpec, "dsse.metered_phases entry out of range");
    metered[static_cast<std::size_t>(b)] = true;
  }
  ObservationMask mask = ObservationMask::Constant(m, kStateColumns, false);
  for (int b = 0; b < m; ++b)
    for (int c = 0; c < kStateColumns; ++c) mask(b, c) = metered[static_cast<std::size_t>(b)] && rc.dsse_input.task_columns[static_cast<std::size_t>(c)] >= 0;

  std::vector<Eigen::Index> snaps;
  const auto nq = static_cast<Eigen::Index>(grid.size());
  for (int k = 0; k < ds.snapshots; ++k)
    snaps.push_back(std::min<Eigen::Index>(nq - 1, static_cast<Eigen::Index>((k + 0.5) * static_cast<double>(nq) / ds.snapshots)));
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
  const auto states =
      estimate_states(reconciled, snaps, rc.dsse_input.task_columns, pf, mask, ds.epsilon, ds.lambda_pf, ds.solver);

  auto j = stamp_json(stamp);
  auto& rows = j["states"] = ordered_json::array();
  for (const auto& s : states) {
    const std::string file = "t" + time_label(s.time) + ".csv";
    write_state_csv(rc.out / "states" / file, s.solution.x_hat, nullptr, stamp);
    rows.push_back({{"time", s.time},
                    {"file", "states/" + file},
                    {"fit_residual", s.solution.fit_residual},
                    {"pf_residual_phasor", s.solution.pf_residual_phasor},
                    {"pf_residual_mag", s.solution.pf_residual_mag},
                    {"nuclear_norm", s.solution.nuclear_norm},
                    {"converged", s.solution.converged}});
  }
  write_text(rc.out / "dsse_summary.json", j.dump(2) + "\n");
  return kExitOk;
}

int experiment_command(const RunConfig& rc, const OutputStamp& stamp) {
  rc.experiment.validate();
  write_report(run_experiment(rc.experiment), rc.experiment, rc.out, stamp);
  return kExitOk;
}

int verify_command(const RunConfig& rc, const OutputStamp& stamp) {
  const auto results = run_checks(rc.checks, rc.seed, rc.break_symmetry);
  auto j = stamp_json(stamp);
  bool passed = true;
  auto& checks = j["checks"] = ordered_json::array();
  for (const auto& r : results) {
    passed = passed && r.passed;
    checks.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
  }
  j["passed"] = passed;
  write_text(rc.out / "verdict.json", j.dump(2) + "\n");
  return passed ? kExitOk : kExitVerification;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::VerificationFailure:
      return kExitVerification;
    case ErrorCode::FactorizationFailure:
    case ErrorCode::SingularSystem:
    case ErrorCode::NotConverged:
    case ErrorCode::AllCandidatesFailed:
      return kExitNumerical;
    default:
      return kExitConfig;
  }
}

int run_command(const RunConfig& rc) {
  const OutputStamp stamp{rc.digest(), rc.seed};
  write_text(rc.out / "effective_config.toml", stamp.csv_header() + rc.effective_toml());
  switch (rc.subcommand) {
    case Subcommand::impute:
      return impute_command(rc, stamp);
    case Subcommand::tune:
      return tune_command(rc, stamp);
    case Subcommand::dsse:
      return rc.measurements ? dsse_measured(rc, stamp) : dsse_simulated(rc, stamp);
    case Subcommand::experiment:
      return experiment_command(rc, stamp);
    case Subcommand::verify:
      return verify_command(rc, stamp);
  }
  return kExitConfig;
}

int main_entry(int argc, const char* const* argv) {
  try {
    const auto config = parse_config(argc, argv);
    if (!config) return kExitOk;
    return run_command(*config);
  } catch (const Error& e) {
    std::cerr << "gridrecon: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "gridrecon: internal error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace gridrecon::cli
