#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridrecon/dsse.hpp"
#include "gridrecon/experiment.hpp"
#include "gridrecon/hyper.hpp"
#include "gridrecon/imputation.hpp"

namespace gridrecon::cli {

enum class Subcommand { impute, tune, dsse, experiment, verify };

std::string_view to_string(Subcommand s);

/// Fine grid of the impute and tune commands; unset bounds follow the data.
struct FineGridSpec {
  std::optional<double> start;
  std::optional<double> end;
  double step = 1.0;
};

/// Reconstruction from a measurement file into state estimates.
struct DsseInput {
  /// State column fed by each measurement task (-1 = not sensed), in P, Q, Re(v), Im(v), |v| order.
  TaskColumns task_columns{0, 1, -1, -1, 2};
  /// Phases carrying a meter; empty means all.
  std::vector<int> metered_phases;
};

struct RunConfig {
  Subcommand subcommand = Subcommand::impute;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  bool trace_log = false;
  bool break_symmetry = false;

  std::optional<std::filesystem::path> measurements;
  std::optional<std::filesystem::path> edges;
  std::optional<std::filesystem::path> pf_model;

  Method method = Method::rgp_g;
  FineGridSpec fine_grid;
  /// Method of the tune command.
  Method tune_method = Method::rgp_g;
  DsseInput dsse_input;
  std::vector<std::string> checks;

  /// gp, tune grid, dsse and simulation settings. experiment.gp carries the
  /// GP settings of every subcommand, including mode, schedule and alpha.
  ExperimentConfig experiment;

  /// The merged configuration as TOML, used for the digest and effective_config.toml.
  std::string effective_toml() const;
  /// Digest of effective_toml() without the output location.
  std::string digest() const;
};

/// Names accepted by --checks.
const std::vector<std::string>& known_checks();

/// Parses argv and the optional --config file. Precedence: flag > file > default.
/// Throws gridrecon::Error with ParseError, UnknownKey, TypeError, MissingRequired,
/// MutuallyExclusive or InvalidSpec. Returns nullopt when help was printed.
std::optional<RunConfig> parse_config(int argc, const char* const* argv);

}  // namespace gridrecon::cli
