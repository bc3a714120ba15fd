#pragma once

#include <complex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridrecon/graph.hpp"

namespace gridrecon {

/// Radial feeder below one slack bus. Bus i connects to parent[i] (-1 = slack)
/// through impedance line_impedance[i] (per unit). Loads are consumption-positive.
struct RadialFeeder {
  std::vector<int> parent;
  std::vector<std::complex<double>> line_impedance;
  std::complex<double> slack_voltage{1.0, 0.0};
  std::vector<std::string> labels;

  int buses() const { return static_cast<int>(parent.size()); }
  /// Throws NonRadialTopology when a parent chain does not reach the slack bus.
  void validate() const;
  /// Buses ordered so every parent precedes its children.
  std::vector<int> topological_order() const;
};

/// Builds a feeder from labelled branches; exactly one endpoint chain must lead to
/// slack_label. Throws NonRadialTopology on loops or islands.
RadialFeeder radial_feeder_from_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                                      const std::vector<std::complex<double>>& impedances,
                                      const std::string& slack_label,
                                      std::complex<double> slack_voltage = {1.0, 0.0});

struct FeederGenerationSpec {
  int buses = 9;
  double r_min = 0.004;
  double r_max = 0.012;
  double x_over_r = 1.5;
  /// New buses attach to one of the previous `branching` buses.
  int branching = 3;
};

RadialFeeder random_radial_feeder(const FeederGenerationSpec& spec, std::mt19937_64& rng);

/// Sensing graph over the non-slack buses (branches to the slack are dropped).
FeederGraph feeder_graph(const RadialFeeder& feeder, GraphOptions options = {});

/// First-order map from stacked consumption [P; Q] (per unit) to bus voltages:
/// v = m_matrix [P; Q] + v0 and |v| = k_matrix [P; Q] + magnitude_offset.
struct LinearPFModel {
  Eigen::MatrixXcd m_matrix;
  Eigen::MatrixXd k_matrix;
  Eigen::VectorXcd v0;
  Eigen::VectorXd magnitude_offset;

  int phases() const { return static_cast<int>(k_matrix.rows()); }
  void validate() const;
  Eigen::VectorXcd phasor(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const;
  Eigen::VectorXd magnitude(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const;
};

/// Linearisation around the flat no-load operating point. Throws NonRadialTopology.
LinearPFModel build_toy_pf_model(const RadialFeeder& feeder);

/// Nonlinear constant-power load flow by backward/forward sweep.
Eigen::VectorXcd solve_radial_load_flow(const RadialFeeder& feeder, const Eigen::VectorXd& p,
                                        const Eigen::VectorXd& q, double tolerance = 1e-12,
                                        int max_iterations = 200);

}  // namespace gridrecon
