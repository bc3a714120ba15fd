#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gridrecon {

struct GraphOptions {
  /// Skip the single-zero-eigenvalue connectivity check.
  bool allow_disconnected = false;
  /// Accept nonnegative real edge weights instead of {0, 1}.
  bool allow_weighted = false;
};

/// Undirected sensing graph over M flattened (phase-)nodes together with its
/// combinatorial Laplacian L = D - A. Immutable once built.
class FeederGraph {
 public:
  int node_count() const { return static_cast<int>(adjacency_.rows()); }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }
  const Eigen::MatrixXd& laplacian() const { return laplacian_; }
  /// Ascending eigenvalues of L.
  const Eigen::VectorXd& laplacian_spectrum() const { return spectrum_; }
  const std::vector<std::string>& labels() const { return labels_; }
  /// Index of a label, or -1.
  int index_of(const std::string& label) const;
  bool connected() const;
  std::vector<std::pair<int, int>> edges() const;

 private:
  friend FeederGraph build_laplacian(const Eigen::MatrixXd&, std::vector<std::string>, GraphOptions);
  Eigen::MatrixXd adjacency_;
  Eigen::MatrixXd laplacian_;
  Eigen::VectorXd spectrum_;
  std::vector<std::string> labels_;
};

/// Validates the adjacency and builds L. Labels default to "0".."M-1".
/// Throws NonSymmetric, SelfLoop, NonBinary, Disconnected, DimensionMismatch.
FeederGraph build_laplacian(const Eigen::MatrixXd& adjacency,
                            std::vector<std::string> labels = {},
                            GraphOptions options = {});

/// Builds a graph from labelled edges. Node indices follow sorted label order.
FeederGraph graph_from_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                             GraphOptions options = {});

/// The smoothing operator S = (I + alpha L)^-1 for one graph.
struct GraphFilter {
  double alpha = 0.0;
  Eigen::MatrixXd matrix_s;
  std::uint64_t source_laplacian_digest = 0;

  int node_count() const { return static_cast<int>(matrix_s.rows()); }
};

GraphFilter make_filter(const FeederGraph& graph, double alpha);

/// S y: the minimiser of |y - z|^2 + alpha z' L z.
Eigen::VectorXd smooth_signal(const GraphFilter& filter, const Eigen::VectorXd& y);

struct StabilityReport {
  double filter_gap = 0.0;     // |S_a - S_b|_2
  double laplacian_gap = 0.0;  // |L_a - L_b|_2
  bool bound_satisfied = false;
};

/// Checks the linear stability bound |S_a - S_b|_2 <= alpha |L_a - L_b|_2.
StabilityReport stability_gap(const FeederGraph& graph_a, const FeederGraph& graph_b, double alpha);

/// Spectral norm of a symmetric matrix.
double symmetric_spectral_norm(const Eigen::MatrixXd& m);

/// FNV-1a over the raw matrix bytes.
std::uint64_t matrix_digest(const Eigen::MatrixXd& m);

}  // namespace gridrecon
