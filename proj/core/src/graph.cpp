#include "gridrecon/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <set>

#include "gridrecon/error.hpp"

namespace gridrecon {

namespace {

constexpr double kConnectivityThreshold = 1e-8;

}  // namespace

int FeederGraph::index_of(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
}

bool FeederGraph::connected() const {
  if (node_count() <= 1) return true;
  return spectrum_(1) > kConnectivityThreshold;
}

std::vector<std::pair<int, int>> FeederGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < node_count(); ++i)
    for (int j = i + 1; j < node_count(); ++j)
      if (adjacency_(i, j) != 0.0) out.emplace_back(i, j);
  return out;
}

FeederGraph build_laplacian(const Eigen::MatrixXd& adjacency, std::vector<std::string> labels,
                            GraphOptions options) {
  const auto m = adjacency.rows();
  require(m > 0 && adjacency.cols() == m, ErrorCode::DimensionMismatch,
          "adjacency must be a non-empty square matrix");
  if (labels.empty()) {
    labels.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) labels.push_back(std::to_string(i));
  }
  require(static_cast<Eigen::Index>(labels.size()) == m, ErrorCode::DimensionMismatch,
          "label count does not match adjacency size");

  for (Eigen::Index i = 0; i < m; ++i) {
    require(adjacency(i, i) == 0.0, ErrorCode::SelfLoop, "self loop at node " + labels[i]);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double a = adjacency(i, j);
      require(a == adjacency(j, i), ErrorCode::NonSymmetric, "adjacency is not symmetric");
      if (options.allow_weighted) {
        require(std::isfinite(a) && a >= 0.0, ErrorCode::NonBinary, "edge weights must be >= 0");
      } else {
        require(a == 0.0 || a == 1.0, ErrorCode::NonBinary, "adjacency entries must be 0 or 1");
      }
    }
  }

  FeederGraph g;
  g.adjacency_ = adjacency;
  g.laplacian_ = Eigen::MatrixXd(adjacency.rowwise().sum().asDiagonal()) - adjacency;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.laplacian_, Eigen::EigenvaluesOnly);
  g.spectrum_ = eig.eigenvalues();
  g.labels_ = std::move(labels);
  if (!options.allow_disconnected) {
    require(g.connected(), ErrorCode::Disconnected, "graph has more than one component");
  }
  return g;
}

FeederGraph graph_from_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                             GraphOptions options) {
  std::set<std::string> names;
  for (const auto& [a, b] : edges) {
    names.insert(a);
    names.insert(b);
  }
  std::vector<std::string> labels(names.begin(), names.end());
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = static_cast<int>(i);
  const auto m = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (const auto& [from, to] : edges) {
    const int i = index[from], j = index[to];
    require(i != j, ErrorCode::SelfLoop, "self loop at node " + from);
    a(i, j) = a(j, i) = 1.0;
  }
  return build_laplacian(a, std::move(labels), options);
}

GraphFilter make_filter(const FeederGraph& graph, double alpha) {
  require(std::isfinite(alpha) && alpha >= 0.0, ErrorCode::InvalidSpec, "alpha must be >= 0");
  const auto m = graph.node_count();
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m) + alpha * graph.laplacian();
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  require(llt.info() == Eigen::Success, ErrorCode::SingularSystem,
          "I + alpha L is not positive definite");

  GraphFilter f;
  f.alpha = alpha;
  f.matrix_s = llt.solve(Eigen::MatrixXd::Identity(m, m));
  f.matrix_s = 0.5 * (f.matrix_s + f.matrix_s.transpose()).eval();
  f.source_laplacian_digest = matrix_digest(graph.laplacian());

  const double row_sum_error = (f.matrix_s.rowwise().sum().array() - 1.0).abs().maxCoeff();
  require(row_sum_error <= 1e-10, ErrorCode::SingularSystem,
          "filter rows do not sum to one; corrupted Laplacian");
  return f;
}

Eigen::VectorXd smooth_signal(const GraphFilter& filter, const Eigen::VectorXd& y) {
  require(y.size() == filter.matrix_s.rows(), ErrorCode::DimensionMismatch,
          "signal length differs from filter size");
  return filter.matrix_s * y;
}

double symmetric_spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

StabilityReport stability_gap(const FeederGraph& graph_a, const FeederGraph& graph_b, double alpha) {
  require(graph_a.node_count() == graph_b.node_count(), ErrorCode::DimensionMismatch,
          "graphs differ in node count");
  const GraphFilter fa = make_filter(graph_a, alpha);
  const GraphFilter fb = make_filter(graph_b, alpha);
  StabilityReport r;
  r.filter_gap = symmetric_spectral_norm(fa.matrix_s - fb.matrix_s);
  r.laplacian_gap = symmetric_spectral_norm(graph_a.laplacian() - graph_b.laplacian());
  r.bound_satisfied = r.filter_gap <= alpha * r.laplacian_gap + 1e-9;
  return r;
}

std::uint64_t matrix_digest(const Eigen::MatrixXd& m) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::int64_t rows = m.rows(), cols = m.cols();
  mix(&rows, sizeof rows);
  mix(&cols, sizeof cols);
  mix(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return h;
}

}  // namespace gridrecon
