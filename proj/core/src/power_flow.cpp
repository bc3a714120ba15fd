#include "gridrecon/power_flow.hpp"

#include <algorithm>
#include <map>
#include <queue>

#include "gridrecon/error.hpp"
#include "gridrecon/rng.hpp"

namespace gridrecon {

void RadialFeeder::validate() const {
  const int m = buses();
  require(m > 0, ErrorCode::NonRadialTopology, "feeder has no buses");
  require(static_cast<int>(line_impedance.size()) == m, ErrorCode::DimensionMismatch,
          "one line impedance per bus required");
  for (int i = 0; i < m; ++i) {
    int cur = i;
    int hops = 0;
    while (cur != -1) {
      require(cur >= 0 && cur < m, ErrorCode::NonRadialTopology, "parent index out of range");
      require(hops++ <= m, ErrorCode::NonRadialTopology, "parent chain contains a loop");
      cur = parent[static_cast<std::size_t>(cur)];
    }
  }
}

std::vector<int> RadialFeeder::topological_order() const {
  std::vector<std::vector<int>> children(static_cast<std::size_t>(buses()));
  std::vector<int> order;
  std::queue<int> frontier;
  for (int i = 0; i < buses(); ++i) {
    const int p = parent[static_cast<std::size_t>(i)];
    if (p < 0) frontier.push(i);
    else children[static_cast<std::size_t>(p)].push_back(i);
  }
  while (!frontier.empty()) {
    const int b = frontier.front();
    frontier.pop();
    order.push_back(b);
    for (int c : children[static_cast<std::size_t>(b)]) frontier.push(c);
  }
  return order;
}

RadialFeeder radial_feeder_from_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                                      const std::vector<std::complex<double>>& impedances,
                                      const std::string& slack_label,
                                      std::complex<double> slack_voltage) {
  require(edges.size() == impedances.size(), ErrorCode::DimensionMismatch,
          "one impedance per branch required");
  std::map<std::string, std::vector<std::pair<std::string, std::size_t>>> adj;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[edges[e].first].push_back({edges[e].second, e});
    adj[edges[e].second].push_back({edges[e].first, e});
  }
  require(adj.count(slack_label) == 1, ErrorCode::NonRadialTopology, "slack bus has no branches");
  const std::size_t bus_count = adj.size() - 1;
  require(edges.size() == bus_count, ErrorCode::NonRadialTopology,
          "branch count must equal non-slack bus count in a radial feeder");

  std::vector<std::string> labels;
  for (const auto& [name, _] : adj)
    if (name != slack_label) labels.push_back(name);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = static_cast<int>(i);

  RadialFeeder f;
  f.labels = labels;
  f.slack_voltage = slack_voltage;
  f.parent.assign(labels.size(), -2);
  f.line_impedance.assign(labels.size(), {0.0, 0.0});
  std::queue<std::string> frontier;
  frontier.push(slack_label);
  std::map<std::string, bool> visited{{slack_label, true}};
  while (!frontier.empty()) {
    const std::string cur = frontier.front();
    frontier.pop();
    for (const auto& [next, e] : adj[cur]) {
      if (visited[next]) continue;
      visited[next] = true;
      const int i = index[next];
      f.parent[static_cast<std::size_t>(i)] = cur == slack_label ? -1 : index[cur];
      f.line_impedance[static_cast<std::size_t>(i)] = impedances[e];
      frontier.push(next);
    }
  }
  for (int p : f.parent) require(p != -2, ErrorCode::NonRadialTopology, "feeder has islands");
  f.validate();
  return f;
}

RadialFeeder random_radial_feeder(const FeederGenerationSpec& spec, std::mt19937_64& rng) {
  require(spec.buses > 0 && spec.branching > 0 && spec.r_min > 0.0 && spec.r_max >= spec.r_min,
          ErrorCode::InvalidSpec, "invalid feeder generation spec");
  RadialFeeder f;
  for (int i = 0; i < spec.buses; ++i) {
    int p = -1;
    if (i > 0) {
      const int lo = std::max(0, i - spec.branching);
      p = lo + static_cast<int>(uniform01(rng) * (i - lo));
      p = std::min(p, i - 1);
    }
    const double r = spec.r_min + (spec.r_max - spec.r_min) * uniform01(rng);
    f.parent.push_back(p);
    f.line_impedance.emplace_back(r, spec.x_over_r * r);
    f.labels.push_back("b" + std::to_string(i + 1));
  }
  return f;
}

FeederGraph feeder_graph(const RadialFeeder& feeder, GraphOptions options) {
  feeder.validate();
  const int m = feeder.buses();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const int p = feeder.parent[static_cast<std::size_t>(i)];
    if (p >= 0) a(i, p) = a(p, i) = 1.0;
  }
  std::vector<std::string> labels = feeder.labels;
  if (labels.empty())
    for (int i = 0; i < m; ++i) labels.push_back(std::to_string(i));
  return build_laplacian(a, labels, options);
}

void LinearPFModel::validate() const {
  const auto m = k_matrix.rows();
  require(m > 0 && k_matrix.cols() == 2 * m && m_matrix.rows() == m && m_matrix.cols() == 2 * m &&
              v0.size() == m && magnitude_offset.size() == m,
          ErrorCode::DimensionMismatch, "power-flow model must be m x 2m with m offsets");
}

Eigen::VectorXcd LinearPFModel::phasor(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const {
  Eigen::VectorXd pq(p.size() + q.size());
  pq << p, q;
  return m_matrix * pq.cast<std::complex<double>>() + v0;
}

Eigen::VectorXd LinearPFModel::magnitude(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const {
  Eigen::VectorXd pq(p.size() + q.size());
  pq << p, q;
  return k_matrix * pq + magnitude_offset;
}

LinearPFModel build_toy_pf_model(const RadialFeeder& feeder) {
  feeder.validate();
  const int m = feeder.buses();
  // Lines on the path from each bus to the slack, identified by their child bus.
  std::vector<std::vector<bool>> on_path(static_cast<std::size_t>(m), std::vector<bool>(static_cast<std::size_t>(m), false));
  for (int i = 0; i < m; ++i)
    for (int cur = i; cur != -1; cur = feeder.parent[static_cast<std::size_t>(cur)])
      on_path[static_cast<std::size_t>(i)][static_cast<std::size_t>(cur)] = true;

  using cd = std::complex<double>;
  const cd v0 = feeder.slack_voltage;
  const cd inv_conj = 1.0 / std::conj(v0);
  LinearPFModel model;
  model.m_matrix = Eigen::MatrixXcd::Zero(m, 2 * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      cd common{0.0, 0.0};
      for (int l = 0; l < m; ++l)
        if (on_path[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] &&
            on_path[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)])
          common += feeder.line_impedance[static_cast<std::size_t>(l)];
      // v_i = v0 - sum_j Z_ij conj(S_j) / conj(v0), S_j = P_j + i Q_j.
      model.m_matrix(i, j) = -common * inv_conj;
      model.m_matrix(i, m + j) = cd{0.0, 1.0} * common * inv_conj;
    }
  }
  model.v0 = Eigen::VectorXcd::Constant(m, v0);
  const double mag = std::abs(v0);
  model.magnitude_offset = Eigen::VectorXd::Constant(m, mag);
  model.k_matrix = (std::conj(v0) * model.m_matrix).real() / mag;
  return model;
}

Eigen::VectorXcd solve_radial_load_flow(const RadialFeeder& feeder, const Eigen::VectorXd& p,
                                        const Eigen::VectorXd& q, double tolerance, int max_iterations) {
  feeder.validate();
  const int m = feeder.buses();
  require(p.size() == m && q.size() == m, ErrorCode::DimensionMismatch, "one load per bus required");
  const std::vector<int> order = feeder.topological_order();
  Eigen::VectorXcd v = Eigen::VectorXcd::Constant(m, feeder.slack_voltage);
  Eigen::VectorXcd branch(m);
  for (int it = 0; it < max_iterations; ++it) {
    for (int i = 0; i < m; ++i) branch(i) = std::conj(std::complex<double>(p(i), q(i)) / v(i));
    for (auto it_b = order.rbegin(); it_b != order.rend(); ++it_b) {
      const int parent = feeder.parent[static_cast<std::size_t>(*it_b)];
      if (parent >= 0) branch(parent) += branch(*it_b);
    }
    double change = 0.0;
    for (int b : order) {
      const int parent = feeder.parent[static_cast<std::size_t>(b)];
      const std::complex<double> upstream = parent < 0 ? feeder.slack_voltage : v(parent);
      const std::complex<double> next = upstream - feeder.line_impedance[static_cast<std::size_t>(b)] * branch(b);
      change = std::max(change, std::abs(next - v(b)));
      v(b) = next;
    }
    if (change < tolerance) return v;
  }
  fail(ErrorCode::NotConverged, "backward/forward sweep did not converge");
}

}  // namespace gridrecon
