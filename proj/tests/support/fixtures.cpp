#include "fixtures.hpp"

#include "gridrecon/rng.hpp"

namespace gridrecon::testing {

Eigen::MatrixXd path_adjacency(int m) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  return a;
}

Eigen::MatrixXd star_adjacency(int m) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) a(0, i) = a(i, 0) = 1.0;
  return a;
}

Eigen::MatrixXd random_tree(int m, std::mt19937_64& rng) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) {
    int parent = static_cast<int>(rng() % static_cast<std::uint64_t>(i));
    a(i, parent) = a(parent, i) = 1.0;
  }
  return a;
}

Eigen::MatrixXd random_mesh(int m, int extra, std::mt19937_64& rng) {
  Eigen::MatrixXd a = random_tree(m, rng);
  for (int added = 0, tries = 0; added < extra && tries < 100 * (extra + 1); ++tries) {
    int i = static_cast<int>(rng() % m), j = static_cast<int>(rng() % m);
    if (i == j || a(i, j) != 0.0) continue;
    a(i, j) = a(j, i) = 1.0;
    ++added;
  }
  return a;
}

Eigen::MatrixXd perturb_edges(const Eigen::MatrixXd& adjacency, int flips, std::mt19937_64& rng) {
  const int m = static_cast<int>(adjacency.rows());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Eigen::MatrixXd a = adjacency;
    for (int f = 0; f < flips;) {
      int i = static_cast<int>(rng() % m), j = static_cast<int>(rng() % m);
      if (i == j) continue;
      a(i, j) = a(j, i) = 1.0 - a(i, j);
      ++f;
    }
    if (a == adjacency) continue;
    Eigen::MatrixXd lap = -a;
    lap.diagonal() += a.rowwise().sum();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap, Eigen::EigenvaluesOnly);
    if (m == 1 || eig.eigenvalues()(1) > 1e-8) return a;
  }
  return adjacency;
}

BatchDataset random_dataset(int tasks, int nodes, int steps, std::mt19937_64& rng) {
  std::vector<double> times;
  for (int t = 0; t < steps; ++t) times.push_back(t + 0.3 * uniform01(rng));
  BatchDataset data = empty_dataset(tasks, nodes, times);
  for (auto& batch : data.observations) {
    for (int i = 0; i < data.slots(); ++i) {
      batch.values(i) = standard_normal(rng);
      batch.mask[i] = true;
    }
  }
  return data;
}

void drop_entries(BatchDataset& data, double missing, std::mt19937_64& rng) {
  for (auto& batch : data.observations) {
    for (int i = 0; i < data.slots(); ++i) {
      if (uniform01(rng) < missing) {
        batch.mask[i] = false;
        batch.values(i) = 0.0;
      }
    }
  }
}

std::vector<double> grid(double lo, double hi, int count) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(count == 1 ? lo : lo + (hi - lo) * k / (count - 1));
  return out;
}

}  // namespace gridrecon::testing
