#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gridrecon/graph.hpp"
#include "gridrecon/measurements.hpp"

namespace gridrecon::testing {

Eigen::MatrixXd path_adjacency(int m);
Eigen::MatrixXd star_adjacency(int m);

/// Random labelled tree: node i > 0 attaches to a uniform earlier node.
Eigen::MatrixXd random_tree(int m, std::mt19937_64& rng);

/// Random tree plus `extra` chords.
Eigen::MatrixXd random_mesh(int m, int extra, std::mt19937_64& rng);

/// Toggles one off-diagonal pair that keeps the graph connected.
Eigen::MatrixXd perturb_edges(const Eigen::MatrixXd& adjacency, int flips, std::mt19937_64& rng);

/// Fully observed dataset with N(0, 1) values on jittered unit-spaced times.
BatchDataset random_dataset(int tasks, int nodes, int steps, std::mt19937_64& rng);

/// Drops each slot independently with probability `missing`.
void drop_entries(BatchDataset& data, double missing, std::mt19937_64& rng);

std::vector<double> grid(double lo, double hi, int count);

}  // namespace gridrecon::testing
