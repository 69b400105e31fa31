#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "filtfpca/grid.hpp"

namespace filtfpca {

/// Synthetic multi-group study configuration: 16 groups of 500
/// trajectories built from 5 of 22 random orthonormal basis functions
/// each, with heteroscedastic normal scores.
struct SimConfig {
  int grid_size = 100;
  int n_per_group = 500;
  int fourier_count = 23;
  int basis_count = 22;
  std::uint64_t seed = 1;
  /// Per group, the 1-based indices of its 5 basis functions.
  std::vector<std::array<int, 5>> assignment = default_assignment();

  static std::vector<std::array<int, 5>> default_assignment();
  int group_count() const { return static_cast<int>(assignment.size()); }
  void validate() const;
};

struct SimDataset {
  std::vector<FunctionGroup> groups;
  std::vector<GridFunction> bases;
  std::vector<Eigen::MatrixXd> true_scores;  // per group, N x 5
};

/// First m Fourier functions on the grid: F_1 = 1,
/// F_2k = sqrt(2) sin(2 pi k t), F_2k+1 = sqrt(2) cos(2 pi k t).
/// m must be odd.
std::vector<GridFunction> fourier_basis(int m, const Grid& grid);

/// `count` orthonormal functions from seeded standard-normal linear
/// combinations of the Fourier dictionary (stream 0 of the seed,
/// row-major coefficients), orthonormalized by Gram-Schmidt.
std::vector<GridFunction> random_orthonormal_basis(int count, int fourier_count,
                                                   std::uint64_t seed, const Grid& grid);

/// Score standard deviation of dimension `dim` (1-based) in group
/// `group` (0-based): variance 1.2^-dim for the first twelve groups and
/// 1.2^(dim-6) for the rest.
double score_stddev(int group, int dim);

/// Draws the full dataset. Scores for group v come from stream v+1 of
/// the seed, trajectory-major with the dimension innermost, so per-group
/// generation can be parallelized without changing the output.
SimDataset generate_dataset(const SimConfig& config);

}  // namespace filtfpca
