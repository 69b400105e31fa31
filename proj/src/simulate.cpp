#include "filtfpca/simulate.hpp"

#include <cmath>
#include <cstdio>

#include "filtfpca/rng.hpp"

namespace filtfpca {

std::vector<std::array<int, 5>> SimConfig::default_assignment() {
  const std::vector<std::array<int, 5>> half = {
      {1, 2, 3, 4, 5},      {1, 2, 3, 4, 6},      {1, 2, 7, 8, 9},      {1, 2, 7, 8, 10},
      {1, 11, 12, 13, 14},  {1, 11, 12, 15, 16},  {1, 11, 17, 18, 19},  {1, 11, 20, 21, 22},
  };
  std::vector<std::array<int, 5>> table = half;
  table.insert(table.end(), half.begin(), half.end());
  return table;
}

void SimConfig::validate() const {
  if (grid_size < 2) throw ConfigError("grid_size must be at least 2");
  if (grid_size < fourier_count) {
    // Fewer samples than dictionary functions aliases the harmonics.
    throw ConfigError("grid_size must be at least fourier_count (" +
                      std::to_string(fourier_count) + ")");
  }
  if (n_per_group < 1) throw ConfigError("n_per_group must be positive");
  if (basis_count < 1 || basis_count > fourier_count) {
    throw ConfigError("basis_count must lie in [1, fourier_count]");
  }
  if (assignment.empty()) throw ConfigError("empty basis assignment");
  for (const auto& row : assignment) {
    for (int idx : row) {
      if (idx < 1 || idx > basis_count) {
        throw ConfigError("basis index " + std::to_string(idx) + " outside [1, " +
                          std::to_string(basis_count) + "]");
      }
    }
  }
}

std::vector<GridFunction> fourier_basis(int m, const Grid& grid) {
  if (m < 1 || m % 2 == 0) {
    throw ConfigError("the Fourier dictionary size must be odd, got " + std::to_string(m));
  }
  const double two_pi = 2.0 * M_PI;
  const double root2 = std::sqrt(2.0);
  std::vector<GridFunction> out;
  out.reserve(m);
  out.emplace_back(grid, Eigen::VectorXd::Ones(grid.size));
  for (int k = 1; 2 * k + 1 <= m; ++k) {
    Eigen::VectorXd s(grid.size);
    Eigen::VectorXd c(grid.size);
    for (int i = 0; i < grid.size; ++i) {
      const double arg = two_pi * k * grid.point(i);
      s[i] = root2 * std::sin(arg);
      c[i] = root2 * std::cos(arg);
    }
    out.emplace_back(grid, std::move(s));
    out.emplace_back(grid, std::move(c));
  }
  return out;
}

std::vector<GridFunction> random_orthonormal_basis(int count, int fourier_count,
                                                   std::uint64_t seed, const Grid& grid) {
  if (count < 1 || count > fourier_count) {
    throw ConfigError("count must lie in [1, fourier_count]");
  }
  const std::vector<GridFunction> dict = fourier_basis(fourier_count, grid);
  // Stream 0 draws the raw coefficients; a rank failure (probability ~0)
  // retries on streams 2^32+1, 2^32+2, ... well clear of the per-group
  // score streams.
  for (std::uint64_t attempt = 0;; ++attempt) {
    SplitMixStream stream(seed, attempt == 0 ? 0 : (1ULL << 32) + attempt);
    std::vector<GridFunction> raw;
    raw.reserve(count);
    for (int i = 0; i < count; ++i) {
      Eigen::VectorXd f = Eigen::VectorXd::Zero(grid.size);
      for (int j = 0; j < fourier_count; ++j) {
        f += stream.next_normal() * dict[j].values;
      }
      raw.emplace_back(grid, std::move(f));
    }
    try {
      return gram_schmidt(raw);
    } catch (const RankDeficient&) {
      if (attempt >= 8) throw;
    }
  }
}

double score_stddev(int group, int dim) {
  const double log_ratio = std::log(1.2);
  const double exponent = group < 12 ? -dim : dim - 6;
  return std::exp(0.5 * exponent * log_ratio);
}

SimDataset generate_dataset(const SimConfig& config) {
  config.validate();
  const Grid grid(config.grid_size);
  SimDataset out;
  out.bases = random_orthonormal_basis(config.basis_count, config.fourier_count, config.seed,
                                       grid);
  out.groups.reserve(config.group_count());
  out.true_scores.reserve(config.group_count());
  for (int v = 0; v < config.group_count(); ++v) {
    SplitMixStream stream(config.seed, static_cast<std::uint64_t>(v) + 1);
    Eigen::MatrixXd scores(config.n_per_group, 5);
    for (int n = 0; n < config.n_per_group; ++n) {
      for (int d = 1; d <= 5; ++d) {
        scores(n, d - 1) = score_stddev(v, d) * stream.next_normal();
      }
    }
    Eigen::MatrixXd basis_rows(5, grid.size);
    for (int d = 0; d < 5; ++d) {
      basis_rows.row(d) = out.bases[config.assignment[v][d] - 1].values.transpose();
    }
    Eigen::MatrixXd trajectories = scores * basis_rows;
    char id[16];
    std::snprintf(id, sizeof(id), "g%02d", v + 1);
    out.groups.emplace_back(id, grid, std::move(trajectories));
    out.true_scores.push_back(std::move(scores));
  }
  return out;
}

}  // namespace filtfpca
