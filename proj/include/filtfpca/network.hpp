#pragma once

#include <string>
#include <vector>

#include "filtfpca/grid.hpp"

namespace filtfpca {

/// Symmetric nonnegative similarity weights between groups; diagonal 0.
struct WeightMatrix {
  Eigen::MatrixXd values;

  WeightMatrix() = default;
  explicit WeightMatrix(Eigen::MatrixXd w);

  int group_count() const { return static_cast<int>(values.rows()); }
  double max_weight() const;
};

/// Disjoint communities over groups. Labels are contiguous from 0 and
/// assigned in order of each community's smallest member index.
struct CommunityPartition {
  std::vector<int> assignment;
  int cardinality = 0;

  bool same_community(int i, int j) const { return assignment[i] == assignment[j]; }
};

struct CommunityLayer {
  double threshold = 0.0;
  CommunityPartition partition;
};

/// Nested layer-wise partitions produced by the filtration.
struct CommunityTree {
  std::vector<CommunityLayer> layers;
};

/// W[i][j] = hs_distance_scaled(kernels[i], kernels[j]).
/// `labels` (optional, parallel to kernels) names groups in errors.
WeightMatrix build_weight_matrix(const std::vector<CovKernel>& kernels,
                                 const std::vector<std::string>& labels = {});

/// Connected components of the graph that keeps edges with weight <= tau.
CommunityPartition connected_communities(const WeightMatrix& w, double tau);

/// Descending candidate thresholds below tau_prev: tau_prev itself
/// (keeping the current communities), every distinct edge weight
/// strictly below it, and 0. Each successive candidate truncates at
/// least one more edge. An infinite tau_prev stands for the unfiltered
/// network; its leading candidate is the largest edge weight.
std::vector<double> candidate_thresholds(const WeightMatrix& w, double tau_prev);

/// True iff thresholds are non-ascending and every layer refines or
/// equals the previous layer's partition.
bool verify_nesting(const CommunityTree& tree);

}  // namespace filtfpca
