#include "filtfpca/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace filtfpca {

namespace {

// Plain union-find; G stays small so no rank heuristics needed.
class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

}  // namespace

WeightMatrix::WeightMatrix(Eigen::MatrixXd w) : values(std::move(w)) {
  if (values.rows() != values.cols()) {
    throw DimensionError("weight matrix must be square");
  }
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  if ((values - values.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigError("weight matrix is not symmetric");
  }
  if (values.minCoeff() < 0.0) {
    throw ConfigError("weight matrix has negative entries");
  }
  values.diagonal().setZero();
}

double WeightMatrix::max_weight() const {
  return group_count() < 2 ? 0.0 : values.maxCoeff();
}

WeightMatrix build_weight_matrix(const std::vector<CovKernel>& kernels,
                                 const std::vector<std::string>& labels) {
  const int g = static_cast<int>(kernels.size());
  if (g < 2) {
    throw ConfigError("a similarity network needs at least 2 groups");
  }
  auto label = [&](int i) {
    return i < static_cast<int>(labels.size()) ? labels[i] : std::to_string(i);
  };
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(g, g);
  for (int i = 0; i < g; ++i) {
    if (kernels[i].grid != kernels.front().grid) {
      throw GridMismatch("group '" + label(i) + "' is on a different grid");
    }
    if (trace_variance(kernels[i]) <= 1e-12) {
      throw DegenerateGroup("group '" + label(i) + "' has near-zero total variance", label(i));
    }
  }
  for (int i = 0; i < g; ++i) {
    for (int j = i + 1; j < g; ++j) {
      w(i, j) = w(j, i) = hs_distance_scaled(kernels[i], kernels[j]);
    }
  }
  return WeightMatrix(std::move(w));
}

CommunityPartition connected_communities(const WeightMatrix& w, double tau) {
  if (tau < 0.0) {
    throw ConfigError("threshold must be nonnegative");
  }
  const int g = w.group_count();
  UnionFind uf(g);
  for (int i = 0; i < g; ++i) {
    for (int j = i + 1; j < g; ++j) {
      if (w.values(i, j) <= tau) uf.unite(i, j);
    }
  }
  CommunityPartition part;
  part.assignment.assign(g, -1);
  std::vector<int> root_label(g, -1);
  for (int i = 0; i < g; ++i) {
    const int r = uf.find(i);
    if (root_label[r] < 0) root_label[r] = part.cardinality++;
    part.assignment[i] = root_label[r];
  }
  return part;
}

std::vector<double> candidate_thresholds(const WeightMatrix& w, double tau_prev) {
  if (tau_prev < 0.0) {
    throw ConfigError("previous threshold must be nonnegative");
  }
  std::vector<double> out;
  if (std::isinf(tau_prev)) {
    out.push_back(w.max_weight());
  } else {
    out.push_back(tau_prev);
  }
  const int g = w.group_count();
  for (int i = 0; i < g; ++i) {
    for (int j = i + 1; j < g; ++j) {
      if (w.values(i, j) < out.front()) out.push_back(w.values(i, j));
    }
  }
  out.push_back(0.0);
  std::sort(out.begin(), out.end(), std::greater<double>());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool verify_nesting(const CommunityTree& tree) {
  if (tree.layers.empty()) {
    throw ConfigError("empty community tree");
  }
  const int g = static_cast<int>(tree.layers.front().partition.assignment.size());
  for (std::size_t d = 1; d < tree.layers.size(); ++d) {
    if (tree.layers[d].threshold > tree.layers[d - 1].threshold) return false;
    const CommunityPartition& fine = tree.layers[d].partition;
    const CommunityPartition& coarse = tree.layers[d - 1].partition;
    for (int i = 0; i < g; ++i) {
      for (int j = i + 1; j < g; ++j) {
        if (fine.same_community(i, j) && !coarse.same_community(i, j)) return false;
      }
    }
  }
  return true;
}

}  // namespace filtfpca
