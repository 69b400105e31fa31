#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "filtfpca/errors.hpp"

namespace filtfpca {

/// Uniform sampling grid of T points on [0,1], spacing dt = 1/T.
/// Quadrature throughout the library is the left Riemann sum
/// sum_i f(t_i) * dt with t_i = i/T.
struct Grid {
  int size = 0;

  Grid() = default;
  explicit Grid(int point_count);

  double dt() const { return 1.0 / static_cast<double>(size); }
  double point(int i) const { return static_cast<double>(i) * dt(); }

  friend bool operator==(const Grid& a, const Grid& b) { return a.size == b.size; }
  friend bool operator!=(const Grid& a, const Grid& b) { return !(a == b); }
};

/// A real-valued function sampled on a Grid.
struct GridFunction {
  Grid grid;
  Eigen::VectorXd values;

  GridFunction() = default;
  GridFunction(Grid g, Eigen::VectorXd v);
};

/// One group's trajectories (rows) on a shared grid.
struct FunctionGroup {
  std::string id;
  Grid grid;
  Eigen::MatrixXd trajectories;  // N_v x T

  FunctionGroup() = default;
  FunctionGroup(std::string group_id, Grid g, Eigen::MatrixXd rows);

  int size() const { return static_cast<int>(trajectories.rows()); }
  GridFunction trajectory(int n) const;
};

/// Discretized covariance kernel K(s,t) of a group or residual layer.
/// Symmetric T x T; construction symmetrizes round-off and rejects
/// asymmetry beyond 1e-12 (relative to the largest entry).
struct CovKernel {
  Grid grid;
  Eigen::MatrixXd matrix;

  CovKernel() = default;
  CovKernel(Grid g, Eigen::MatrixXd k);
};

/// Operator eigenvalue (variance units) paired with its L2-normalized
/// eigenfunction.
struct EigenPair {
  double value = 0.0;
  GridFunction function;
};

/// <f,g> = sum_i f_i g_i dt. Throws GridMismatch on different grids.
double inner_product(const GridFunction& f, const GridFunction& g);

/// sqrt(<f,f>).
double l2_norm(const GridFunction& f);

/// Pointwise average of the group's trajectories.
GridFunction mean_function(const FunctionGroup& g);

/// Empirical covariance kernel K(s,t) = N^-1 sum_n (X_n(s)-m(s))(X_n(t)-m(t)).
/// With subtract_mean off, m is taken as zero (zero-mean signal convention).
CovKernel covariance_kernel(const FunctionGroup& g, bool subtract_mean);

/// The `count` largest eigenpairs of the discretized covariance operator.
///
/// The integral operator acts on samples as (K * dt), so operator
/// eigenvalues are theta_j = lambda_j(K) * dt. Eigenfunctions are scaled
/// to unit L2 norm (sum u_i^2 dt = 1) and sign-fixed so the
/// largest-magnitude coordinate is positive (ties resolved to the
/// smallest index). Small negative eigenvalues (>= -1e-10) are clamped
/// to zero.
std::vector<EigenPair> eigen_decompose(const CovKernel& k, int count);

/// dt * trace(K) = sum of operator eigenvalues = total L2 variance.
double trace_variance(const CovKernel& k);

/// Hilbert-Schmidt distance of the trace-scaled operators,
/// || K_a/tr(K_a) - K_b/tr(K_b) ||_F  (the dt factors cancel).
/// Throws DegenerateGroup when either trace variance is below 1e-12.
double hs_distance_scaled(const CovKernel& a, const CovKernel& b);

/// Classical Gram-Schmidt with one re-orthogonalization pass.
/// Throws RankDeficient (naming the offending index) when a residual
/// norm falls below 1e-10.
std::vector<GridFunction> gram_schmidt(const std::vector<GridFunction>& fs);

namespace detail {

/// Sign convention shared by all eigen routines: flip so the entry of
/// largest magnitude is positive, ties going to the smallest index.
void fix_sign(Eigen::VectorXd& v);

/// Eigen-decomposition of a symmetric kernel-style matrix under the
/// library's operator scaling; used by eigen_decompose and the engine.
std::vector<EigenPair> kernel_eigenpairs(const Grid& grid, const Eigen::MatrixXd& kernel,
                                         int count);

}  // namespace detail

}  // namespace filtfpca
