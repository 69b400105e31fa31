#include "filtfpca/grid.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace filtfpca {

Grid::Grid(int point_count) : size(point_count) {
  if (point_count < 2) {
    throw ConfigError("grid needs at least 2 sample points, got " +
                      std::to_string(point_count));
  }
}

GridFunction::GridFunction(Grid g, Eigen::VectorXd v) : grid(g), values(std::move(v)) {
  if (static_cast<int>(values.size()) != grid.size) {
    throw DimensionError("function has " + std::to_string(values.size()) +
                         " samples, grid has " + std::to_string(grid.size));
  }
  if (!values.allFinite()) {
    throw ConfigError("function contains non-finite samples");
  }
}

FunctionGroup::FunctionGroup(std::string group_id, Grid g, Eigen::MatrixXd rows)
    : id(std::move(group_id)), grid(g), trajectories(std::move(rows)) {
  if (trajectories.rows() < 1) {
    throw ConfigError("group '" + id + "' has no trajectories");
  }
  if (static_cast<int>(trajectories.cols()) != grid.size) {
    throw DimensionError("group '" + id + "' trajectories have " +
                         std::to_string(trajectories.cols()) + " samples, grid has " +
                         std::to_string(grid.size));
  }
  if (!trajectories.allFinite()) {
    throw ConfigError("group '" + id + "' contains non-finite samples");
  }
}

GridFunction FunctionGroup::trajectory(int n) const {
  if (n < 0 || n >= size()) {
    throw LookupError("trajectory index " + std::to_string(n) + " out of range for group '" +
                      id + "' of size " + std::to_string(size()));
  }
  return GridFunction(grid, trajectories.row(n).transpose());
}

CovKernel::CovKernel(Grid g, Eigen::MatrixXd k) : grid(g), matrix(std::move(k)) {
  if (matrix.rows() != grid.size || matrix.cols() != grid.size) {
    throw DimensionError("kernel is " + std::to_string(matrix.rows()) + "x" +
                         std::to_string(matrix.cols()) + ", grid has " +
                         std::to_string(grid.size) + " points");
  }
  if (!matrix.allFinite()) {
    throw ConfigError("kernel contains non-finite entries");
  }
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw ConfigError("kernel is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  }
  matrix = ((matrix + matrix.transpose()) * 0.5).eval();
}

double inner_product(const GridFunction& f, const GridFunction& g) {
  if (f.grid != g.grid) {
    throw GridMismatch("inner product of functions on grids of size " +
                       std::to_string(f.grid.size) + " and " + std::to_string(g.grid.size));
  }
  return f.values.dot(g.values) * f.grid.dt();
}

double l2_norm(const GridFunction& f) {
  return std::sqrt(f.values.squaredNorm() * f.grid.dt());
}

GridFunction mean_function(const FunctionGroup& g) {
  return GridFunction(g.grid, g.trajectories.colwise().mean().transpose());
}

CovKernel covariance_kernel(const FunctionGroup& g, bool subtract_mean) {
  const double inv_n = 1.0 / static_cast<double>(g.size());
  Eigen::MatrixXd centered = g.trajectories;
  if (subtract_mean) {
    centered.rowwise() -= g.trajectories.colwise().mean();
  }
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(g.grid.size, g.grid.size);
  k.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), inv_n);
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return CovKernel(g.grid, std::move(k));
}

double trace_variance(const CovKernel& k) {
  return k.matrix.trace() * k.grid.dt();
}

double hs_distance_scaled(const CovKernel& a, const CovKernel& b) {
  if (a.grid != b.grid) {
    throw GridMismatch("kernels on grids of size " + std::to_string(a.grid.size) + " and " +
                       std::to_string(b.grid.size));
  }
  constexpr double kEps = 1e-12;
  if (trace_variance(a) <= kEps || trace_variance(b) <= kEps) {
    throw DegenerateGroup("near-zero trace variance in scaled covariance distance", "");
  }
  return (a.matrix / a.matrix.trace() - b.matrix / b.matrix.trace()).norm();
}

namespace detail {

void fix_sign(Eigen::VectorXd& v) {
  int arg = 0;
  double best = std::abs(v[0]);
  for (int i = 1; i < v.size(); ++i) {
    const double m = std::abs(v[i]);
    if (m > best) {
      best = m;
      arg = i;
    }
  }
  if (v[arg] < 0.0) v = -v;
}

std::vector<EigenPair> kernel_eigenpairs(const Grid& grid, const Eigen::MatrixXd& kernel,
                                         int count) {
  if (count > grid.size) {
    throw DimensionError("requested " + std::to_string(count) + " eigenpairs from a " +
                         std::to_string(grid.size) + "-point kernel");
  }
  std::vector<EigenPair> out;
  if (count <= 0) return out;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kernel);
  if (solver.info() != Eigen::Success) {
    throw Error("symmetric eigendecomposition failed to converge");
  }
  const double dt = grid.dt();
  const double inv_sqrt_dt = 1.0 / std::sqrt(dt);
  out.reserve(count);
  // Eigen returns ascending order; take from the back.
  for (int j = 0; j < count; ++j) {
    const int idx = grid.size - 1 - j;
    double theta = solver.eigenvalues()[idx] * dt;
    if (theta < 0.0) theta = 0.0;  // PSD round-off clamp
    Eigen::VectorXd u = solver.eigenvectors().col(idx) * inv_sqrt_dt;
    fix_sign(u);
    out.push_back(EigenPair{theta, GridFunction(grid, std::move(u))});
  }
  return out;
}

}  // namespace detail

std::vector<EigenPair> eigen_decompose(const CovKernel& k, int count) {
  return detail::kernel_eigenpairs(k.grid, k.matrix, count);
}

std::vector<GridFunction> gram_schmidt(const std::vector<GridFunction>& fs) {
  constexpr double kResidualTol = 1e-10;
  std::vector<GridFunction> basis;
  basis.reserve(fs.size());
  for (std::size_t k = 0; k < fs.size(); ++k) {
    GridFunction v = fs[k];
    if (!basis.empty() && v.grid != basis.front().grid) {
      throw GridMismatch("gram_schmidt inputs on mixed grids");
    }
    // One re-orthogonalization pass keeps orthogonality near machine
    // precision for mildly ill-conditioned inputs.
    for (int pass = 0; pass < 2; ++pass) {
      for (const GridFunction& e : basis) {
        v.values -= inner_product(v, e) * e.values;
      }
    }
    const double norm = l2_norm(v);
    if (norm < kResidualTol) {
      throw RankDeficient("input function " + std::to_string(k) +
                          " is linearly dependent on its predecessors",
                          static_cast<int>(k));
    }
    v.values /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace filtfpca
