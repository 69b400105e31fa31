#pragma once

#include <optional>
#include <string>
#include <vector>

#include "filtfpca/grid.hpp"
#include "filtfpca/network.hpp"

namespace filtfpca {

enum class PenaltyForm { power, geometric, logistic };

/// Non-increasing per-layer penalty kappa(d).
///   power:     a * d^(-b)
///   geometric: a * b^(-d)          (b >= 1)
///   logistic:  a / (1 + b^(d-u))   (b >= 1)
/// a = 0 gives the unpenalized limit (group-wise ordinary fPCA).
struct PenaltySchedule {
  PenaltyForm form = PenaltyForm::power;
  double a = 0.1;
  double b = 1.2;
  double u = 0.0;

  double operator()(int layer) const;
  void validate() const;
};

/// Which group weights enter the layer-wise GIC fit term. The
/// extraction objective always uses the residual-scaled weights;
/// `initial` keeps the layer-0 weights in the criterion instead.
enum class GicWeighting { residual, initial };

/// Everything the filtration carries between layers: the residuals
/// R^(d-1), their covariance kernels, the reciprocal trace-variance
/// weights f_v^(d-1), and the exhausted-group mask. Weights are 0 for
/// degenerate groups, whose residuals are frozen at exactly zero.
struct LayerState {
  int layer = 1;  // d; residuals are R^(d-1)
  Grid grid;
  std::vector<std::string> group_ids;
  std::vector<Eigen::MatrixXd> residuals;
  std::vector<CovKernel> kernels;
  Eigen::VectorXd weights;
  Eigen::VectorXd initial_weights;
  std::vector<bool> degenerate;

  int group_count() const { return static_cast<int>(group_ids.size()); }
};

/// Trace variance below which a group counts as exhausted.
inline constexpr double kDegenerateTrace = 1e-12;

/// Builds a LayerState from residual matrices: kernels, weights and the
/// degeneracy mask are derived; degenerate residuals are zeroed.
/// `initial_weights` defaults to the freshly computed weights (layer 0).
LayerState state_from_residuals(int layer, const Grid& grid, std::vector<std::string> group_ids,
                                std::vector<Eigen::MatrixXd> residuals,
                                const Eigen::VectorXd* initial_weights = nullptr);

/// Layer-0 state for a dataset; trajectories are centered per group
/// when subtract_mean is on.
LayerState initial_layer_state(const std::vector<FunctionGroup>& data, bool subtract_mean);

/// One common component: extracted at `layer` for community `community`,
/// shared by the listed member groups (indices into the group order).
struct FiltComponent {
  int layer = 0;
  int community = 0;
  GridFunction function;
  std::vector<int> members;
};

/// Sum of f_v * K_v over the community's non-degenerate members.
/// Throws ExhaustedCommunity when no member has variance left.
CovKernel pooled_operator(const LayerState& state, const std::vector<int>& community);

/// Top eigenfunction of the pooled operator, unit L2 norm, module sign
/// convention.
FiltComponent extract_component(const LayerState& state, const std::vector<int>& community,
                                int community_label = 0);

/// Score vectors <R_vn, phi> per member group, in comp.members order.
std::vector<Eigen::VectorXd> compute_scores(const LayerState& state, const FiltComponent& comp);

/// R^(d) = R^(d-1) - Z phi for every member of every component; kernels,
/// weights and degeneracy recomputed. Components must cover each
/// non-degenerate group exactly once.
LayerState update_residuals(const LayerState& state, const std::vector<FiltComponent>& comps);

/// Layer-wise criterion
///   -sum_v f_v (N_v^-1 sum_n Z_vn^2) + kappa * cardinality.
/// Degenerate groups contribute 0 to the fit term.
double layer_gic(const LayerState& state, const CommunityPartition& partition,
                 const std::vector<FiltComponent>& comps, double kappa,
                 GicWeighting weighting = GicWeighting::residual);

struct LayerSelection {
  double threshold = 0.0;
  CommunityPartition partition;
  std::vector<FiltComponent> components;
  double gic = 0.0;
};

/// Evaluates every candidate threshold below tau_prev and returns the
/// GIC minimizer; ties go to the largest threshold (fewest communities).
LayerSelection select_layer(const LayerState& state, const WeightMatrix& weights,
                            double tau_prev, double kappa,
                            GicWeighting weighting = GicWeighting::residual);

struct FitConfig {
  int dimension = 0;  // D, number of layers
  PenaltySchedule schedule;
  bool subtract_mean = true;
  GicWeighting gic_weighting = GicWeighting::residual;
};

/// A fitted filt-fPCA model. Scores for group v form an N_v x D_v
/// matrix whose column d-1 holds the layer-d scores; D_v can fall short
/// of config.dimension when the group's community exhausts its variance
/// early (ragged depth).
struct FiltModel {
  FitConfig config;
  Grid grid;
  std::vector<std::string> group_order;
  std::vector<int> group_sizes;
  std::vector<GridFunction> means;
  WeightMatrix weights;
  Eigen::VectorXd initial_weights;  // f_v^(0)
  CommunityTree tree;
  std::vector<FiltComponent> components;
  std::vector<Eigen::MatrixXd> scores;

  int group_index(const std::string& id) const;
  int depth(int group) const { return static_cast<int>(scores[group].cols()); }
  /// Component serving `group` at 1-based `layer`, or nullptr past its depth.
  const FiltComponent* component_for(int group, int layer) const;
};

/// Runs the filtration for d = 1..D starting from the unfiltered
/// network, updating residuals after each layer. Stops early once every
/// group is exhausted.
FiltModel fit(const std::vector<FunctionGroup>& data, const FitConfig& config);

/// Group-wise ordinary fPCA (eigenpairs of the group's own kernel).
std::vector<EigenPair> ordinary_fpca(const FunctionGroup& g, int count,
                                     bool subtract_mean = true);

/// mean_v + sum_{d<=depth} Z_vn,d phi_d.
GridFunction reconstruct(const FiltModel& model, const std::string& group, int n, int depth);

/// sum ||R^(depth)||^2 / sum ||X - mean||^2 over all trajectories.
double reconstruction_ratio(const FiltModel& model, const std::vector<FunctionGroup>& data,
                            int depth);

/// Reconstruction-efficiency gaps against group-wise ordinary fPCA:
///   e_{v,D} = (EV_ord(D) - EV_filt(D)) / EV_ord(depth_max)
/// where EV is cumulative explained variance. One row per group, one
/// column per requested depth.
Eigen::MatrixXd efficiency_report(const FiltModel& model, const std::vector<FunctionGroup>& data,
                                  const std::vector<int>& depths, int depth_max);

/// Single-depth view of efficiency_report, one value per group.
std::vector<double> efficiency_gap(const FiltModel& model, const std::vector<FunctionGroup>& data,
                                   int depth, int depth_max);

/// Smallest D whose top-D ordinary fPCs explain at least fraction p of
/// every group's total variance.
int select_dimension(const std::vector<FunctionGroup>& data, double p, bool subtract_mean = true);

struct PenaltyCandidate {
  double a = 0.0;
  double b = 0.0;
  bool admissible = false;
  double min_ev_ratio = 0.0;   // min over groups of EV_filt(D)/EV_ord(D)
  int total_cardinality = 0;   // aleph C_{1:D}
  int distinct_components = 0;
  double ratio = 0.0;          // reconstruction ratio at depth D
};

struct PenaltySelection {
  double a = 0.0;
  double b = 0.0;
  bool admissible = false;  // false carries a quality warning
  std::vector<PenaltyCandidate> table;
};

/// Fits every (a,b) candidate (power schedule) and keeps, among those
/// whose filt components reach 90% of the ordinary-fPCA explained
/// variance in every group, the one with minimal total cardinality;
/// ties prefer larger a, then larger b. If none qualifies the best
/// min-EV-ratio candidate is returned flagged inadmissible.
PenaltySelection select_penalty(const std::vector<FunctionGroup>& data,
                                const std::vector<std::pair<double, double>>& candidates, int D,
                                bool subtract_mean = true,
                                GicWeighting weighting = GicWeighting::residual);

/// Full-structure criterion of an already-fitted model:
///   -sum_v N_v^-1 f_v sum_n sum_d Z_vnd^2 + lambda * total cardinality
/// with the layer-0 weights f_v. Reporting only; never minimized.
double structure_gic(const FiltModel& model, double lambda);

}  // namespace filtfpca
