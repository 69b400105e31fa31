#include "filtfpca/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace filtfpca {

double PenaltySchedule::operator()(int layer) const {
  const double d = static_cast<double>(layer);
  switch (form) {
    case PenaltyForm::power:
      return a * std::pow(d, -b);
    case PenaltyForm::geometric:
      return a * std::pow(b, -d);
    case PenaltyForm::logistic:
      return a / (1.0 + std::pow(b, d - u));
  }
  throw ConfigError("unknown penalty form");
}

void PenaltySchedule::validate() const {
  if (a < 0.0 || !std::isfinite(a)) {
    throw ConfigError("penalty parameter a must be nonnegative");
  }
  if (b <= 0.0 || !std::isfinite(b)) {
    throw ConfigError("penalty parameter b must be positive");
  }
  // power decays for any b > 0; the other forms need b >= 1 to stay
  // non-increasing in the layer index.
  if (form != PenaltyForm::power && b < 1.0) {
    throw ConfigError("geometric/logistic schedules need b >= 1");
  }
}

LayerState state_from_residuals(int layer, const Grid& grid, std::vector<std::string> group_ids,
                                std::vector<Eigen::MatrixXd> residuals,
                                const Eigen::VectorXd* initial_weights) {
  if (group_ids.size() != residuals.size()) {
    throw DimensionError("group ids and residual matrices differ in count");
  }
  LayerState state;
  state.layer = layer;
  state.grid = grid;
  state.group_ids = std::move(group_ids);
  state.residuals = std::move(residuals);
  const int g = state.group_count();
  state.weights = Eigen::VectorXd::Zero(g);
  state.degenerate.assign(g, false);
  state.kernels.reserve(g);
  const double inv_t = grid.dt();
  for (int v = 0; v < g; ++v) {
    Eigen::MatrixXd& r = state.residuals[v];
    if (static_cast<int>(r.cols()) != grid.size) {
      throw DimensionError("residuals of group '" + state.group_ids[v] +
                           "' do not match the grid");
    }
    const double n = static_cast<double>(r.rows());
    double tv = r.squaredNorm() / n * inv_t;  // = dt * trace(R'R/N)
    if (tv < kDegenerateTrace) {
      state.degenerate[v] = true;
      r.setZero();
      state.kernels.emplace_back(grid, Eigen::MatrixXd::Zero(grid.size, grid.size));
      continue;
    }
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(grid.size, grid.size);
    k.selfadjointView<Eigen::Lower>().rankUpdate(r.transpose(), 1.0 / n);
    k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
    state.kernels.emplace_back(grid, std::move(k));
    state.weights[v] = 1.0 / trace_variance(state.kernels[v]);
  }
  state.initial_weights = initial_weights ? *initial_weights : state.weights;
  return state;
}

LayerState initial_layer_state(const std::vector<FunctionGroup>& data, bool subtract_mean) {
  if (data.empty()) {
    throw ConfigError("empty dataset");
  }
  std::vector<std::string> ids;
  std::vector<Eigen::MatrixXd> residuals;
  ids.reserve(data.size());
  residuals.reserve(data.size());
  for (const FunctionGroup& g : data) {
    if (g.grid != data.front().grid) {
      throw GridMismatch("group '" + g.id + "' is on a different grid");
    }
    ids.push_back(g.id);
    Eigen::MatrixXd r = g.trajectories;
    if (subtract_mean) {
      r.rowwise() -= g.trajectories.colwise().mean();
    }
    residuals.push_back(std::move(r));
  }
  return state_from_residuals(1, data.front().grid, std::move(ids), std::move(residuals));
}

namespace {

void check_members(const LayerState& state, const std::vector<int>& community) {
  if (community.empty()) {
    throw ConfigError("empty community");
  }
  for (int v : community) {
    if (v < 0 || v >= state.group_count()) {
      throw LookupError("group index " + std::to_string(v) + " out of range");
    }
  }
}

}  // namespace

CovKernel pooled_operator(const LayerState& state, const std::vector<int>& community) {
  check_members(state, community);
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(state.grid.size, state.grid.size);
  bool any_live = false;
  for (int v : community) {
    if (state.degenerate[v]) continue;
    pooled += state.weights[v] * state.kernels[v].matrix;
    any_live = true;
  }
  if (!any_live) {
    throw ExhaustedCommunity("every group in the community has exhausted its variance");
  }
  return CovKernel(state.grid, std::move(pooled));
}

FiltComponent extract_component(const LayerState& state, const std::vector<int>& community,
                                int community_label) {
  CovKernel pooled = pooled_operator(state, community);
  EigenPair top = detail::kernel_eigenpairs(pooled.grid, pooled.matrix, 1).front();
  FiltComponent comp;
  comp.layer = state.layer;
  comp.community = community_label;
  comp.function = std::move(top.function);
  comp.members = community;
  return comp;
}

std::vector<Eigen::VectorXd> compute_scores(const LayerState& state, const FiltComponent& comp) {
  check_members(state, comp.members);
  if (comp.function.grid != state.grid) {
    throw GridMismatch("component and state grids differ");
  }
  const double dt = state.grid.dt();
  std::vector<Eigen::VectorXd> scores;
  scores.reserve(comp.members.size());
  for (int v : comp.members) {
    scores.push_back(state.residuals[v] * comp.function.values * dt);
  }
  return scores;
}

LayerState update_residuals(const LayerState& state, const std::vector<FiltComponent>& comps) {
  std::vector<int> covered(state.group_count(), 0);
  for (const FiltComponent& comp : comps) {
    check_members(state, comp.members);
    for (int v : comp.members) ++covered[v];
  }
  for (int v = 0; v < state.group_count(); ++v) {
    if (covered[v] > 1) {
      throw StructureError("group '" + state.group_ids[v] +
                           "' is covered by several components in one layer");
    }
    if (covered[v] == 0 && !state.degenerate[v]) {
      throw StructureError("non-degenerate group '" + state.group_ids[v] +
                           "' has no component in this layer");
    }
  }
  std::vector<Eigen::MatrixXd> next = state.residuals;
  for (const FiltComponent& comp : comps) {
    std::vector<Eigen::VectorXd> scores = compute_scores(state, comp);
    for (std::size_t i = 0; i < comp.members.size(); ++i) {
      next[comp.members[i]].noalias() -= scores[i] * comp.function.values.transpose();
    }
  }
  return state_from_residuals(state.layer + 1, state.grid, state.group_ids, std::move(next),
                              &state.initial_weights);
}

double layer_gic(const LayerState& state, const CommunityPartition& partition,
                 const std::vector<FiltComponent>& comps, double kappa,
                 GicWeighting weighting) {
  const Eigen::VectorXd& w =
      weighting == GicWeighting::residual ? state.weights : state.initial_weights;
  double fit_term = 0.0;
  for (const FiltComponent& comp : comps) {
    for (int v : comp.members) {
      if (comp.members.front() != comp.members.back() &&
          partition.assignment[v] != partition.assignment[comp.members.front()]) {
        throw StructureError("component members span several communities");
      }
    }
    const std::vector<Eigen::VectorXd> scores = compute_scores(state, comp);
    for (std::size_t i = 0; i < comp.members.size(); ++i) {
      const int v = comp.members[i];
      if (state.degenerate[v]) continue;
      fit_term += w[v] * scores[i].squaredNorm() / static_cast<double>(scores[i].size());
    }
  }
  return -fit_term + kappa * static_cast<double>(partition.cardinality);
}

namespace {

std::vector<std::vector<int>> communities_of(const CommunityPartition& part) {
  std::vector<std::vector<int>> communities(part.cardinality);
  for (int v = 0; v < static_cast<int>(part.assignment.size()); ++v) {
    communities[part.assignment[v]].push_back(v);
  }
  return communities;
}

// Per-community work shared across candidate thresholds. Partitions of
// successive candidates are nested, so the distinct communities form a
// laminar family of at most 2G-1 sets per layer.
struct CommunityEntry {
  bool exhausted = false;
  FiltComponent component;
  double fit = 0.0;  // weighted mean squared score sum over live members
};

}  // namespace

LayerSelection select_layer(const LayerState& state, const WeightMatrix& weights,
                            double tau_prev, double kappa, GicWeighting weighting) {
  if (weights.group_count() != state.group_count()) {
    throw DimensionError("weight matrix and state disagree on the group count");
  }
  const Eigen::VectorXd& gic_w =
      weighting == GicWeighting::residual ? state.weights : state.initial_weights;

  std::map<std::vector<int>, CommunityEntry> memo;
  auto evaluate = [&](const std::vector<int>& members) -> const CommunityEntry& {
    auto it = memo.find(members);
    if (it != memo.end()) return it->second;
    CommunityEntry entry;
    const bool all_degenerate =
        std::all_of(members.begin(), members.end(), [&](int v) { return state.degenerate[v]; });
    if (all_degenerate) {
      entry.exhausted = true;
    } else {
      entry.component = extract_component(state, members);
      const std::vector<Eigen::VectorXd> scores = compute_scores(state, entry.component);
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (state.degenerate[members[i]]) continue;
        entry.fit +=
            gic_w[members[i]] * scores[i].squaredNorm() / static_cast<double>(scores[i].size());
      }
    }
    return memo.emplace(members, std::move(entry)).first->second;
  };

  const std::vector<double> candidates = candidate_thresholds(weights, tau_prev);
  bool have_best = false;
  LayerSelection best;
  for (double tau : candidates) {
    CommunityPartition part = connected_communities(weights, tau);
    double gic = kappa * static_cast<double>(part.cardinality);
    std::vector<std::vector<int>> comms = communities_of(part);
    for (const std::vector<int>& members : comms) {
      const CommunityEntry& entry = evaluate(members);
      if (!entry.exhausted) gic -= entry.fit;
    }
    if (!have_best || gic < best.gic) {
      have_best = true;
      best.threshold = tau;
      best.partition = std::move(part);
      best.gic = gic;
      best.components.clear();
      for (std::size_t label = 0; label < comms.size(); ++label) {
        const CommunityEntry& entry = memo.at(comms[label]);
        if (entry.exhausted) continue;
        FiltComponent comp = entry.component;
        comp.community = static_cast<int>(label);
        best.components.push_back(std::move(comp));
      }
    }
  }
  return best;
}

namespace {

struct Prefit {
  LayerState state;
  WeightMatrix weights;
  std::vector<GridFunction> means;
  std::vector<int> sizes;
};

Prefit prepare(const std::vector<FunctionGroup>& data, bool subtract_mean) {
  if (data.size() < 2) {
    throw ConfigError("filtration needs at least 2 groups");
  }
  Prefit pre;
  pre.state = initial_layer_state(data, subtract_mean);
  pre.weights = build_weight_matrix(pre.state.kernels, pre.state.group_ids);
  pre.means.reserve(data.size());
  pre.sizes.reserve(data.size());
  for (const FunctionGroup& g : data) {
    pre.means.push_back(subtract_mean
                            ? mean_function(g)
                            : GridFunction(g.grid, Eigen::VectorXd::Zero(g.grid.size)));
    pre.sizes.push_back(g.size());
  }
  return pre;
}

FiltModel fit_prepared(Prefit pre, const FitConfig& config) {
  FiltModel model;
  model.config = config;
  model.grid = pre.state.grid;
  model.group_order = pre.state.group_ids;
  model.group_sizes = std::move(pre.sizes);
  model.means = std::move(pre.means);
  model.weights = pre.weights;
  model.initial_weights = pre.state.initial_weights;
  model.scores.reserve(model.group_order.size());
  for (std::size_t v = 0; v < model.group_order.size(); ++v) {
    model.scores.emplace_back(pre.state.residuals[v].rows(), 0);
  }

  LayerState state = std::move(pre.state);
  double tau = std::numeric_limits<double>::infinity();
  for (int d = 1; d <= config.dimension; ++d) {
    if (std::all_of(state.degenerate.begin(), state.degenerate.end(),
                    [](bool x) { return x; })) {
      break;  // every group exhausted; deeper components would be arbitrary
    }
    LayerSelection sel =
        select_layer(state, pre.weights, tau, config.schedule(d), config.gic_weighting);
    model.tree.layers.push_back(CommunityLayer{sel.threshold, sel.partition});
    for (const FiltComponent& comp : sel.components) {
      const std::vector<Eigen::VectorXd> scores = compute_scores(state, comp);
      for (std::size_t i = 0; i < comp.members.size(); ++i) {
        Eigen::MatrixXd& s = model.scores[comp.members[i]];
        s.conservativeResize(Eigen::NoChange, s.cols() + 1);
        s.col(s.cols() - 1) = scores[i];
      }
      model.components.push_back(comp);
    }
    state = update_residuals(state, sel.components);
    tau = sel.threshold;
  }
  return model;
}

}  // namespace

FiltModel fit(const std::vector<FunctionGroup>& data, const FitConfig& config) {
  if (config.dimension < 1) {
    throw ConfigError("dimension D must be at least 1");
  }
  config.schedule.validate();
  return fit_prepared(prepare(data, config.subtract_mean), config);
}

int FiltModel::group_index(const std::string& id) const {
  for (std::size_t v = 0; v < group_order.size(); ++v) {
    if (group_order[v] == id) return static_cast<int>(v);
  }
  throw LookupError("unknown group '" + id + "'");
}

const FiltComponent* FiltModel::component_for(int group, int layer) const {
  for (const FiltComponent& comp : components) {
    if (comp.layer != layer) continue;
    if (std::find(comp.members.begin(), comp.members.end(), group) != comp.members.end()) {
      return &comp;
    }
  }
  return nullptr;
}

std::vector<EigenPair> ordinary_fpca(const FunctionGroup& g, int count, bool subtract_mean) {
  return eigen_decompose(covariance_kernel(g, subtract_mean), count);
}

GridFunction reconstruct(const FiltModel& model, const std::string& group, int n, int depth) {
  const int v = model.group_index(group);
  if (n < 0 || n >= static_cast<int>(model.scores[v].rows())) {
    throw LookupError("trajectory " + std::to_string(n) + " out of range for group '" + group +
                      "'");
  }
  if (depth < 0 || depth > model.depth(v)) {
    throw DimensionError("depth " + std::to_string(depth) + " exceeds the " +
                         std::to_string(model.depth(v)) + " layers available to group '" +
                         group + "'");
  }
  Eigen::VectorXd out = model.means[v].values;
  for (int d = 1; d <= depth; ++d) {
    const FiltComponent* comp = model.component_for(v, d);
    out += model.scores[v](n, d - 1) * comp->function.values;
  }
  return GridFunction(model.grid, std::move(out));
}

namespace {

// Maps model groups to positions in `data`, enforcing id/grid/size agreement.
std::vector<int> match_data(const FiltModel& model, const std::vector<FunctionGroup>& data) {
  if (data.size() != model.group_order.size()) {
    throw LookupError("dataset has " + std::to_string(data.size()) + " groups, model has " +
                      std::to_string(model.group_order.size()));
  }
  std::vector<int> pos(model.group_order.size(), -1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int v = model.group_index(data[i].id);
    if (pos[v] >= 0) {
      throw LookupError("duplicate group '" + data[i].id + "' in dataset");
    }
    if (data[i].grid != model.grid) {
      throw GridMismatch("group '" + data[i].id + "' is on a different grid than the model");
    }
    if (data[i].size() != model.group_sizes[v]) {
      throw LookupError("group '" + data[i].id + "' has " + std::to_string(data[i].size()) +
                        " trajectories, model has " + std::to_string(model.group_sizes[v]));
    }
    pos[v] = static_cast<int>(i);
  }
  return pos;
}

}  // namespace

double reconstruction_ratio(const FiltModel& model, const std::vector<FunctionGroup>& data,
                            int depth) {
  if (depth < 0) {
    throw ConfigError("depth must be nonnegative");
  }
  const std::vector<int> pos = match_data(model, data);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t v = 0; v < model.group_order.size(); ++v) {
    Eigen::MatrixXd centered = data[pos[v]].trajectories;
    centered.rowwise() -= model.means[v].values.transpose();
    den += centered.squaredNorm();
    const int used = std::min(depth, model.depth(static_cast<int>(v)));
    for (int d = 1; d <= used; ++d) {
      const FiltComponent* comp = model.component_for(static_cast<int>(v), d);
      centered.noalias() -=
          model.scores[v].col(d - 1) * comp->function.values.transpose();
    }
    num += centered.squaredNorm();
  }
  if (den <= 0.0) {
    throw DegenerateGroup("dataset has zero total variance", "");
  }
  return num / den;
}

Eigen::MatrixXd efficiency_report(const FiltModel& model, const std::vector<FunctionGroup>& data,
                                  const std::vector<int>& depths, int depth_max) {
  if (depth_max < 1) {
    throw ConfigError("depth_max must be at least 1");
  }
  const std::vector<int> pos = match_data(model, data);
  const int g = static_cast<int>(model.group_order.size());
  const int cap = std::min(depth_max, model.grid.size);
  Eigen::MatrixXd out(g, static_cast<int>(depths.size()));
  for (int v = 0; v < g; ++v) {
    const std::vector<EigenPair> ord =
        ordinary_fpca(data[pos[v]], cap, model.config.subtract_mean);
    Eigen::VectorXd cum_ord = Eigen::VectorXd::Zero(cap + 1);
    for (int j = 0; j < cap; ++j) cum_ord[j + 1] = cum_ord[j] + ord[j].value;
    const int dv = model.depth(v);
    Eigen::VectorXd cum_filt = Eigen::VectorXd::Zero(dv + 1);
    const double n = static_cast<double>(model.scores[v].rows());
    for (int j = 0; j < dv; ++j) {
      cum_filt[j + 1] = cum_filt[j] + model.scores[v].col(j).squaredNorm() / n;
    }
    const double denom = cum_ord[cap];
    for (std::size_t k = 0; k < depths.size(); ++k) {
      const int depth = depths[k];
      if (depth < 0) {
        throw ConfigError("depth must be nonnegative");
      }
      const double ev_ord = cum_ord[std::min(depth, cap)];
      const double ev_filt = cum_filt[std::min(depth, dv)];
      out(v, static_cast<int>(k)) = denom > 0.0 ? (ev_ord - ev_filt) / denom : 0.0;
    }
  }
  return out;
}

std::vector<double> efficiency_gap(const FiltModel& model, const std::vector<FunctionGroup>& data,
                                   int depth, int depth_max) {
  const Eigen::MatrixXd report = efficiency_report(model, data, {depth}, depth_max);
  return std::vector<double>(report.col(0).begin(), report.col(0).end());
}

int select_dimension(const std::vector<FunctionGroup>& data, double p, bool subtract_mean) {
  if (p <= 0.0 || p >= 1.0) {
    throw ConfigError("variance fraction p must lie strictly between 0 and 1");
  }
  if (data.empty()) {
    throw ConfigError("empty dataset");
  }
  int needed = 1;
  for (const FunctionGroup& g : data) {
    const std::vector<EigenPair> pairs = ordinary_fpca(g, g.grid.size, subtract_mean);
    double total = 0.0;
    for (const EigenPair& e : pairs) total += e.value;
    if (total <= kDegenerateTrace) continue;  // nothing to explain
    double cum = 0.0;
    for (int j = 0; j < static_cast<int>(pairs.size()); ++j) {
      cum += pairs[j].value;
      if (cum >= p * total) {
        needed = std::max(needed, j + 1);
        break;
      }
    }
  }
  return needed;
}

PenaltySelection select_penalty(const std::vector<FunctionGroup>& data,
                                const std::vector<std::pair<double, double>>& candidates, int D,
                                bool subtract_mean, GicWeighting weighting) {
  if (candidates.empty()) {
    throw ConfigError("empty penalty candidate grid");
  }
  if (D < 1) {
    throw ConfigError("dimension D must be at least 1");
  }
  Prefit pre = prepare(data, subtract_mean);
  const int g = static_cast<int>(data.size());
  const int cap = std::min(D, pre.state.grid.size);

  // Ordinary-fPCA explained variance to depth D, computed once.
  Eigen::VectorXd ev_ord(g);
  for (int v = 0; v < g; ++v) {
    const std::vector<EigenPair> ord = ordinary_fpca(data[v], cap, subtract_mean);
    double cum = 0.0;
    for (const EigenPair& e : ord) cum += e.value;
    ev_ord[v] = cum;
  }

  PenaltySelection selection;
  for (const auto& [a, b] : candidates) {
    FitConfig config;
    config.dimension = D;
    config.schedule = PenaltySchedule{PenaltyForm::power, a, b, 0.0};
    config.subtract_mean = subtract_mean;
    config.gic_weighting = weighting;
    config.schedule.validate();
    FiltModel model = fit_prepared(pre, config);

    PenaltyCandidate cand;
    cand.a = a;
    cand.b = b;
    cand.min_ev_ratio = std::numeric_limits<double>::infinity();
    for (int v = 0; v < g; ++v) {
      const double n = static_cast<double>(model.scores[v].rows());
      const double ev_filt = model.scores[v].squaredNorm() / n;
      const double ratio = ev_ord[v] > 0.0 ? ev_filt / ev_ord[v] : 1.0;
      cand.min_ev_ratio = std::min(cand.min_ev_ratio, ratio);
    }
    cand.admissible = cand.min_ev_ratio >= 0.9;
    for (const CommunityLayer& layer : model.tree.layers) {
      cand.total_cardinality += layer.partition.cardinality;
    }
    cand.distinct_components = static_cast<int>(model.components.size());
    cand.ratio = reconstruction_ratio(model, data, D);
    selection.table.push_back(cand);
  }

  const PenaltyCandidate* best = nullptr;
  for (const PenaltyCandidate& cand : selection.table) {
    if (!cand.admissible) continue;
    if (!best || cand.total_cardinality < best->total_cardinality ||
        (cand.total_cardinality == best->total_cardinality &&
         (cand.a > best->a || (cand.a == best->a && cand.b > best->b)))) {
      best = &cand;
    }
  }
  if (best) {
    selection.admissible = true;
  } else {
    // Nothing reaches 90%; fall back to the best minimum EV ratio.
    for (const PenaltyCandidate& cand : selection.table) {
      if (!best || cand.min_ev_ratio > best->min_ev_ratio ||
          (cand.min_ev_ratio == best->min_ev_ratio &&
           (cand.a > best->a || (cand.a == best->a && cand.b > best->b)))) {
        best = &cand;
      }
    }
    selection.admissible = false;
  }
  selection.a = best->a;
  selection.b = best->b;
  return selection;
}

double structure_gic(const FiltModel& model, double lambda) {
  double fit_term = 0.0;
  for (std::size_t v = 0; v < model.group_order.size(); ++v) {
    const double n = static_cast<double>(model.scores[v].rows());
    fit_term += model.initial_weights[v] * model.scores[v].squaredNorm() / n;
  }
  int total = 0;
  for (const CommunityLayer& layer : model.tree.layers) {
    total += layer.partition.cardinality;
  }
  return -fit_term + lambda * static_cast<double>(total);
}

}  // namespace filtfpca
