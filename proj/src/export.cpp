#include "filtfpca/export.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace filtfpca {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("failed to write '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string weight_matrix_csv(const WeightMatrix& w) {
  std::string out;
  const int g = w.group_count();
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      out += format_double(w.values(i, j));
      out += j + 1 < g ? ',' : '\n';
    }
  }
  return out;
}

WeightMatrix weight_matrix_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
      if (end != cell.c_str() + cell.size()) {
        throw ParseError("non-numeric cell '" + cell + "'", line_no);
      }
    }
    rows.push_back(std::move(row));
  }
  const int g = static_cast<int>(rows.size());
  Eigen::MatrixXd w(g, g);
  for (int i = 0; i < g; ++i) {
    if (static_cast<int>(rows[i].size()) != g) {
      throw ParseError("weight matrix is not square", i + 1);
    }
    for (int j = 0; j < g; ++j) w(i, j) = rows[i][j];
  }
  return WeightMatrix(std::move(w));
}

nlohmann::json tree_to_json(const CommunityTree& tree) {
  nlohmann::json layers = nlohmann::json::array();
  for (const CommunityLayer& layer : tree.layers) {
    layers.push_back({{"threshold", layer.threshold},
                      {"assignment", layer.partition.assignment}});
  }
  return {{"layers", layers}};
}

CommunityTree tree_from_json(const nlohmann::json& j) {
  CommunityTree tree;
  for (const nlohmann::json& layer : j.at("layers")) {
    CommunityLayer out;
    out.threshold = layer.at("threshold").get<double>();
    out.partition.assignment = layer.at("assignment").get<std::vector<int>>();
    int max_label = -1;
    for (int label : out.partition.assignment) max_label = std::max(max_label, label);
    out.partition.cardinality = max_label + 1;
    tree.layers.push_back(std::move(out));
  }
  return tree;
}

namespace {

std::string schedule_form_name(PenaltyForm form) {
  switch (form) {
    case PenaltyForm::power: return "power";
    case PenaltyForm::geometric: return "geometric";
    case PenaltyForm::logistic: return "logistic";
  }
  throw ConfigError("unknown penalty form");
}

PenaltyForm schedule_form_from(const std::string& name) {
  if (name == "power") return PenaltyForm::power;
  if (name == "geometric") return PenaltyForm::geometric;
  if (name == "logistic") return PenaltyForm::logistic;
  throw ConfigError("unknown penalty form '" + name + "'");
}

std::string component_id(const FiltComponent& comp) {
  return "L" + std::to_string(comp.layer) + "_C" + std::to_string(comp.community);
}

// Column-oriented CSV with one header line.
void write_columns_csv(const std::string& path, const std::vector<std::string>& headers,
                       const Eigen::MatrixXd& columns) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < headers.size(); ++j) {
    std::fprintf(f, "%s%c", headers[j].c_str(), j + 1 < headers.size() ? ',' : '\n');
  }
  for (Eigen::Index i = 0; i < columns.rows(); ++i) {
    for (Eigen::Index j = 0; j < columns.cols(); ++j) {
      std::fprintf(f, "%.17g%c", columns(i, j), j + 1 < columns.cols() ? ',' : '\n');
    }
  }
  if (std::fclose(f) != 0) throw IoError("failed to finish writing '" + path + "'");
}

std::pair<std::vector<std::string>, Eigen::MatrixXd> read_columns_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file '" + path + "'", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> headers;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) headers.push_back(cell);
  }
  std::vector<double> values;
  long rows = 0;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      values.push_back(std::strtod(cell.c_str(), &end));
      if (end != cell.c_str() + cell.size()) {
        throw ParseError("non-numeric cell '" + cell + "'", line_no);
      }
      ++count;
    }
    if (count != headers.size()) {
      throw ParseError("expected " + std::to_string(headers.size()) + " cells", line_no);
    }
    ++rows;
  }
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(headers.size()));
  for (long i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < headers.size(); ++j) {
      m(i, static_cast<Eigen::Index>(j)) = values[i * headers.size() + j];
    }
  }
  return {std::move(headers), std::move(m)};
}

}  // namespace

void save_model(const FiltModel& model, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path base(dir);

  nlohmann::json config = {
      {"dimension", model.config.dimension},
      {"schedule",
       {{"form", schedule_form_name(model.config.schedule.form)},
        {"a", model.config.schedule.a},
        {"b", model.config.schedule.b},
        {"u", model.config.schedule.u}}},
      {"subtract_mean", model.config.subtract_mean},
      {"gic_weighting",
       model.config.gic_weighting == GicWeighting::residual ? "residual" : "initial"}};

  nlohmann::json components = nlohmann::json::array();
  for (const FiltComponent& comp : model.components) {
    nlohmann::json members = nlohmann::json::array();
    for (int v : comp.members) members.push_back(model.group_order[v]);
    components.push_back({{"id", component_id(comp)},
                          {"layer", comp.layer},
                          {"community", comp.community},
                          {"members", members}});
  }

  std::vector<int> per_layer;
  int total = 0;
  for (const CommunityLayer& layer : model.tree.layers) {
    per_layer.push_back(layer.partition.cardinality);
    total += layer.partition.cardinality;
  }

  const nlohmann::json model_json = {
      {"format", "filtfpca-model/1"},
      {"config", config},
      {"grid_size", model.grid.size},
      {"group_order", model.group_order},
      {"group_sizes", model.group_sizes},
      {"initial_weights", std::vector<double>(model.initial_weights.begin(),
                                              model.initial_weights.end())},
      {"tree", tree_to_json(model.tree)},
      {"components", components},
      {"cardinality",
       {{"per_layer", per_layer},
        {"total", total},
        {"distinct_components", static_cast<int>(model.components.size())}}}};
  write_text_file((base / "model.json").string(), model_json.dump(2) + "\n");

  if (!model.components.empty()) {
    std::vector<std::string> headers;
    Eigen::MatrixXd columns(model.grid.size, static_cast<Eigen::Index>(model.components.size()));
    for (std::size_t c = 0; c < model.components.size(); ++c) {
      headers.push_back(component_id(model.components[c]));
      columns.col(static_cast<Eigen::Index>(c)) = model.components[c].function.values;
    }
    write_columns_csv((base / "components.csv").string(), headers, columns);
  }

  {
    Eigen::MatrixXd columns(model.grid.size, static_cast<Eigen::Index>(model.means.size()));
    for (std::size_t v = 0; v < model.means.size(); ++v) {
      columns.col(static_cast<Eigen::Index>(v)) = model.means[v].values;
    }
    write_columns_csv((base / "means.csv").string(), model.group_order, columns);
  }

  for (std::size_t v = 0; v < model.group_order.size(); ++v) {
    std::vector<std::string> headers;
    for (int d = 1; d <= model.depth(static_cast<int>(v)); ++d) {
      headers.push_back("L" + std::to_string(d));
    }
    write_columns_csv((base / ("scores_" + model.group_order[v] + ".csv")).string(), headers,
                      model.scores[v]);
  }

  write_text_file((base / "weights.csv").string(), weight_matrix_csv(model.weights));
  write_text_file((base / "tree.json").string(), tree_to_json(model.tree).dump(2) + "\n");
}

FiltModel load_model(const std::string& dir) {
  const fs::path base(dir);
  const nlohmann::json mj = nlohmann::json::parse(read_text_file((base / "model.json").string()));

  FiltModel model;
  model.grid = Grid(mj.at("grid_size").get<int>());
  model.group_order = mj.at("group_order").get<std::vector<std::string>>();
  model.group_sizes = mj.at("group_sizes").get<std::vector<int>>();
  const std::vector<double> w0 = mj.at("initial_weights").get<std::vector<double>>();
  model.initial_weights = Eigen::Map<const Eigen::VectorXd>(w0.data(), w0.size());
  model.tree = tree_from_json(mj.at("tree"));

  const nlohmann::json& cj = mj.at("config");
  model.config.dimension = cj.at("dimension").get<int>();
  model.config.schedule.form = schedule_form_from(cj.at("schedule").at("form").get<std::string>());
  model.config.schedule.a = cj.at("schedule").at("a").get<double>();
  model.config.schedule.b = cj.at("schedule").at("b").get<double>();
  model.config.schedule.u = cj.at("schedule").at("u").get<double>();
  model.config.subtract_mean = cj.at("subtract_mean").get<bool>();
  model.config.gic_weighting = cj.at("gic_weighting").get<std::string>() == "initial"
                                   ? GicWeighting::initial
                                   : GicWeighting::residual;

  // Components: functions come from components.csv, membership from the
  // manifest; column order must agree.
  std::vector<std::string> comp_headers;
  Eigen::MatrixXd comp_columns(model.grid.size, 0);
  if (fs::exists(base / "components.csv")) {
    auto [headers, columns] = read_columns_csv((base / "components.csv").string());
    comp_headers = std::move(headers);
    comp_columns = std::move(columns);
  }
  for (const nlohmann::json& entry : mj.at("components")) {
    FiltComponent comp;
    comp.layer = entry.at("layer").get<int>();
    comp.community = entry.at("community").get<int>();
    const std::string id = entry.at("id").get<std::string>();
    const auto it = std::find(comp_headers.begin(), comp_headers.end(), id);
    if (it == comp_headers.end()) {
      throw ParseError("component '" + id + "' missing from components.csv");
    }
    comp.function = GridFunction(
        model.grid, comp_columns.col(it - comp_headers.begin()));
    for (const nlohmann::json& member : entry.at("members")) {
      comp.members.push_back(model.group_index(member.get<std::string>()));
    }
    model.components.push_back(std::move(comp));
  }

  {
    auto [headers, columns] = read_columns_csv((base / "means.csv").string());
    if (headers != model.group_order) {
      throw ParseError("means.csv columns do not match the model's group order");
    }
    for (Eigen::Index v = 0; v < columns.cols(); ++v) {
      model.means.emplace_back(model.grid, columns.col(v));
    }
  }

  for (std::size_t v = 0; v < model.group_order.size(); ++v) {
    auto [headers, columns] =
        read_columns_csv((base / ("scores_" + model.group_order[v] + ".csv")).string());
    if (columns.rows() != model.group_sizes[v]) {
      throw ParseError("scores of group '" + model.group_order[v] +
                       "' disagree with the recorded group size");
    }
    model.scores.push_back(std::move(columns));
  }

  model.weights = weight_matrix_from_csv((base / "weights.csv").string());
  return model;
}

nlohmann::json metrics_json(const FiltModel& model, const std::vector<FunctionGroup>& data,
                            const std::vector<int>& depths, int depth_max) {
  const int layers = static_cast<int>(model.tree.layers.size());
  nlohmann::json out;

  std::vector<double> r_per_depth;
  for (int depth = 0; depth <= layers; ++depth) {
    r_per_depth.push_back(reconstruction_ratio(model, data, depth));
  }
  out["R_per_depth"] = r_per_depth;

  std::vector<int> e_depths = depths;
  if (e_depths.empty()) {
    for (int d = 1; d <= layers; ++d) e_depths.push_back(d);
  }
  const int cap = std::min(depth_max, model.grid.size);
  const Eigen::MatrixXd gaps = efficiency_report(model, data, e_depths, cap);
  out["efficiency_depths"] = e_depths;
  out["efficiency_depth_max"] = cap;
  nlohmann::json e_json;
  for (std::size_t v = 0; v < model.group_order.size(); ++v) {
    e_json[model.group_order[v]] =
        std::vector<double>(gaps.row(static_cast<Eigen::Index>(v)).begin(),
                            gaps.row(static_cast<Eigen::Index>(v)).end());
  }
  out["efficiency_gap"] = e_json;

  nlohmann::json ev;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int v = model.group_index(data[i].id);
    const std::vector<EigenPair> ord =
        ordinary_fpca(data[i], cap, model.config.subtract_mean);
    std::vector<double> ord_values;
    for (const EigenPair& p : ord) ord_values.push_back(p.value);
    std::vector<double> filt_values;
    const double n = static_cast<double>(model.scores[v].rows());
    for (Eigen::Index d = 0; d < model.scores[v].cols(); ++d) {
      filt_values.push_back(model.scores[v].col(d).squaredNorm() / n);
    }
    ev[model.group_order[v]] = {{"ordinary", ord_values}, {"filt", filt_values}};
  }
  out["explained_variance"] = ev;

  std::vector<int> per_layer;
  int total = 0;
  for (const CommunityLayer& layer : model.tree.layers) {
    per_layer.push_back(layer.partition.cardinality);
    total += layer.partition.cardinality;
  }
  out["cardinality_per_layer"] = per_layer;
  out["total_cardinality"] = total;
  out["distinct_components"] = static_cast<int>(model.components.size());

  double lambda = 0.0;
  for (int d = 1; d <= layers; ++d) lambda += model.config.schedule(d);
  out["structure_gic"] = {{"lambda", lambda}, {"value", structure_gic(model, lambda)}};
  return out;
}

}  // namespace filtfpca
