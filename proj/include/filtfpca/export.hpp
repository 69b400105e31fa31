#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "filtfpca/engine.hpp"

namespace filtfpca {

/// 17-significant-digit decimal, the bit-stable interchange format used
/// by every CSV writer.
std::string format_double(double x);

/// Full symmetric G x G matrix, one row per line, no header.
std::string weight_matrix_csv(const WeightMatrix& w);
WeightMatrix weight_matrix_from_csv(const std::string& path);

/// {"layers":[{"threshold":tau,"assignment":[...]}]}
nlohmann::json tree_to_json(const CommunityTree& tree);
CommunityTree tree_from_json(const nlohmann::json& j);

/// Writes model.json, components.csv, means.csv, scores_<group>.csv,
/// weights.csv and tree.json under `dir` (created if needed).
void save_model(const FiltModel& model, const std::string& dir);
FiltModel load_model(const std::string& dir);

/// Reconstruction and efficiency metrics of a fitted model on a dataset:
/// R per depth 0..D, e per group per depth, explained-variance tables,
/// cardinality totals and the full-structure criterion at
/// lambda = sum_d kappa(d).
nlohmann::json metrics_json(const FiltModel& model, const std::vector<FunctionGroup>& data,
                            const std::vector<int>& depths, int depth_max);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace filtfpca
