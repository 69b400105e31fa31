// Command-line front end: simulate, preprocess, fit, evaluate.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "filtfpca/engine.hpp"
#include "filtfpca/export.hpp"
#include "filtfpca/ingest.hpp"
#include "filtfpca/simulate.hpp"
#include "filtfpca/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

class Manifest {
 public:
  Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
    body_["command"] = std::move(command);
    body_["tool_version"] = filtfpca::kVersion;
    body_["inputs"] = json::array();
    body_["outputs"] = json::array();
  }

  void config(json j) { body_["config"] = std::move(j); }
  void extra(const std::string& key, json j) { body_[key] = std::move(j); }
  void input(const std::string& path) { body_["inputs"].push_back(path); }
  std::string output(const fs::path& path) {
    body_["outputs"].push_back(path.string());
    return path.string();
  }

  void write(const fs::path& dir) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    body_["wall_time_seconds"] = elapsed.count();
    body_["outputs"].push_back((dir / "manifest.json").string());
    filtfpca::write_text_file((dir / "manifest.json").string(), body_.dump(2) + "\n");
  }

 private:
  json body_;
  std::chrono::steady_clock::time_point start_;
};

struct SimulateArgs {
  std::uint64_t seed = 1;
  int grid_size = 100;
  int n_per_group = 500;
  std::string out_dir;
};

int run_simulate(const SimulateArgs& args) {
  Manifest manifest("simulate");
  filtfpca::SimConfig config;
  config.seed = args.seed;
  config.grid_size = args.grid_size;
  config.n_per_group = args.n_per_group;
  manifest.config({{"seed", config.seed},
                   {"T", config.grid_size},
                   {"n_per_group", config.n_per_group},
                   {"n_groups", config.group_count()},
                   {"fourier_count", config.fourier_count},
                   {"basis_count", config.basis_count}});

  const filtfpca::SimDataset dataset = filtfpca::generate_dataset(config);
  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);

  filtfpca::write_long_csv(dataset.groups, manifest.output(out / "dataset.csv"));

  json truth;
  truth["format"] = "filtfpca-ground-truth/1";
  truth["stream_order"] =
      "v1: SplitMix64 streams; basis coefficients from stream 0 (row-major, standard normal "
      "via inverse CDF); group v scores from stream v+1, trajectory-major, dimension "
      "innermost";
  truth["seed"] = config.seed;
  truth["T"] = config.grid_size;
  truth["n_per_group"] = config.n_per_group;
  json groups = json::array();
  for (std::size_t v = 0; v < dataset.groups.size(); ++v) {
    std::vector<double> stddev;
    for (int d = 1; d <= 5; ++d) stddev.push_back(filtfpca::score_stddev(static_cast<int>(v), d));
    groups.push_back({{"id", dataset.groups[v].id},
                      {"basis_indices", config.assignment[v]},
                      {"score_stddev", stddev}});
  }
  truth["groups"] = groups;
  json bases = json::array();
  for (const filtfpca::GridFunction& b : dataset.bases) {
    bases.push_back(std::vector<double>(b.values.begin(), b.values.end()));
  }
  truth["bases"] = bases;
  filtfpca::write_text_file(manifest.output(out / "ground_truth.json"), truth.dump() + "\n");

  manifest.write(out);
  return kExitOk;
}

struct PreprocessArgs {
  std::string input;
  std::string out_dir;
  double sampling_rate = 0.0;
  int epoch_length = 1000;
  double lowpass = 50.0;
  bool no_lowpass = false;
  bool sqrt_transform = true;
  bool outlier_removal = true;
  bool drop_dc = false;
};

int run_preprocess(const PreprocessArgs& args) {
  Manifest manifest("preprocess");
  manifest.input(args.input);

  filtfpca::PreprocessConfig config;
  config.epoch_length = args.epoch_length;
  if (!args.no_lowpass) config.lowpass_hz = args.lowpass;
  config.sqrt_transform = args.sqrt_transform;
  config.outlier_removal = args.outlier_removal;
  config.drop_dc = args.drop_dc;
  manifest.config({{"fs", args.sampling_rate},
                   {"epoch_length", config.epoch_length},
                   {"lowpass_hz", config.lowpass_hz ? json(*config.lowpass_hz) : json(nullptr)},
                   {"sqrt_transform", config.sqrt_transform},
                   {"outlier_removal", config.outlier_removal},
                   {"drop_dc", config.drop_dc}});

  const std::vector<filtfpca::RawRecording> recordings =
      filtfpca::load_raw_csv(args.input, args.sampling_rate);
  const filtfpca::PreprocessResult result = filtfpca::preprocess(recordings, config);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  filtfpca::write_long_csv(result.groups, manifest.output(out / "epochs.csv"));

  json sidecar;
  sidecar["filter"] = {{"lowpass_hz",
                        config.lowpass_hz ? json(*config.lowpass_hz) : json(nullptr)},
                       {"drop_dc", config.drop_dc},
                       {"sqrt_transform", config.sqrt_transform},
                       {"epoch_length", config.epoch_length},
                       {"fs", args.sampling_rate}};
  json removed;
  for (const auto& [channel, indices] : result.removed) {
    removed[channel] = indices;
  }
  sidecar["removed_epochs"] = removed;
  filtfpca::write_text_file(manifest.output(out / "preprocess.json"), sidecar.dump(2) + "\n");

  manifest.write(out);
  return kExitOk;
}

struct FitArgs {
  std::string input;
  std::string out_dir;
  int dimension = 0;          // 0: select via p
  double p = 0.90;
  std::optional<double> a;
  std::optional<double> b;
  double u = 0.0;
  std::string schedule = "power";
  bool use_grid = false;
  std::vector<double> grid_a = {0.05, 0.1, 0.2, 0.3, 0.5};
  std::vector<double> grid_b = {1.0, 1.1, 1.2, 1.3, 1.4};
  bool subtract_mean = true;
  std::string gic_weights = "residual";
  int depth_max = 25;
};

filtfpca::PenaltyForm parse_form(const std::string& name) {
  if (name == "power") return filtfpca::PenaltyForm::power;
  if (name == "geometric") return filtfpca::PenaltyForm::geometric;
  if (name == "logistic") return filtfpca::PenaltyForm::logistic;
  throw filtfpca::ConfigError("unknown schedule form '" + name + "'");
}

int run_fit(const FitArgs& args) {
  Manifest manifest("fit");
  manifest.input(args.input);

  const std::vector<filtfpca::FunctionGroup> data = filtfpca::load_long_csv(args.input);

  filtfpca::FitConfig config;
  config.subtract_mean = args.subtract_mean;
  config.gic_weighting = args.gic_weights == "initial" ? filtfpca::GicWeighting::initial
                                                       : filtfpca::GicWeighting::residual;
  if (args.gic_weights != "initial" && args.gic_weights != "residual") {
    throw filtfpca::ConfigError("--gic-weights must be 'residual' or 'initial'");
  }

  config.dimension = args.dimension;
  if (config.dimension == 0) {
    config.dimension = filtfpca::select_dimension(data, args.p, config.subtract_mean);
  }

  config.schedule.form = parse_form(args.schedule);
  config.schedule.u = args.u;
  json selection_info;
  if (args.a && args.b) {
    config.schedule.a = *args.a;
    config.schedule.b = *args.b;
  } else if (args.a || args.b) {
    throw filtfpca::ConfigError("--a and --b must be given together");
  } else if (args.use_grid) {
    if (config.schedule.form != filtfpca::PenaltyForm::power) {
      throw filtfpca::ConfigError("--grid search applies to the power schedule only");
    }
    std::vector<std::pair<double, double>> candidates;
    for (double a : args.grid_a) {
      for (double b : args.grid_b) candidates.emplace_back(a, b);
    }
    const filtfpca::PenaltySelection sel = filtfpca::select_penalty(
        data, candidates, config.dimension, config.subtract_mean, config.gic_weighting);
    config.schedule.a = sel.a;
    config.schedule.b = sel.b;
    selection_info["admissible"] = sel.admissible;
    json table = json::array();
    for (const filtfpca::PenaltyCandidate& cand : sel.table) {
      table.push_back({{"a", cand.a},
                       {"b", cand.b},
                       {"admissible", cand.admissible},
                       {"min_ev_ratio", cand.min_ev_ratio},
                       {"total_cardinality", cand.total_cardinality},
                       {"distinct_components", cand.distinct_components},
                       {"R", cand.ratio}});
    }
    selection_info["table"] = table;
    if (!sel.admissible) {
      std::cerr << "warning: no (a,b) candidate reached 90% of the ordinary-fPCA explained "
                   "variance in every group; picked the best minimum ratio\n";
    }
  } else {
    throw filtfpca::ConfigError("give --a/--b, or --grid to search the candidate grid");
  }
  config.schedule.validate();

  manifest.config({{"D", config.dimension},
                   {"p", args.p},
                   {"schedule",
                    {{"form", args.schedule},
                     {"a", config.schedule.a},
                     {"b", config.schedule.b},
                     {"u", config.schedule.u}}},
                   {"subtract_mean", config.subtract_mean},
                   {"gic_weights", args.gic_weights},
                   {"depth_max", args.depth_max}});
  if (!selection_info.is_null()) manifest.extra("penalty_selection", selection_info);

  const filtfpca::FiltModel model = filtfpca::fit(data, config);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  filtfpca::save_model(model, out.string());
  manifest.output(out / "model.json");
  manifest.output(out / "components.csv");
  manifest.output(out / "means.csv");
  manifest.output(out / "weights.csv");
  manifest.output(out / "tree.json");
  for (const std::string& gid : model.group_order) {
    manifest.output(out / ("scores_" + gid + ".csv"));
  }

  const json metrics = filtfpca::metrics_json(model, data, {}, args.depth_max);
  filtfpca::write_text_file(manifest.output(out / "metrics.json"), metrics.dump(2) + "\n");

  manifest.write(out);
  return kExitOk;
}

struct EvaluateArgs {
  std::string model_dir;
  std::string data_path;
  std::string out_dir;
  std::vector<int> depths;
  int depth_max = 25;
  bool csv = false;
};

int run_evaluate(const EvaluateArgs& args) {
  Manifest manifest("evaluate");
  manifest.input(args.model_dir);
  manifest.input(args.data_path);

  const filtfpca::FiltModel model = filtfpca::load_model(args.model_dir);
  const std::vector<filtfpca::FunctionGroup> data = filtfpca::load_long_csv(args.data_path);

  std::vector<int> depths = args.depths;
  if (depths.empty()) {
    for (int d = 1; d <= static_cast<int>(model.tree.layers.size()); ++d) depths.push_back(d);
  }
  int depth_max = args.depth_max;
  for (int d : depths) depth_max = std::max(depth_max, d);
  manifest.config({{"depths", depths}, {"depth_max", depth_max}, {"csv", args.csv}});

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  const json metrics = filtfpca::metrics_json(model, data, depths, depth_max);
  filtfpca::write_text_file(manifest.output(out / "metrics.json"), metrics.dump(2) + "\n");

  if (args.csv) {
    const Eigen::MatrixXd gaps =
        filtfpca::efficiency_report(model, data, depths, std::min(depth_max, model.grid.size));
    std::string table = "depth,R,e_avg";
    for (const std::string& gid : model.group_order) table += ",e_" + gid;
    table += "\n";
    for (std::size_t k = 0; k < depths.size(); ++k) {
      table += std::to_string(depths[k]);
      table += "," + filtfpca::format_double(filtfpca::reconstruction_ratio(model, data,
                                                                            depths[k]));
      table += "," + filtfpca::format_double(gaps.col(static_cast<Eigen::Index>(k)).mean());
      for (Eigen::Index v = 0; v < gaps.rows(); ++v) {
        table += "," + filtfpca::format_double(gaps(v, static_cast<Eigen::Index>(k)));
      }
      table += "\n";
    }
    filtfpca::write_text_file(manifest.output(out / "evaluate.csv"), table);
  }

  manifest.write(out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"filt-fPCA: filtrated functional principal component analysis"};
  app.set_version_flag("--version", filtfpca::kVersion);
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate the synthetic 16-group study");
  simulate->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--T", sim.grid_size, "Grid points per trajectory")
      ->capture_default_str();
  simulate->add_option("--n-per-group", sim.n_per_group, "Trajectories per group")
      ->capture_default_str();
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();

  PreprocessArgs pre;
  CLI::App* preprocess =
      app.add_subcommand("preprocess", "Segment, filter and clean raw recordings");
  preprocess->add_option("--input", pre.input, "Raw CSV (channel_id,t_index,value)")
      ->required();
  preprocess->add_option("--fs", pre.sampling_rate, "Sampling rate in Hz")->required();
  preprocess->add_option("--epoch-len", pre.epoch_length, "Samples per epoch")
      ->capture_default_str();
  preprocess->add_option("--lowpass", pre.lowpass, "Low-pass cutoff in Hz")
      ->capture_default_str();
  preprocess->add_flag("--no-lowpass", pre.no_lowpass, "Skip the low-pass filter");
  preprocess->add_flag("--sqrt,!--no-sqrt", pre.sqrt_transform,
                       "Signed square-root transform (default on)");
  preprocess->add_flag("--outliers,!--no-outliers", pre.outlier_removal,
                       "IQR outlier removal (default on)");
  preprocess->add_flag("--drop-dc", pre.drop_dc, "Drop the mean (DC) bin in the filter");
  preprocess->add_option("--out", pre.out_dir, "Output directory")->required();

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a filt-fPCA model to a long CSV dataset");
  fit_cmd->add_option("--input", fit_args.input, "Dataset (group_id,epoch_id,t_index,value)")
      ->required();
  fit_cmd->add_option("--D", fit_args.dimension,
                      "Number of layers (default: smallest D explaining fraction p)");
  fit_cmd->add_option("--p", fit_args.p, "Variance fraction for selecting D")
      ->capture_default_str();
  fit_cmd->add_option("--a", fit_args.a, "Penalty scale");
  fit_cmd->add_option("--b", fit_args.b, "Penalty decay");
  fit_cmd->add_option("--u", fit_args.u, "Logistic schedule offset")->capture_default_str();
  fit_cmd->add_option("--schedule", fit_args.schedule, "power|geometric|logistic")
      ->capture_default_str();
  fit_cmd->add_flag("--grid", fit_args.use_grid,
                    "Select (a,b) over the candidate grid when --a/--b are absent");
  fit_cmd->add_option("--as", fit_args.grid_a, "Grid candidates for a")->delimiter(',');
  fit_cmd->add_option("--bs", fit_args.grid_b, "Grid candidates for b")->delimiter(',');
  fit_cmd->add_flag("--subtract-mean,!--no-subtract-mean", fit_args.subtract_mean,
                    "Center each group at its mean curve (default on)");
  fit_cmd->add_option("--gic-weights", fit_args.gic_weights,
                      "Weights in the layer criterion: residual|initial")
      ->capture_default_str();
  fit_cmd->add_option("--depth-max", fit_args.depth_max,
                      "Ordinary-fPCA depth for efficiency metrics")
      ->capture_default_str();
  fit_cmd->add_option("--out", fit_args.out_dir, "Output directory")->required();

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a fitted model on a dataset");
  evaluate->add_option("--model", eval_args.model_dir, "Model directory from 'fit'")
      ->required();
  evaluate->add_option("--data", eval_args.data_path, "Dataset long CSV")->required();
  evaluate->add_option("--depths", eval_args.depths, "Depths to report")->delimiter(',');
  evaluate->add_option("--depth-max", eval_args.depth_max,
                       "Ordinary-fPCA depth for efficiency metrics")
      ->capture_default_str();
  evaluate->add_flag("--csv", eval_args.csv, "Also write a per-depth CSV table");
  evaluate->add_option("--out", eval_args.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) return run_simulate(sim);
    if (preprocess->parsed()) return run_preprocess(pre);
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (evaluate->parsed()) return run_evaluate(eval_args);
    return kExitConfig;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  } catch (const filtfpca::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const filtfpca::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const filtfpca::DegenerateGroup& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const filtfpca::GridMismatch& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const filtfpca::LookupError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const filtfpca::IngestError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const filtfpca::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
