#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "filtfpca/engine.hpp"
#include "filtfpca/export.hpp"
#include "filtfpca/ingest.hpp"
#include "filtfpca/simulate.hpp"
#include "filtfpca/version.hpp"

namespace py = pybind11;
using namespace filtfpca;

namespace {

using NamedGroups = std::vector<std::pair<std::string, Eigen::MatrixXd>>;

std::vector<FunctionGroup> to_groups(const NamedGroups& named) {
  if (named.empty()) throw ConfigError("empty dataset");
  std::vector<FunctionGroup> out;
  out.reserve(named.size());
  for (const auto& [id, rows] : named) {
    out.emplace_back(id, Grid(static_cast<int>(rows.cols())), rows);
  }
  return out;
}

FitConfig make_config(int dimension, double a, double b, const std::string& form, double u,
                      bool subtract_mean, const std::string& gic_weights) {
  FitConfig config;
  config.dimension = dimension;
  if (form == "power") {
    config.schedule.form = PenaltyForm::power;
  } else if (form == "geometric") {
    config.schedule.form = PenaltyForm::geometric;
  } else if (form == "logistic") {
    config.schedule.form = PenaltyForm::logistic;
  } else {
    throw ConfigError("unknown schedule form '" + form + "'");
  }
  config.schedule.a = a;
  config.schedule.b = b;
  config.schedule.u = u;
  config.subtract_mean = subtract_mean;
  if (gic_weights == "residual") {
    config.gic_weighting = GicWeighting::residual;
  } else if (gic_weights == "initial") {
    config.gic_weighting = GicWeighting::initial;
  } else {
    throw ConfigError("gic_weights must be 'residual' or 'initial'");
  }
  config.schedule.validate();
  return config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Filtrated functional principal component analysis";
  m.attr("__version__") = kVersion;

  py::register_exception<GridMismatch>(m, "GridMismatchError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DegenerateGroup>(m, "DegenerateGroupError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<LookupError>(m, "GroupLookupError", PyExc_KeyError);
  py::register_exception<ParseError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IngestError>(m, "IngestError", PyExc_ValueError);

  py::class_<FiltModel>(m, "Model")
      .def_property_readonly("dimension",
                             [](const FiltModel& model) { return model.config.dimension; })
      .def_property_readonly("group_order",
                             [](const FiltModel& model) { return model.group_order; })
      .def_property_readonly("grid_size",
                             [](const FiltModel& model) { return model.grid.size; })
      .def_property_readonly("thresholds",
                             [](const FiltModel& model) {
                               std::vector<double> taus;
                               for (const CommunityLayer& layer : model.tree.layers) {
                                 taus.push_back(layer.threshold);
                               }
                               return taus;
                             })
      .def_property_readonly("assignments",
                             [](const FiltModel& model) {
                               std::vector<std::vector<int>> out;
                               for (const CommunityLayer& layer : model.tree.layers) {
                                 out.push_back(layer.partition.assignment);
                               }
                               return out;
                             })
      .def_property_readonly("cardinalities",
                             [](const FiltModel& model) {
                               std::vector<int> out;
                               for (const CommunityLayer& layer : model.tree.layers) {
                                 out.push_back(layer.partition.cardinality);
                               }
                               return out;
                             })
      .def_property_readonly("weight_matrix",
                             [](const FiltModel& model) { return model.weights.values; })
      .def_property_readonly(
          "components",
          [](const FiltModel& model) {
            py::list out;
            for (const FiltComponent& comp : model.components) {
              py::dict entry;
              entry["layer"] = comp.layer;
              entry["community"] = comp.community;
              py::list members;
              for (int v : comp.members) members.append(model.group_order[v]);
              entry["members"] = members;
              entry["values"] = comp.function.values;
              out.append(entry);
            }
            return out;
          })
      .def(
          "depth",
          [](const FiltModel& model, const std::string& group) {
            return model.depth(model.group_index(group));
          },
          py::arg("group"))
      .def(
          "scores",
          [](const FiltModel& model, const std::string& group) {
            return model.scores[model.group_index(group)];
          },
          py::arg("group"))
      .def(
          "mean",
          [](const FiltModel& model, const std::string& group) {
            return model.means[model.group_index(group)].values;
          },
          py::arg("group"))
      .def(
          "component",
          [](const FiltModel& model, const std::string& group, int layer) {
            const FiltComponent* comp = model.component_for(model.group_index(group), layer);
            if (!comp) throw LookupError("no component at that layer for the group");
            return comp->function.values;
          },
          py::arg("group"), py::arg("layer"))
      .def(
          "reconstruct",
          [](const FiltModel& model, const std::string& group, int n, int depth) {
            return reconstruct(model, group, n, depth).values;
          },
          py::arg("group"), py::arg("n"), py::arg("depth"))
      .def(
          "reconstruction_ratio",
          [](const FiltModel& model, const NamedGroups& data, int depth) {
            return reconstruction_ratio(model, to_groups(data), depth);
          },
          py::arg("data"), py::arg("depth"))
      .def(
          "efficiency_gap",
          [](const FiltModel& model, const NamedGroups& data, int depth, int depth_max) {
            return efficiency_gap(model, to_groups(data), depth, depth_max);
          },
          py::arg("data"), py::arg("depth"), py::arg("depth_max") = 25)
      .def("save", &save_model, py::arg("directory"));

  m.def("load_model", &load_model, py::arg("directory"));

  m.def(
      "fit",
      [](const NamedGroups& data, int dimension, double a, double b, const std::string& form,
         double u, bool subtract_mean, const std::string& gic_weights) {
        return fit(to_groups(data),
                   make_config(dimension, a, b, form, u, subtract_mean, gic_weights));
      },
      py::arg("data"), py::arg("dimension"), py::arg("a") = 0.1, py::arg("b") = 1.2,
      py::arg("form") = "power", py::arg("u") = 0.0, py::arg("subtract_mean") = true,
      py::arg("gic_weights") = "residual");

  m.def(
      "ordinary_fpca",
      [](const Eigen::MatrixXd& trajectories, int count, bool subtract_mean) {
        const FunctionGroup group("g", Grid(static_cast<int>(trajectories.cols())),
                                  trajectories);
        const std::vector<EigenPair> pairs = ordinary_fpca(group, count, subtract_mean);
        Eigen::VectorXd values(pairs.size());
        Eigen::MatrixXd functions(trajectories.cols(), pairs.size());
        for (std::size_t j = 0; j < pairs.size(); ++j) {
          values[static_cast<Eigen::Index>(j)] = pairs[j].value;
          functions.col(static_cast<Eigen::Index>(j)) = pairs[j].function.values;
        }
        return py::make_tuple(values, functions);
      },
      py::arg("trajectories"), py::arg("count"), py::arg("subtract_mean") = true);

  m.def(
      "select_dimension",
      [](const NamedGroups& data, double p, bool subtract_mean) {
        return select_dimension(to_groups(data), p, subtract_mean);
      },
      py::arg("data"), py::arg("p") = 0.9, py::arg("subtract_mean") = true);

  m.def(
      "select_penalty",
      [](const NamedGroups& data, const std::vector<std::pair<double, double>>& candidates,
         int dimension, bool subtract_mean) {
        const PenaltySelection sel =
            select_penalty(to_groups(data), candidates, dimension, subtract_mean);
        py::dict out;
        out["a"] = sel.a;
        out["b"] = sel.b;
        out["admissible"] = sel.admissible;
        py::list table;
        for (const PenaltyCandidate& cand : sel.table) {
          py::dict row;
          row["a"] = cand.a;
          row["b"] = cand.b;
          row["admissible"] = cand.admissible;
          row["min_ev_ratio"] = cand.min_ev_ratio;
          row["total_cardinality"] = cand.total_cardinality;
          row["distinct_components"] = cand.distinct_components;
          row["R"] = cand.ratio;
          table.append(row);
        }
        out["table"] = table;
        return out;
      },
      py::arg("data"), py::arg("candidates"), py::arg("dimension"),
      py::arg("subtract_mean") = true);

  m.def(
      "weight_matrix",
      [](const NamedGroups& data, bool subtract_mean) {
        const std::vector<FunctionGroup> groups = to_groups(data);
        std::vector<CovKernel> kernels;
        std::vector<std::string> labels;
        for (const FunctionGroup& g : groups) {
          kernels.push_back(covariance_kernel(g, subtract_mean));
          labels.push_back(g.id);
        }
        return build_weight_matrix(kernels, labels).values;
      },
      py::arg("data"), py::arg("subtract_mean") = true);

  m.def(
      "simulate",
      [](std::uint64_t seed, int grid_size, int n_per_group) {
        SimConfig config;
        config.seed = seed;
        config.grid_size = grid_size;
        config.n_per_group = n_per_group;
        const SimDataset data = generate_dataset(config);
        py::list groups;
        for (std::size_t v = 0; v < data.groups.size(); ++v) {
          groups.append(py::make_tuple(data.groups[v].id, data.groups[v].trajectories));
        }
        Eigen::MatrixXd bases(grid_size, static_cast<Eigen::Index>(data.bases.size()));
        for (std::size_t j = 0; j < data.bases.size(); ++j) {
          bases.col(static_cast<Eigen::Index>(j)) = data.bases[j].values;
        }
        py::dict out;
        out["groups"] = groups;
        out["bases"] = bases;
        py::list scores;
        for (const Eigen::MatrixXd& s : data.true_scores) scores.append(s);
        out["true_scores"] = scores;
        return out;
      },
      py::arg("seed") = 1, py::arg("grid_size") = 100, py::arg("n_per_group") = 500);

  m.def(
      "segment_epochs",
      [](const Eigen::VectorXd& samples, int epoch_length) {
        RawRecording rec;
        rec.channel_id = "ch";
        rec.samples = samples;
        rec.sampling_rate = 1.0;
        return segment_epochs(rec, epoch_length).trajectories;
      },
      py::arg("samples"), py::arg("epoch_length"));

  m.def(
      "lowpass_filter",
      [](const Eigen::VectorXd& values, double cutoff_hz, double sampling_rate, bool drop_dc) {
        const Grid grid(static_cast<int>(values.size()));
        return lowpass_filter(GridFunction(grid, values), cutoff_hz, sampling_rate, drop_dc)
            .values;
      },
      py::arg("values"), py::arg("cutoff_hz"), py::arg("sampling_rate"),
      py::arg("drop_dc") = false);

  m.def(
      "signed_sqrt",
      [](const Eigen::VectorXd& values) {
        const Grid grid(static_cast<int>(values.size()));
        return signed_sqrt_transform(GridFunction(grid, values)).values;
      },
      py::arg("values"));

  m.def(
      "remove_outliers",
      [](const Eigen::MatrixXd& epochs) {
        const FunctionGroup group("g", Grid(static_cast<int>(epochs.cols())), epochs);
        const auto [kept, removed] = remove_outliers(group);
        return py::make_tuple(kept.trajectories, removed);
      },
      py::arg("epochs"));

  m.def(
      "write_long_csv",
      [](const NamedGroups& data, const std::string& path) {
        write_long_csv(to_groups(data), path);
      },
      py::arg("data"), py::arg("path"));

  m.def(
      "load_long_csv",
      [](const std::string& path) {
        py::list out;
        for (const FunctionGroup& g : load_long_csv(path)) {
          out.append(py::make_tuple(g.id, g.trajectories));
        }
        return out;
      },
      py::arg("path"));
}
