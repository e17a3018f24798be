#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "gnnrisk/checkpoint.hpp"
#include "gnnrisk/cli.hpp"
#include "gnnrisk/errors.hpp"
#include "gnnrisk/evaluation.hpp"
#include "gnnrisk/pipeline.hpp"
#include "gnnrisk/scoring.hpp"
#include "gnnrisk/synthetic.hpp"
#include "gnnrisk/training.hpp"

namespace py = pybind11;
using namespace gnnrisk;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out;
}

Matrix from_numpy(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

std::vector<std::string> label_names(const NodeTable& t) {
    std::vector<std::string> out;
    for (Label l : t.labels) out.emplace_back(to_string(l));
    return out;
}

std::vector<std::string> split_names(const NodeTable& t) {
    std::vector<std::string> out;
    for (Split s : t.splits) out.emplace_back(to_string(s));
    return out;
}

// Undirected edges once each, as an (m, 2) index array.
py::array_t<std::int64_t> edge_array(const Graph& g) {
    std::vector<std::int64_t> flat;
    for (std::size_t u = 0; u < g.num_nodes(); ++u) {
        for (NodeIndex v : g.neighbors(u)) {
            if (g.directed() || u < v) {
                flat.push_back(static_cast<std::int64_t>(u));
                flat.push_back(static_cast<std::int64_t>(v));
            }
        }
    }
    py::array_t<std::int64_t> out({flat.size() / 2, std::size_t{2}});
    std::copy(flat.begin(), flat.end(), out.mutable_data());
    return out;
}

struct Model {
    ModelParams params;
    LossLog log;
};

py::dict report_dict(const AnomalyReport& r) {
    py::dict d;
    d["tau"] = r.tau;
    d["centroid"] = r.centroid;
    d["scores"] = r.scores;
    std::vector<bool> flags(r.flagged.begin(), r.flagged.end());
    d["flagged"] = flags;
    d["method"] = r.calibration.describe();
    return d;
}

}  // namespace

PYBIND11_MODULE(_gnnrisk, m) {
    m.doc() = "Graph neural network risk detection on transaction networks.";

    static py::exception<Error> base(m, "GnnriskError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const ShapeError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(base.ptr(), e.what());
        }
    });

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("num_nodes", &SynthConfig::num_nodes)
        .def_readwrite("target_edges", &SynthConfig::target_edges)
        .def_readwrite("anomaly_rate", &SynthConfig::anomaly_rate)
        .def_readwrite("mix", &SynthConfig::mix)
        .def_readwrite("feature_dim", &SynthConfig::feature_dim)
        .def_readwrite("signal_strength", &SynthConfig::signal_strength)
        .def_readwrite("seed", &SynthConfig::seed);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("num_nodes", [](const Dataset& d) { return d.graph.num_nodes(); })
        .def_property_readonly("num_edges", [](const Dataset& d) { return d.graph.num_edges(); })
        .def_property_readonly("edges", [](const Dataset& d) { return edge_array(d.graph); })
        .def_property_readonly("features", [](const Dataset& d) { return to_numpy(d.table.features); })
        .def_property_readonly("labels", [](const Dataset& d) { return label_names(d.table); })
        .def_property_readonly("splits", [](const Dataset& d) { return split_names(d.table); })
        .def_property_readonly("archetypes", [](const Dataset& d) {
            std::vector<std::string> out;
            for (Archetype a : d.archetypes) out.emplace_back(to_string(a));
            return out;
        })
        .def("degree", [](const Dataset& d, std::size_t i) { return d.graph.degree(i); });

    m.def("generate", &generate, py::arg("config") = SynthConfig{},
          "Synthetic network with planted ring, hub and bridge risk nodes.");
    m.def("load_dataset", [](const std::string& dir, bool directed) {
        LoadedData data = load_dataset(dir, directed);
        Dataset d;
        d.graph = std::move(data.graph);
        d.table = std::move(data.table);
        d.archetypes.assign(d.graph.num_nodes(), Archetype::none);
        return d;
    }, py::arg("directory"), py::arg("directed") = false);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("embed_size", &TrainConfig::embed_size)
        .def_readwrite("attention_heads", &TrainConfig::attention_heads)
        .def_readwrite("head_dim", &TrainConfig::head_dim)
        .def_readwrite("dropout", &TrainConfig::dropout)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batches_per_epoch", &TrainConfig::batches_per_epoch)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("gcn_layers", &TrainConfig::gcn_layers)
        .def_readwrite("attention_layers", &TrainConfig::attention_layers)
        .def_readwrite("self_loops", &TrainConfig::self_loops)
        .def_readwrite("class_weights", &TrainConfig::class_weights)
        .def_property("aggregation",
                      [](const TrainConfig& c) { return std::string(to_string(c.agg)); },
                      [](TrainConfig& c, const std::string& s) { c.agg = parse_aggregation(s); })
        .def("validate", &TrainConfig::validate);

    py::class_<Model>(m, "Model")
        .def_property_readonly("train_loss", [](const Model& md) { return md.log.train_loss; })
        .def_property_readonly("val_loss", [](const Model& md) { return md.log.val_loss; })
        .def_property_readonly("parameter_count", [](const Model& md) { return md.params.parameter_count(); })
        .def("embeddings", [](const Model& md, const Dataset& d) {
            return to_numpy(infer(d.graph, d.table, md.params).embeddings);
        })
        .def("logits", [](const Model& md, const Dataset& d) {
            return to_numpy(infer(d.graph, d.table, md.params).logits);
        })
        .def("risk_probability", [](const Model& md, const Dataset& d) {
            return risk_probability(infer(d.graph, d.table, md.params).logits);
        })
        .def("save", [](const Model& md, const std::string& path) { save_checkpoint(md.params, md.log, path); })
        .def("to_bytes", [](const Model& md) { return py::bytes(encode_checkpoint(md.params, md.log)); });

    m.def("fit", [](const Dataset& d, const TrainConfig& cfg, const EpochCallback& cb) {
        FitResult r;
        {
            py::gil_scoped_release release;
            r = fit(d.graph, d.table, cfg, cb ? EpochCallback([&](std::size_t e, double tl, double vl) {
                py::gil_scoped_acquire acquire;
                cb(e, tl, vl);
            }) : EpochCallback{});
        }
        return Model{std::move(r.params), std::move(r.log)};
    }, py::arg("dataset"), py::arg("config") = TrainConfig{}, py::arg("on_epoch") = EpochCallback{});

    m.def("load_model", [](const std::string& path) {
        Checkpoint c = load_checkpoint(path);
        return Model{std::move(c.params), std::move(c.log)};
    }, py::arg("path"));
    m.def("model_from_bytes", [](const py::bytes& b) {
        Checkpoint c = decode_checkpoint(std::string(b));
        return Model{std::move(c.params), std::move(c.log)};
    });

    m.def("score", [](const Array& embeddings, const Dataset& d, const std::string& method, double q,
                      const std::string& norm) {
        const Calibration cal{parse_calibration_method(method), q};
        return report_dict(score_dataset(from_numpy(embeddings), d.table, cal, parse_norm(norm)));
    }, py::arg("embeddings"), py::arg("dataset"), py::arg("method") = "quantile", py::arg("q") = 0.95,
          py::arg("norm") = "l2", "Distance to the normal centroid, with tau calibrated on validation normals.");

    m.def("auc", [](const std::vector<double>& s, const std::vector<int>& y) { return auc(s, y); },
          py::arg("scores"), py::arg("labels"));
    m.def("roc_curve", [](const std::vector<double>& s, const std::vector<int>& y) {
        std::vector<std::pair<double, double>> out;
        for (const RocPoint& p : roc_curve(s, y)) out.emplace_back(p.fpr, p.tpr);
        return out;
    }, py::arg("scores"), py::arg("labels"));
    m.def("classification_metrics", [](const std::vector<bool>& flags, const std::vector<int>& y) {
        const std::vector<std::uint8_t> f(flags.begin(), flags.end());
        const ClassificationMetrics c = classification_metrics(f, y);
        py::dict d;
        d["precision"] = c.precision;
        d["recall"] = c.recall;
        d["f1"] = c.f1;
        d["accuracy"] = c.accuracy;
        d["tp"] = c.confusion.tp;
        d["fp"] = c.confusion.fp;
        d["tn"] = c.confusion.tn;
        d["fn"] = c.confusion.fn;
        return d;
    }, py::arg("flags"), py::arg("labels"));

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
