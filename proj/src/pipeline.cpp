#include "gnnrisk/pipeline.hpp"

#include <cmath>
#include <fstream>

#include "gnnrisk/errors.hpp"
#include "gnnrisk/training.hpp"

namespace gnnrisk {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing input file " + path.string());
    return in;
}

Split calibration_split(const NodeTable& table) {
    return table.nodes_in(Split::val, Label::normal).empty() ? Split::train : Split::val;
}

}  // namespace

LoadedData load_dataset(const std::filesystem::path& dir, bool directed) {
    LoadedData d;
    {
        auto in = open_input(dir / "nodes.csv");
        d.table = read_node_table(in);
    }
    auto in = open_input(dir / "edges.txt");
    d.graph = load_edge_list(in, d.table.num_nodes(), directed);
    d.table.validate(d.graph.num_nodes());
    return d;
}

ForwardTrace infer(const Graph& g, const NodeTable& table, const ModelParams& params) {
    SeededRng unused(0);
    ForwardOptions opts;
    opts.mode = Mode::eval;
    return model_forward(table.features, g, params, opts, unused);
}

std::vector<double> risk_probability(const Matrix& logits) {
    if (logits.cols() != 2) throw ShapeError("risk_probability: expected 2 logit columns");
    std::vector<double> p(logits.rows());
    for (std::size_t i = 0; i < p.size(); ++i) {
        // sigmoid of the logit gap, written to stay finite for large gaps
        const double d = logits(i, 1) - logits(i, 0);
        p[i] = d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
    }
    return p;
}

AnomalyReport score_dataset(const Matrix& embeddings, const NodeTable& table,
                            const Calibration& calibration, Norm norm) {
    const auto train_normals = table.nodes_in(Split::train, Label::normal);
    std::vector<double> centroid = normal_centroid(embeddings, train_normals);
    std::vector<double> scores = score_nodes(embeddings, centroid, norm);

    const std::vector<NodeIndex> rows = table.nodes_in(calibration_split(table));
    const std::vector<int> labels = class_indices(table);
    std::vector<double> cal_scores;
    std::vector<int> cal_labels;
    for (NodeIndex i : rows) {
        cal_scores.push_back(scores[i]);
        cal_labels.push_back(labels[i]);
    }
    const double tau = calibrate_tau(cal_scores, cal_labels, calibration);
    return flag_nodes(scores, tau, std::move(centroid), calibration, norm);
}

CalibrationCheck calibration_fpr(const AnomalyReport& report, const NodeTable& table) {
    CalibrationCheck c;
    c.split = calibration_split(table);
    std::size_t false_pos = 0;
    for (NodeIndex i : table.nodes_in(c.split, Label::normal)) {
        ++c.normals;
        false_pos += report.flagged[i] ? 1 : 0;
    }
    c.fpr = c.normals ? double(false_pos) / double(c.normals) : 0.0;
    return c;
}

TestEvaluation evaluate_test(const AnomalyReport& report, std::span<const double> risk_prob,
                             const NodeTable& table) {
    if (report.scores.size() != table.num_nodes() || risk_prob.size() != table.num_nodes()) {
        throw ShapeError("evaluate_test: score vectors do not match the node table");
    }
    const auto rows = table.nodes_in(Split::test);
    if (rows.empty()) throw MetricError("no labeled test nodes to evaluate");
    const std::vector<int> all = class_indices(table);
    std::vector<double> s, p;
    std::vector<std::uint8_t> f;
    std::vector<int> y;
    TestEvaluation t;
    for (NodeIndex i : rows) {
        s.push_back(report.scores[i]);
        p.push_back(risk_prob[i]);
        f.push_back(report.flagged[i]);
        y.push_back(all[i]);
        (all[i] == 1 ? t.positives : t.negatives) += 1;
    }
    t.distance = evaluate(s, f, y);
    t.classifier_auc = auc(p, y);
    return t;
}

}  // namespace gnnrisk
