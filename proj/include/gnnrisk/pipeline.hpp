#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "gnnrisk/evaluation.hpp"
#include "gnnrisk/graph.hpp"
#include "gnnrisk/model.hpp"
#include "gnnrisk/scoring.hpp"

namespace gnnrisk {

/// Graph plus node table as stored on disk by `generate`.
struct LoadedData {
    Graph graph;
    NodeTable table;
};

/// Reads `nodes.csv` and `edges.txt` from `dir`.
LoadedData load_dataset(const std::filesystem::path& dir, bool directed);

/// Full-graph eval-mode forward pass.
ForwardTrace infer(const Graph& g, const NodeTable& table, const ModelParams& params);

/// Softmax probability of the risk class per row of 2-column logits.
std::vector<double> risk_probability(const Matrix& logits);

/// Centroid of the training normals, tau calibrated on the validation split
/// (falls back to the training split when validation has no normals), and
/// flags for every node.
AnomalyReport score_dataset(const Matrix& embeddings, const NodeTable& table,
                            const Calibration& calibration, Norm norm = Norm::l2);

/// False-positive rate of `report` on the normals it was calibrated on.
struct CalibrationCheck {
    double fpr = 0.0;
    std::size_t normals = 0;
    Split split = Split::val;
};
CalibrationCheck calibration_fpr(const AnomalyReport& report, const NodeTable& table);

/// Test-split evaluation of both scoring paths.
struct TestEvaluation {
    EvalReport distance;       // ROC/AUC of the distance score, metrics of its flags
    double classifier_auc = 0.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};
TestEvaluation evaluate_test(const AnomalyReport& report, std::span<const double> risk_prob,
                             const NodeTable& table);

}  // namespace gnnrisk
