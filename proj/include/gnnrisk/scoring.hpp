#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gnnrisk/graph.hpp"
#include "gnnrisk/numerics.hpp"

namespace gnnrisk {

enum class Norm { l2, l1 };

/// Threshold calibration rule.
struct Calibration {
    enum class Method { quantile, max_f1 };
    Method method = Method::quantile;
    /// Nearest-rank quantile of the normal calibration scores.
    double q = 0.95;

    std::string describe() const;
};

Calibration::Method parse_calibration_method(const std::string& text);
Norm parse_norm(const std::string& text);

/// Distance-based anomaly report: flagged exactly when score > tau.
struct AnomalyReport {
    std::vector<double> centroid;
    double tau = 0.0;
    Calibration calibration;
    Norm norm = Norm::l2;
    std::vector<double> scores;
    std::vector<std::uint8_t> flagged;

    std::size_t flagged_count() const;
};

/// Mean of the selected embedding rows. Throws CalibrationError when empty.
std::vector<double> normal_centroid(const Matrix& embeddings, std::span<const NodeIndex> rows);

/// ||h - c|| under the chosen norm.
double anomaly_score(std::span<const double> h, std::span<const double> centroid,
                     Norm norm = Norm::l2);

std::vector<double> score_nodes(const Matrix& embeddings, std::span<const double> centroid,
                                Norm norm = Norm::l2);

/// Chooses tau from labeled calibration scores (labels 0 normal, 1 risk).
///  quantile(q): the ceil(q * N)-th smallest normal score (nearest rank).
///  max_f1:      the midpoint between consecutive distinct scores with the
///               best F1; ties go to the larger threshold.
double calibrate_tau(std::span<const double> scores, std::span<const int> labels,
                     const Calibration& calibration);

/// Flags score > tau and assembles the report.
AnomalyReport flag_nodes(std::span<const double> scores, double tau,
                         std::vector<double> centroid = {}, Calibration calibration = {},
                         Norm norm = Norm::l2);

}  // namespace gnnrisk
