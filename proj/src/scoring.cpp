#include "gnnrisk/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "gnnrisk/errors.hpp"
#include "gnnrisk/io.hpp"

namespace gnnrisk {

std::string Calibration::describe() const {
    return method == Method::quantile ? "quantile(" + format_double(q) + ")" : "max_f1";
}

Calibration::Method parse_calibration_method(const std::string& text) {
    if (text == "quantile") return Calibration::Method::quantile;
    if (text == "max_f1" || text == "max-f1") return Calibration::Method::max_f1;
    throw ConfigError("unknown tau method '" + text + "' (expected quantile or max_f1)");
}

Norm parse_norm(const std::string& text) {
    if (text == "l2") return Norm::l2;
    if (text == "l1") return Norm::l1;
    throw ConfigError("unknown norm '" + text + "' (expected l2 or l1)");
}

std::size_t AnomalyReport::flagged_count() const {
    return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), 1));
}

std::vector<double> normal_centroid(const Matrix& embeddings, std::span<const NodeIndex> rows) {
    if (rows.empty()) throw CalibrationError("normal centroid needs at least one normal node");
    std::vector<double> c(embeddings.cols(), 0.0);
    for (NodeIndex r : rows) {
        if (r >= embeddings.rows()) throw BoundsError("centroid row out of range");
        const auto h = embeddings.row(r);
        for (std::size_t k = 0; k < c.size(); ++k) c[k] += h[k];
    }
    for (double& v : c) v /= static_cast<double>(rows.size());
    return c;
}

double anomaly_score(std::span<const double> h, std::span<const double> centroid, Norm norm) {
    if (h.size() != centroid.size()) {
        throw ShapeError("anomaly_score: embedding dim " + std::to_string(h.size()) +
                         " vs centroid dim " + std::to_string(centroid.size()));
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double d = h[k] - centroid[k];
        acc += norm == Norm::l2 ? d * d : std::abs(d);
    }
    return norm == Norm::l2 ? std::sqrt(acc) : acc;
}

std::vector<double> score_nodes(const Matrix& embeddings, std::span<const double> centroid,
                                Norm norm) {
    std::vector<double> s(embeddings.rows());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = anomaly_score(embeddings.row(i), centroid, norm);
    return s;
}

double calibrate_tau(std::span<const double> scores, std::span<const int> labels,
                     const Calibration& calibration) {
    if (scores.size() != labels.size()) throw ShapeError("calibrate_tau: scores/labels length mismatch");
    std::vector<double> normal;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 0) normal.push_back(scores[i]);
        else if (labels[i] == 1) ++positives;
    }
    if (calibration.method == Calibration::Method::quantile) {
        if (!(calibration.q >= 0.0 && calibration.q <= 1.0)) {
            throw ConfigError("quantile q must lie in [0, 1]");
        }
        if (normal.empty()) throw CalibrationError("quantile calibration: no normal validation nodes");
        std::sort(normal.begin(), normal.end());
        const double rank = std::ceil(calibration.q * static_cast<double>(normal.size()));
        const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
        return normal[std::min(idx, normal.size() - 1)];
    }

    if (normal.empty() || positives == 0) {
        throw CalibrationError("max_f1 calibration needs both normal and risk validation nodes");
    }
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    // Sweep thresholds from high to low; at each midpoint the flagged set is
    // every score above it.
    double best_f1 = -1.0;
    double best_tau = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t k = 0;
    while (k < order.size()) {
        const double v = scores[order[k]];
        while (k < order.size() && scores[order[k]] == v) {
            const int y = labels[order[k]];
            if (y == 1) ++tp;
            else if (y == 0) ++fp;
            ++k;
        }
        if (k == order.size()) break;
        const double tau = 0.5 * (v + scores[order[k]]);
        const double precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
        const double recall = double(tp) / double(positives);
        const double f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    if (best_f1 < 0.0) throw CalibrationError("max_f1 calibration: all validation scores are identical");
    return best_tau;
}

AnomalyReport flag_nodes(std::span<const double> scores, double tau, std::vector<double> centroid,
                         Calibration calibration, Norm norm) {
    if (!std::isfinite(tau)) throw CalibrationError("threshold tau must be finite");
    AnomalyReport r;
    r.centroid = std::move(centroid);
    r.tau = tau;
    r.calibration = calibration;
    r.norm = norm;
    r.scores.assign(scores.begin(), scores.end());
    r.flagged.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) r.flagged[i] = scores[i] > tau ? 1 : 0;
    return r;
}

}  // namespace gnnrisk
