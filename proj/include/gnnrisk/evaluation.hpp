#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gnnrisk {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
};

struct ClassificationMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    Confusion confusion;
    /// Set when a ratio had a zero denominator and was reported as 0.
    std::vector<std::string> notes;
};

struct EvalReport {
    std::vector<RocPoint> roc;
    double auc = 0.0;
    ClassificationMetrics metrics;
};

/// ROC curve from (0,0) to (1,1), one point per distinct score; tied scores
/// move together. Labels are 0/1. Throws MetricError when a class is absent.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under the ROC curve. Computed from integer counts, so it
/// equals the Mann-Whitney statistic with half credit for ties.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Area of an ROC polyline by the trapezoid rule.
double polyline_area(std::span<const RocPoint> points);

ClassificationMetrics classification_metrics(std::span<const std::uint8_t> flags,
                                             std::span<const int> labels);

EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> flags,
                    std::span<const int> labels);

}  // namespace gnnrisk
