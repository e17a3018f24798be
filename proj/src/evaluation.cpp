#include "gnnrisk/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "gnnrisk/errors.hpp"

namespace gnnrisk {

namespace {

struct Counts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

Counts check_binary(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("metric inputs differ in length: " + std::to_string(scores.size()) +
                         " scores, " + std::to_string(labels.size()) + " labels");
    }
    Counts c;
    for (int y : labels) {
        if (y == 1) ++c.positives;
        else if (y == 0) ++c.negatives;
        else throw MetricError("labels must be 0 or 1, got " + std::to_string(y));
    }
    if (c.positives == 0 || c.negatives == 0) {
        throw MetricError("ROC/AUC needs both classes; got " + std::to_string(c.positives) +
                          " positives and " + std::to_string(c.negatives) + " negatives");
    }
    return c;
}

// Cumulative (fp, tp) after each block of equal scores, descending.
std::vector<std::pair<std::size_t, std::size_t>> sweep(std::span<const double> scores,
                                                       std::span<const int> labels) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    std::vector<std::pair<std::size_t, std::size_t>> steps{{0, 0}};
    std::size_t fp = 0;
    std::size_t tp = 0;
    std::size_t k = 0;
    while (k < order.size()) {
        const double v = scores[order[k]];
        while (k < order.size() && scores[order[k]] == v) {
            if (labels[order[k]] == 1) ++tp;
            else ++fp;
            ++k;
        }
        steps.emplace_back(fp, tp);
    }
    return steps;
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
    const Counts c = check_binary(scores, labels);
    std::vector<RocPoint> points;
    for (const auto& [fp, tp] : sweep(scores, labels)) {
        points.push_back({double(fp) / double(c.negatives), double(tp) / double(c.positives)});
    }
    return points;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    const Counts c = check_binary(scores, labels);
    const auto steps = sweep(scores, labels);
    // Twice the area in count units: sum of dFP * (TP_prev + TP_cur).
    unsigned long long twice_area = 0;
    for (std::size_t k = 1; k < steps.size(); ++k) {
        twice_area += static_cast<unsigned long long>(steps[k].first - steps[k - 1].first) *
                      (steps[k].second + steps[k - 1].second);
    }
    return static_cast<double>(twice_area) /
           (2.0 * static_cast<double>(c.positives) * static_cast<double>(c.negatives));
}

double polyline_area(std::span<const RocPoint> points) {
    double area = 0.0;
    for (std::size_t k = 1; k < points.size(); ++k) {
        area += (points[k].fpr - points[k - 1].fpr) * (points[k].tpr + points[k - 1].tpr) / 2.0;
    }
    return area;
}

ClassificationMetrics classification_metrics(std::span<const std::uint8_t> flags,
                                             std::span<const int> labels) {
    if (flags.size() != labels.size()) {
        throw ShapeError("classification_metrics: " + std::to_string(flags.size()) +
                         " predictions for " + std::to_string(labels.size()) + " labels");
    }
    ClassificationMetrics m;
    auto& c = m.confusion;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw MetricError("labels must be 0 or 1, got " + std::to_string(labels[i]));
        }
        const bool predicted = flags[i] != 0;
        const bool actual = labels[i] == 1;
        if (predicted && actual) ++c.tp;
        else if (predicted) ++c.fp;
        else if (actual) ++c.fn;
        else ++c.tn;
    }
    const auto ratio = [&](std::size_t num, std::size_t den, const char* name) {
        if (den == 0) {
            m.notes.push_back(std::string(name) + " undefined (zero denominator), reported as 0");
            return 0.0;
        }
        return double(num) / double(den);
    };
    m.precision = ratio(c.tp, c.tp + c.fp, "precision");
    m.recall = ratio(c.tp, c.tp + c.fn, "recall");
    m.accuracy = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn, "accuracy");
    if (m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.notes.push_back("f1 undefined (precision and recall are 0), reported as 0");
    }
    return m;
}

EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> flags,
                    std::span<const int> labels) {
    EvalReport r;
    r.roc = roc_curve(scores, labels);
    r.auc = auc(scores, labels);
    r.metrics = classification_metrics(flags, labels);
    return r;
}

}  // namespace gnnrisk
