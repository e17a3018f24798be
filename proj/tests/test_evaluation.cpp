#include <cmath>

#include "doctest.h"
#include "gnnrisk/errors.hpp"
#include "gnnrisk/evaluation.hpp"
#include "oracles.hpp"

using namespace gnnrisk;

namespace {

struct Instance {
    std::vector<double> scores;
    std::vector<int> labels;
};

// Random scores on a coarse grid, so ties across classes are frequent.
Instance random_instance(SeededRng& rng) {
    Instance in;
    const std::size_t n = 2 + rng.below(199);
    const double grid = static_cast<double>(1 + rng.below(20));
    for (std::size_t i = 0; i < n; ++i) {
        in.scores.push_back(std::floor(rng.uniform(0, grid)) / grid);
        in.labels.push_back(static_cast<int>(rng.below(2)));
    }
    in.labels[0] = 0;
    in.labels[1] = 1;
    return in;
}

}  // namespace

TEST_CASE("roc curve worked examples") {
    const std::vector<double> s{0.9, 0.4, 0.5, 0.1};
    const std::vector<int> y{1, 1, 0, 0};
    const auto roc = roc_curve(s, y);
    const std::vector<RocPoint> want{{0, 0}, {0, 0.5}, {0.5, 0.5}, {0.5, 1}, {1, 1}};
    CHECK(roc == want);
    CHECK(auc(s, y) == 0.75);

    const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> sy{0, 0, 1, 1};
    const auto sroc = roc_curve(sep, sy);
    CHECK(std::find(sroc.begin(), sroc.end(), RocPoint{0, 1}) != sroc.end());
    CHECK(auc(sep, sy) == 1.0);

    const std::vector<double> flat(5, 0.3);
    const std::vector<int> fy{0, 1, 0, 1, 1};
    const std::vector<RocPoint> two{{0, 0}, {1, 1}};
    CHECK(roc_curve(flat, fy) == two);
    CHECK(auc(flat, fy) == 0.5);

    CHECK_THROWS_AS(auc(flat, std::vector<int>(5, 1)), MetricError);
    CHECK_THROWS_AS(roc_curve(flat, std::vector<int>(5, 0)), MetricError);
    CHECK_THROWS_AS(auc(flat, std::vector<int>{0, 1}), ShapeError);
}

TEST_CASE("auc equals the pairwise statistic") {
    SeededRng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const Instance in = random_instance(rng);
        CHECK(std::abs(auc(in.scores, in.labels) - oracle::mann_whitney(in.scores, in.labels)) <= 1e-12);
    }
}

TEST_CASE("roc properties") {
    SeededRng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const Instance in = random_instance(rng);
        const auto roc = roc_curve(in.scores, in.labels);
        CHECK(roc.front() == RocPoint{0, 0});
        CHECK(roc.back() == RocPoint{1, 1});
        for (std::size_t i = 1; i < roc.size(); ++i) {
            CHECK(roc[i].fpr >= roc[i - 1].fpr);
            CHECK(roc[i].tpr >= roc[i - 1].tpr);
        }
        const double a = auc(in.scores, in.labels);
        CHECK((a >= 0.0 && a <= 1.0));
        CHECK(std::abs(polyline_area(roc) - a) <= 1e-12);

        // strictly increasing transforms leave the AUC alone
        std::vector<double> t1, t2;
        for (double s : in.scores) {
            t1.push_back(std::exp(3.0 * s) - 7.0);
            t2.push_back(std::atan(s * 5.0));
        }
        CHECK(auc(t1, in.labels) == a);
        CHECK(auc(t2, in.labels) == a);
    }
}

TEST_CASE("classification metrics worked examples") {
    // tp=3 fp=1 fn=2 tn=4
    const std::vector<std::uint8_t> flags{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
    const std::vector<int> labels{1, 1, 1, 0, 1, 1, 0, 0, 0, 0};
    const auto m = classification_metrics(flags, labels);
    CHECK(m.confusion.tp == 3);
    CHECK(m.confusion.fp == 1);
    CHECK(m.confusion.fn == 2);
    CHECK(m.confusion.tn == 4);
    CHECK(m.precision == 0.75);
    CHECK(m.recall == 0.6);
    CHECK(m.f1 == 2.0 * 0.75 * 0.6 / (0.75 + 0.6));
    CHECK(m.f1 == doctest::Approx(0.6667).epsilon(1e-4));
    CHECK(m.accuracy == 0.7);
    CHECK(m.notes.empty());

    const auto perfect = classification_metrics(std::vector<std::uint8_t>{1, 0, 1},
                                                std::vector<int>{1, 0, 1});
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.accuracy == 1.0);

    const auto silent = classification_metrics(std::vector<std::uint8_t>{0, 0, 0},
                                               std::vector<int>{1, 0, 0});
    CHECK(silent.precision == 0.0);
    CHECK(silent.recall == 0.0);
    CHECK(silent.f1 == 0.0);
    CHECK(!silent.notes.empty());

    CHECK_THROWS_AS(classification_metrics(std::vector<std::uint8_t>{0}, std::vector<int>{1, 0}),
                    ShapeError);
    CHECK_THROWS_AS(classification_metrics(std::vector<std::uint8_t>{0}, std::vector<int>{2}),
                    MetricError);
}

TEST_CASE("metrics agree with the confusion matrix") {
    SeededRng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(100);
        std::vector<std::uint8_t> f(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            f[i] = static_cast<std::uint8_t>(rng.below(2));
            y[i] = static_cast<int>(rng.below(2));
        }
        const auto m = classification_metrics(f, y);
        const auto& c = m.confusion;
        CHECK(c.tp + c.fp + c.tn + c.fn == n);
        CHECK(m.accuracy == double(c.tp + c.tn) / double(n));
        if (m.precision > 0 && m.recall > 0) {
            CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)));
        }
    }
}

TEST_CASE("evaluate bundles curve and metrics") {
    const std::vector<double> s{0.9, 0.4, 0.5, 0.1};
    const std::vector<int> y{1, 1, 0, 0};
    const std::vector<std::uint8_t> f{1, 0, 1, 0};
    const EvalReport r = evaluate(s, f, y);
    CHECK(r.auc == 0.75);
    CHECK(r.roc.size() == 5);
    CHECK(r.metrics.precision == 0.5);
}
