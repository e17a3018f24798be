#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gnnrisk/errors.hpp"
#include "gnnrisk/pipeline.hpp"
#include "gnnrisk/scoring.hpp"
#include "oracles.hpp"

using namespace gnnrisk;

TEST_CASE("normal centroid") {
    const Matrix h{{0, 0}, {2, 4}, {9, 9}};
    const std::vector<NodeIndex> one{2}, two{0, 1}, none{};
    CHECK(normal_centroid(h, one) == std::vector<double>{9, 9});
    CHECK(normal_centroid(h, two) == std::vector<double>{1, 2});
    const Matrix same{{1.5, -2}, {1.5, -2}, {1.5, -2}};
    CHECK(normal_centroid(same, std::vector<NodeIndex>{0, 1, 2}) == std::vector<double>{1.5, -2});
    CHECK_THROWS_AS(normal_centroid(h, none), CalibrationError);
}

TEST_CASE("anomaly score") {
    const std::vector<double> c{1, 1}, h{4, 5};
    CHECK(anomaly_score(c, c) == 0.0);
    CHECK(anomaly_score(h, c) == 5.0);
    CHECK(anomaly_score(c, h) == anomaly_score(h, c));
    CHECK(anomaly_score(h, c, Norm::l1) == 7.0);
    CHECK_THROWS_AS(anomaly_score(std::vector<double>{1, 2, 3}, c), ShapeError);
    CHECK(parse_norm("l1") == Norm::l1);
    CHECK_THROWS_AS(parse_norm("l3"), ConfigError);
}

TEST_CASE("scores are translation invariant") {
    SeededRng rng(5);
    const Matrix h = oracle::random_matrix(30, 4, rng);
    const std::vector<NodeIndex> rows{0, 3, 5, 7, 11};
    const auto base = score_nodes(h, normal_centroid(h, rows));
    Matrix shifted = h;
    const std::vector<double> t{3.0, -8.0, 0.5, 100.0};
    for (std::size_t i = 0; i < 30; ++i) {
        for (std::size_t c = 0; c < 4; ++c) shifted(i, c) += t[c];
    }
    const auto moved = score_nodes(shifted, normal_centroid(shifted, rows));
    for (std::size_t i = 0; i < 30; ++i) CHECK(moved[i] == doctest::Approx(base[i]).epsilon(1e-12));
    for (double s : base) CHECK(s >= 0.0);
}

TEST_CASE("quantile calibration") {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 1; i <= 100; ++i) {
        scores.push_back(i);
        labels.push_back(0);
    }
    scores.push_back(1000);
    labels.push_back(1);
    CHECK(calibrate_tau(scores, labels, {Calibration::Method::quantile, 0.95}) == 95.0);
    CHECK(calibrate_tau(scores, labels, {Calibration::Method::quantile, 1.0}) == 100.0);
    const double tau = calibrate_tau(scores, labels, {Calibration::Method::quantile, 1.0});
    for (std::size_t i = 0; i < 100; ++i) CHECK(!(scores[i] > tau));

    CHECK_THROWS_AS(calibrate_tau(std::vector<double>{1.0}, std::vector<int>{1}, {}), CalibrationError);
    CHECK_THROWS_AS(calibrate_tau(scores, labels, {Calibration::Method::quantile, 1.5}), ConfigError);
}

TEST_CASE("quantile calibration bounds the false positive rate") {
    SeededRng rng(19);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(300);
        std::vector<double> scores(n);
        std::vector<int> labels(n, 0);
        // coarse grid so ties are common
        for (double& s : scores) s = std::floor(rng.uniform(0, 20));
        const double q = rng.uniform(0.5, 1.0);
        const double tau = calibrate_tau(scores, labels, {Calibration::Method::quantile, q});
        const double fp = static_cast<double>(std::count_if(scores.begin(), scores.end(),
                                                            [&](double s) { return s > tau; }));
        CHECK(fp / double(n) <= 1.0 - q + 1.0 / double(n) + 1e-12);
    }
}

TEST_CASE("max-F1 calibration") {
    SUBCASE("separable scores give F1 of one") {
        const std::vector<double> s{0.1, 0.2, 0.3, 0.8, 0.9};
        const std::vector<int> y{0, 0, 0, 1, 1};
        const double tau = calibrate_tau(s, y, {Calibration::Method::max_f1});
        CHECK(tau == doctest::Approx(0.55));
    }
    SUBCASE("ties resolve toward the larger threshold") {
        // thresholds 0.5 and 3.5 both give F1 = 2/3
        const std::vector<double> s{0, 1, 2, 3, 4};
        const std::vector<int> y{0, 1, 0, 0, 1};
        const double tau = calibrate_tau(s, y, {Calibration::Method::max_f1});
        CHECK(tau == doctest::Approx(3.5));
    }
    SUBCASE("needs both classes") {
        CHECK_THROWS_AS(calibrate_tau(std::vector<double>{1, 2}, std::vector<int>{0, 0},
                                      {Calibration::Method::max_f1}),
                        CalibrationError);
    }
    CHECK(parse_calibration_method("max_f1") == Calibration::Method::max_f1);
    CHECK_THROWS_AS(parse_calibration_method("median"), ConfigError);
}

TEST_CASE("flagging") {
    const std::vector<double> s{0.1, 0.9, 0.5};
    const AnomalyReport r = flag_nodes(s, 0.5);
    CHECK(r.flagged == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(r.flagged_count() == 1);
    CHECK(flag_nodes(s, 1e300).flagged_count() == 0);
    CHECK_THROWS_AS(flag_nodes(s, std::numeric_limits<double>::infinity()), CalibrationError);
}

TEST_CASE("flags are monotone in tau on a 200-node instance") {
    SeededRng rng(200);
    std::vector<double> s(200);
    for (double& v : s) v = std::round(rng.uniform(0, 50)) / 4.0;
    std::vector<double> taus = s;
    taus.push_back(-1.0);
    taus.push_back(100.0);
    for (double& t : std::vector<double>(s)) taus.push_back(t + 0.125);
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    std::vector<std::uint8_t> prev = flag_nodes(s, taus.front()).flagged;
    for (std::size_t t = 1; t < taus.size(); ++t) {
        const auto cur = flag_nodes(s, taus[t]).flagged;
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(cur[i] <= prev[i]);
        prev = cur;
    }
}

TEST_CASE("dataset scoring calibrates on validation normals") {
    NodeTable t;
    t.features = Matrix(6, 1);
    t.labels = {Label::normal, Label::normal, Label::normal, Label::risk, Label::normal, Label::risk};
    t.splits = {Split::train, Split::train, Split::val, Split::val, Split::test, Split::test};
    const Matrix emb{{0.0}, {2.0}, {3.0}, {9.0}, {0.5}, {7.0}};
    const AnomalyReport r = score_dataset(emb, t, {});
    CHECK(r.centroid == std::vector<double>{1.0});
    CHECK(r.tau == 2.0);  // the single validation normal sits at distance 2
    CHECK(r.flagged == std::vector<std::uint8_t>{0, 0, 0, 1, 0, 1});
    const CalibrationCheck c = calibration_fpr(r, t);
    CHECK(c.split == Split::val);
    CHECK(c.normals == 1);
    CHECK(c.fpr == 0.0);

    const std::vector<double> prob{0.1, 0.2, 0.3, 0.4, 0.2, 0.9};
    const TestEvaluation e = evaluate_test(r, prob, t);
    CHECK(e.positives == 1);
    CHECK(e.negatives == 1);
    CHECK(e.distance.auc == 1.0);
    CHECK(e.classifier_auc == 1.0);

    const auto p = risk_probability(Matrix{{0, 0}, {-800, 800}, {3, 1}});
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 1.0);
    CHECK(p[2] == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
}
