#include <cmath>
#include <limits>

#include "doctest.h"
#include "gnnrisk/errors.hpp"
#include "gnnrisk/numerics.hpp"
#include "oracles.hpp"

using namespace gnnrisk;

TEST_CASE("matrix rejects non-finite data") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Matrix(1, 2, std::vector<double>{1.0, nan}), NumericError);
    CHECK_THROWS_AS(Matrix(2, 2, std::numeric_limits<double>::infinity()), NumericError);
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0}), ShapeError);
    CHECK_THROWS_AS((Matrix{{1.0, 2.0}, {3.0}}), ShapeError);
}

TEST_CASE("rng stream is the standard mt19937_64") {
    // 10000th output of the default-seeded engine, fixed by the C++ standard
    SeededRng rng(5489);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = rng.next_u64();
    CHECK(v == 9981545732273789042ULL);

    SeededRng a(7), b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    CHECK(SeededRng(7).derive(1).next_u64() != SeededRng(7).derive(2).next_u64());
    SeededRng r(3);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK((u >= 0.0 && u < 1.0));
        CHECK(r.below(5) < 5);
    }
    CHECK_THROWS_AS(r.below(0), ConfigError);
}

TEST_CASE("matmul worked examples") {
    const Matrix a{{1, 2}, {3, 4}};
    CHECK(matmul(Matrix::identity(2), a) == a);
    CHECK(matmul(a, Matrix{{5, 6}, {7, 8}}) == Matrix{{19, 22}, {43, 50}});
    CHECK(matmul(Matrix(2, 2), a) == Matrix(2, 2));
}

TEST_CASE("matmul shape error names both shapes") {
    try {
        matmul(Matrix(2, 3), Matrix(2, 3));
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("2x3", msg.find("2x3") + 1) != std::string::npos);
    }
    CHECK_THROWS_AS(matmul_nt(Matrix(2, 3), Matrix(2, 4)), ShapeError);
    CHECK_THROWS_AS(matmul_tn(Matrix(2, 3), Matrix(3, 4)), ShapeError);
}

TEST_CASE("blocked products equal the naive ascending sum bit for bit") {
    SeededRng rng(11);
    // sizes straddle the kernel's register and cache block edges
    for (auto [n, k, m] : {std::tuple{1, 1, 1}, {5, 3, 9}, {67, 300, 13}, {130, 257, 33}}) {
        const Matrix a = oracle::random_matrix(n, k, rng);
        const Matrix b = oracle::random_matrix(k, m, rng);
        const Matrix ref = oracle::naive_matmul(a, b);
        CHECK(oracle::bitwise_equal(matmul(a, b).values(), ref.values()));
        CHECK(oracle::bitwise_equal(matmul_nt(a, b.transposed()).values(), ref.values()));
        CHECK(oracle::bitwise_equal(matmul_tn(a.transposed(), b).values(), ref.values()));
    }
}

TEST_CASE("matmul_tn skips zero rows without changing the result") {
    SeededRng rng(4);
    Matrix a = oracle::random_matrix(40, 7, rng);
    for (std::size_t r = 0; r < 40; r += 3) a.row(r)[0] = 0.0;
    for (std::size_t r = 0; r < 40; r += 2) std::fill(a.row(r).begin(), a.row(r).end(), 0.0);
    const Matrix b = oracle::random_matrix(40, 5, rng);
    CHECK(oracle::bitwise_equal(matmul_tn(a, b).values(),
                                oracle::naive_matmul(a.transposed(), b).values()));
}

TEST_CASE("matmul is associative on random matrices") {
    SeededRng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(6), k = 1 + rng.below(6), m = 1 + rng.below(6),
                          p = 1 + rng.below(6);
        const Matrix a = oracle::random_matrix(n, k, rng), b = oracle::random_matrix(k, m, rng),
                     c = oracle::random_matrix(m, p, rng);
        const Matrix left = matmul(matmul(a, b), c), right = matmul(a, matmul(b, c));
        double scale = 0.0;
        for (double v : right.values()) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < left.size(); ++i) {
            CHECK(std::abs(left.values()[i] - right.values()[i]) <= 1e-10 * std::max(scale, 1.0));
        }
    }
}

TEST_CASE("row softmax") {
    const Matrix s = row_softmax(Matrix{{0, 0, 0}, {0, std::log(3.0), 0}});
    for (int c = 0; c < 3; ++c) CHECK(s(0, c) == doctest::Approx(1.0 / 3).epsilon(1e-15));

    const Matrix two = row_softmax(Matrix{{0, std::log(3.0)}});
    CHECK(two(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(two(0, 1) == doctest::Approx(0.75).epsilon(1e-15));

    SUBCASE("shift invariance and normalization") {
        SeededRng rng(8);
        for (int t = 0; t < 100; ++t) {
            Matrix x = oracle::random_matrix(3, 6, rng, -30, 30);
            Matrix shifted = x;
            const double c = rng.uniform(-500, 500);
            for (double& v : shifted.values()) v += c;
            const Matrix a = row_softmax(x), b = row_softmax(shifted);
            for (std::size_t r = 0; r < 3; ++r) {
                double sum = 0.0;
                for (std::size_t j = 0; j < 6; ++j) {
                    CHECK(a(r, j) == doctest::Approx(b(r, j)).epsilon(1e-9));
                    CHECK((a(r, j) > 0.0 && a(r, j) <= 1.0));
                    sum += a(r, j);
                }
                CHECK(std::abs(sum - 1.0) <= 1e-12);
            }
        }
    }

    SUBCASE("masked entries are exactly zero") {
        const std::vector<std::uint8_t> mask{1, 0, 1, 0, 0, 1};
        const Matrix m = row_softmax(Matrix{{1, 50, 1}, {7, 7, 2}}, &mask);
        CHECK(m(0, 1) == 0.0);
        CHECK(m(0, 0) == doctest::Approx(0.5));
        CHECK(m(1, 0) == 0.0);
        CHECK(m(1, 2) == 1.0);
    }

    SUBCASE("fully masked row is an error") {
        const std::vector<std::uint8_t> mask{1, 1, 0, 0};
        CHECK_THROWS_AS(row_softmax(Matrix{{1, 2}, {3, 4}}, &mask), NumericError);
    }

    SUBCASE("huge logits do not overflow") {
        const Matrix m = row_softmax(Matrix{{1000, 1000}});
        CHECK(m(0, 0) == 0.5);
    }
}

TEST_CASE("activations") {
    CHECK(activation(Matrix{{-1, 0, 2}}, Activation::relu) == Matrix{{0, 0, 2}});
    const Matrix x{{-3.5, 0.25}};
    CHECK(activation(x, Activation::identity) == x);
    CHECK(activation_backward(Matrix{{-1, 2}}, Matrix{{5, 7}}, Activation::relu) == Matrix{{0, 7}});
    // relu'(0) = 0
    CHECK(activation_backward(Matrix{{0.0}}, Matrix{{3.0}}, Activation::relu) == Matrix{{0.0}});
    CHECK(activation_backward(Matrix{{-1, 2}}, Matrix{{5, 7}}, Activation::identity) == Matrix{{5, 7}});
    CHECK_THROWS_AS(activation_backward(Matrix(1, 2), Matrix(2, 1), Activation::relu), ShapeError);
}

TEST_CASE("dropout") {
    SeededRng rng(1);
    const Matrix x = oracle::random_matrix(10, 10, rng);
    CHECK(dropout(x, 0.0, Mode::train, rng).output == x);
    CHECK(dropout(x, 0.0, Mode::train, rng).mask.empty());
    CHECK(dropout(x, 0.7, Mode::eval, rng).output == x);
    CHECK_THROWS_AS(dropout(x, 1.0, Mode::train, rng), ConfigError);
    CHECK_THROWS_AS(dropout(x, -0.1, Mode::train, rng), ConfigError);

    SUBCASE("expectation is preserved") {
        const std::size_t n = 100000;
        const double rate = 0.2;
        SeededRng r(99);
        const DropoutResult d = dropout(Matrix(1, n, 1.0), rate, Mode::train, r);
        double mean = 0.0;
        for (double v : d.output.values()) mean += v;
        mean /= static_cast<double>(n);
        // each sample is 1/(1-p) with prob 1-p, else 0
        const double sigma = std::sqrt(rate / (1.0 - rate) / static_cast<double>(n));
        CHECK(std::abs(mean - 1.0) <= 3.0 * sigma);
        for (double v : d.output.values()) CHECK((v == 0.0 || v == 1.0 / (1.0 - rate)));
    }

    SUBCASE("zero pattern reproducible per seed") {
        SeededRng r1(5), r2(5), r3(6);
        const auto a = dropout(x, 0.5, Mode::train, r1), b = dropout(x, 0.5, Mode::train, r2),
                   c = dropout(x, 0.5, Mode::train, r3);
        CHECK(a.mask == b.mask);
        CHECK(a.output == b.output);
        CHECK(a.mask != c.mask);
    }
}

TEST_CASE("finite difference oracle") {
    auto square = [](std::span<const double> t) { return t[0] * t[0]; };
    CHECK(std::abs(finite_diff_grad(square, {3.0})[0] - 6.0) <= 1e-8);

    auto constant = [](std::span<const double>) { return 4.2; };
    for (double g : finite_diff_grad(constant, {1.0, -2.0, 5.0})) CHECK(g == 0.0);

    auto sum = [](std::span<const double> t) {
        double s = 0.0;
        for (double v : t) s += v;
        return s;
    };
    for (double g : finite_diff_grad(sum, {0.3, -1.0, 8.0, 2.5})) CHECK(g == doctest::Approx(1.0).epsilon(1e-9));

    auto blowup = [](std::span<const double> t) { return 1.0 / (t[0] - 1e-5); };
    CHECK_THROWS_AS(finite_diff_grad(blowup, {0.0}), NumericError);
    CHECK_THROWS_AS(finite_diff_grad(square, {1.0}, 0.0), ConfigError);
}

TEST_CASE("require_finite names the matrix") {
    try {
        Matrix m(1, 1);
        m(0, 0) = std::numeric_limits<double>::infinity();
        require_finite(m, "logits");
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("logits") != std::string::npos);
    }
}
