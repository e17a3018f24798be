#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gnnrisk {

/// Dense row-major matrix of doubles. Entries are required to be finite;
/// construction from external data rejects NaN and infinities.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    std::string shape_string() const;
    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const noexcept;

    void fill(double value) noexcept;
    Matrix transposed() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Deterministic random source: the 64-bit Mersenne Twister, whose output
/// sequence is fixed by the C++ standard, with distribution transforms
/// implemented here rather than taken from <random> (those are
/// implementation-defined).
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Independent stream for a named purpose, derived via splitmix64.
    SeededRng derive(std::uint64_t stream) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller (one value per call).
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// ---------------------------------------------------------------------------
// Kernels. Summation over the inner dimension always runs left to right,
// so results are bit-reproducible.

/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b. All-zero rows of `a` are skipped, which does not change the result.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// Row-wise softmax. When `mask` is given (same shape as logits, nonzero =
/// valid), masked entries come out as exactly 0.
Matrix row_softmax(const Matrix& logits, const std::vector<std::uint8_t>* mask = nullptr);

/// In-place softmax of a single row with max subtraction.
void softmax_inplace(std::span<double> values);

enum class Activation { relu, identity };

Matrix activation(const Matrix& x, Activation kind);
/// Upstream gradient masked by the activation derivative at `pre`.
/// relu'(0) is taken to be 0.
Matrix activation_backward(const Matrix& pre, const Matrix& upstream, Activation kind);

enum class Mode { train, eval };

struct DropoutResult {
    Matrix output;
    /// Per-entry multiplier: 0 for dropped entries, 1/(1-rate) for kept ones.
    /// Empty when dropout was a no-op.
    Matrix mask;
};

/// Inverted dropout. Eval mode and rate 0 are the identity.
DropoutResult dropout(const Matrix& x, double rate, Mode mode, SeededRng& rng);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient (f(t + h e_i) - f(t - h e_i)) / 2h.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::vector<double> theta,
                                     double h = 1e-5);

/// Throws NumericError naming `what` if any entry is not finite.
void require_finite(const Matrix& m, const std::string& what);

}  // namespace gnnrisk
