#include "gnnrisk/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "gnnrisk/errors.hpp"

namespace gnnrisk {

namespace {

void check_entries(std::span<const double> values, const char* where) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite entry in ") + where);
        }
    }
}

#ifndef NDEBUG
void debug_check(const Matrix& m, const char* where) { check_entries(m.values(), where); }
#else
void debug_check(const Matrix&, const char*) {}
#endif

typedef double v4d __attribute__((vector_size(32)));

constexpr std::size_t kMr = 4;    // rows per micro tile
constexpr std::size_t kNr = 8;    // columns per micro tile
constexpr std::size_t kKc = 256;  // depth of a packed panel
constexpr std::size_t kMc = 64;   // rows of A packed at once

// acc (4 x 8) += Ap (kc x 4, packed) * Bp (kc x 8, packed), p ascending.
void micro_kernel(const double* ap, const double* bp, std::size_t kc, double* acc) {
    v4d c[kMr][2];
    for (std::size_t r = 0; r < kMr; ++r) {
        std::memcpy(&c[r][0], acc + r * kNr, sizeof(v4d));
        std::memcpy(&c[r][1], acc + r * kNr + 4, sizeof(v4d));
    }
    for (std::size_t p = 0; p < kc; ++p) {
        v4d b0, b1;
        std::memcpy(&b0, bp + p * kNr, sizeof(v4d));
        std::memcpy(&b1, bp + p * kNr + 4, sizeof(v4d));
        for (std::size_t r = 0; r < kMr; ++r) {
            const double av = ap[p * kMr + r];
            const v4d a = {av, av, av, av};
            c[r][0] += a * b0;
            c[r][1] += a * b1;
        }
    }
    for (std::size_t r = 0; r < kMr; ++r) {
        std::memcpy(acc + r * kNr, &c[r][0], sizeof(v4d));
        std::memcpy(acc + r * kNr + 4, &c[r][1], sizeof(v4d));
    }
}

// C (n x m) = A (n x k) * B (k x m) through accessors, so callers can
// transpose or gather rows without copying. Each output is accumulated over
// p in ascending order and blocks resume from the stored partial sum, so
// every element rounds as a plain left-to-right dot product would.
template <class AAt, class BRow, class CRow>
void gemm(std::size_t n, std::size_t k, std::size_t m, AAt a_at, BRow b_row, CRow c_row) {
    if (n == 0 || m == 0) return;
    const std::size_t strips = (m + kNr - 1) / kNr;
    std::vector<double> bp(strips * kKc * kNr);
    std::vector<double> ap(kMc * kKc);
    double acc[kMr * kNr];
    for (std::size_t r = 0; r < n; ++r) std::fill(c_row(r), c_row(r) + m, 0.0);
    for (std::size_t pc = 0; pc < k; pc += kKc) {
        const std::size_t kc = std::min(kKc, k - pc);
        for (std::size_t p = 0; p < kc; ++p) {
            const double* brow = b_row(pc + p);
            for (std::size_t s = 0; s < strips; ++s) {
                double* dst = bp.data() + (s * kc + p) * kNr;
                const std::size_t j0 = s * kNr;
                const std::size_t w = std::min(kNr, m - j0);
                std::memcpy(dst, brow + j0, w * sizeof(double));
                std::fill(dst + w, dst + kNr, 0.0);
            }
        }
        for (std::size_t ic = 0; ic < n; ic += kMc) {
            const std::size_t mc = std::min(kMc, n - ic);
            const std::size_t blocks = (mc + kMr - 1) / kMr;
            for (std::size_t b = 0; b < blocks; ++b) {
                double* dst = ap.data() + b * kc * kMr;
                for (std::size_t r = 0; r < kMr; ++r) {
                    const std::size_t i = ic + b * kMr + r;
                    if (i < n) {
                        for (std::size_t p = 0; p < kc; ++p) dst[p * kMr + r] = a_at(i, pc + p);
                    } else {
                        for (std::size_t p = 0; p < kc; ++p) dst[p * kMr + r] = 0.0;
                    }
                }
            }
            for (std::size_t s = 0; s < strips; ++s) {
                const std::size_t j0 = s * kNr;
                const std::size_t w = std::min(kNr, m - j0);
                for (std::size_t b = 0; b < blocks; ++b) {
                    const std::size_t i0 = ic + b * kMr;
                    const std::size_t h = std::min(kMr, n - i0);
                    std::fill(acc, acc + kMr * kNr, 0.0);
                    for (std::size_t r = 0; r < h; ++r) {
                        std::memcpy(acc + r * kNr, c_row(i0 + r) + j0, w * sizeof(double));
                    }
                    micro_kernel(ap.data() + b * kc * kMr, bp.data() + s * kc * kNr, kc, acc);
                    for (std::size_t r = 0; r < h; ++r) {
                        std::memcpy(c_row(i0 + r) + j0, acc + r * kNr, w * sizeof(double));
                    }
                }
            }
        }
    }
}

bool row_is_zero(const Matrix& a, std::size_t r) {
    for (double v : a.row(r)) {
        if (v != 0.0) return false;
    }
    return true;
}

std::vector<std::size_t> nonzero_rows(const Matrix& a) {
    std::vector<std::size_t> out;
    out.reserve(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        if (!row_is_zero(a, r)) out.push_back(r);
    }
    return out;
}

// Product with zero rows of `a` skipped: zero rows of the result are exact
// zeros either way.
Matrix sparse_rows_product(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    const auto rows = nonzero_rows(a);
    if (rows.empty() || b.cols() == 0) return out;
    const std::size_t k = a.cols();
    const std::size_t m = b.cols();
    const double* ad = a.data();
    const double* bd = b.data();
    double* cd = out.data();
    gemm(rows.size(), k, m,
         [&](std::size_t i, std::size_t p) { return ad[rows[i] * k + p]; },
         [&](std::size_t p) { return bd + p * m; },
         [&](std::size_t i) { return cd + rows[i] * m; });
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw NumericError("non-finite fill value for Matrix");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        std::ostringstream os;
        os << "matrix data length " << data_.size() << " does not match shape " << rows << "x"
           << cols;
        throw ShapeError(os.str());
    }
    check_entries(data_, "Matrix construction");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ragged initializer for Matrix");
        data_.insert(data_.end(), r.begin(), r.end());
    }
    check_entries(data_, "Matrix construction");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Matrix::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    }
    return t;
}

// ---------------------------------------------------------------------------
// SeededRng

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

SeededRng SeededRng::derive(std::uint64_t stream) const {
    return SeededRng(splitmix64(seed_ ^ splitmix64(stream + 0x6A09E667F3BCC909ULL)));
}

double SeededRng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::below(std::uint64_t n) {
    if (n == 0) throw ConfigError("SeededRng::below requires n > 0");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double SeededRng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Kernels

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch: " + a.shape_string() + " * " +
                         b.shape_string());
    }
    Matrix out = sparse_rows_product(a, b);
    debug_check(out, "matmul");
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt shape mismatch: " + a.shape_string() + " * (" +
                         b.shape_string() + ")^T");
    }
    Matrix out = sparse_rows_product(a, b.transposed());
    debug_check(out, "matmul_nt");
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn shape mismatch: (" + a.shape_string() + ")^T * " +
                         b.shape_string());
    }
    Matrix out(a.cols(), b.cols());
    const auto rows = nonzero_rows(a);
    if (rows.empty() || out.empty()) return out;
    // out = sum over shared rows r of outer(a_r, b_r), r ascending.
    const std::size_t ac = a.cols();
    const std::size_t m = b.cols();
    const double* ad = a.data();
    const double* bd = b.data();
    double* cd = out.data();
    gemm(ac, rows.size(), m,
         [&](std::size_t i, std::size_t p) { return ad[rows[p] * ac + i]; },
         [&](std::size_t p) { return bd + rows[p] * m; },
         [&](std::size_t i) { return cd + i * m; });
    debug_check(out, "matmul_tn");
    return out;
}

void softmax_inplace(std::span<double> values) {
    if (values.empty()) throw NumericError("softmax over an empty set");
    const double mx = *std::max_element(values.begin(), values.end());
    double total = 0.0;
    for (double& v : values) {
        v = std::exp(v - mx);
        total += v;
    }
    for (double& v : values) v /= total;
}

Matrix row_softmax(const Matrix& logits, const std::vector<std::uint8_t>* mask) {
    if (mask && mask->size() != logits.size()) {
        throw ShapeError("row_softmax mask size does not match logits " +
                         logits.shape_string());
    }
    Matrix out(logits.rows(), logits.cols());
    std::vector<double> buf;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        buf.clear();
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            if (!mask || (*mask)[r * logits.cols() + c]) buf.push_back(logits(r, c));
        }
        if (buf.empty()) {
            throw NumericError("row_softmax: row " + std::to_string(r) + " has no valid entry");
        }
        softmax_inplace(buf);
        std::size_t k = 0;
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            if (!mask || (*mask)[r * logits.cols() + c]) out(r, c) = buf[k++];
        }
    }
    return out;
}

Matrix activation(const Matrix& x, Activation kind) {
    if (kind == Activation::identity) return x;
    Matrix out = x;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix activation_backward(const Matrix& pre, const Matrix& upstream, Activation kind) {
    if (!pre.same_shape(upstream)) {
        throw ShapeError("activation_backward shape mismatch: " + pre.shape_string() + " vs " +
                         upstream.shape_string());
    }
    if (kind == Activation::identity) return upstream;
    Matrix out = upstream;
    auto p = pre.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (!(p[i] > 0.0)) o[i] = 0.0;
    }
    return out;
}

DropoutResult dropout(const Matrix& x, double rate, Mode mode, SeededRng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (mode == Mode::eval || rate == 0.0) return {x, Matrix()};
    const double keep_scale = 1.0 / (1.0 - rate);
    Matrix mask(x.rows(), x.cols());
    Matrix out(x.rows(), x.cols());
    auto m = mask.values();
    auto o = out.values();
    auto in = x.values();
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = rng.uniform() < rate ? 0.0 : keep_scale;
        o[i] = in[i] * m[i];
    }
    return {std::move(out), std::move(mask)};
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::vector<double> theta,
                                     double h) {
    if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const double up = f(theta);
        theta[i] = saved - h;
        const double down = f(theta);
        theta[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite difference oracle: non-finite value at coordinate " +
                               std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

void require_finite(const Matrix& m, const std::string& what) {
    if (!m.all_finite()) throw NumericError("non-finite value in " + what);
}

}  // namespace gnnrisk
