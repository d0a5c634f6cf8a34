#include "dbn/tensor.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                             std::to_string(rows * cols));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const noexcept {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Vector matvec(const Matrix& m, std::span<const double> v) {
    if (m.cols() != v.size()) {
        throw DimensionError("matvec: matrix has " + std::to_string(m.cols()) + " columns, vector has " +
                             std::to_string(v.size()) + " entries");
    }
    Vector out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v);
    return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
    if (m.rows() != v.size()) {
        throw DimensionError("matvec_transposed: matrix has " + std::to_string(m.rows()) + " rows, vector has " +
                             std::to_string(v.size()) + " entries");
    }
    Vector out(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += r[j] * v[i];
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

void add_outer(Matrix& m, std::span<const double> u, std::span<const double> v, double scale) {
    if (m.rows() != u.size() || m.cols() != v.size()) {
        throw DimensionError("add_outer: outer product shape does not match matrix");
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double s = scale * u[i];
        auto r = m.row(i);
        for (std::size_t j = 0; j < v.size(); ++j) r[j] += s * v[j];
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), key_(mix64(seed + kGolden)) {}

Rng::Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

std::uint64_t Rng::next_u64() {
    const std::uint64_t n = counter_++;
    return mix64(mix64(key_ ^ (n * kGolden)) + n);
}

double Rng::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::next_normal() {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) throw ParameterError("next_below: n must be positive");
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
        const std::uint64_t x = next_u64();
        if (x < limit) return x % n;
    }
}

Rng Rng::split(std::uint64_t stream) const { return Rng(seed_, mix64(key_ ^ mix64(stream * kGolden + 1))); }

Vector sample_uniform(Rng& rng, double lo, double hi, std::size_t n) {
    if (!(lo < hi)) throw ParameterError("sample_uniform: requires lo < hi");
    Vector out(n);
    const double width = hi - lo;
    for (auto& x : out) {
        x = lo + width * rng.next_double();
        // Rounding can land exactly on hi for tiny widths.
        if (x >= hi) x = std::nextafter(hi, lo);
    }
    return out;
}

}  // namespace dbn
