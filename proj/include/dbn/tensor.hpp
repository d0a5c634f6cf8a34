#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dbn {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// m · v. Throws DimensionError when m.cols() != v.size().
Vector matvec(const Matrix& m, std::span<const double> v);

/// mᵀ · v without materializing the transpose.
Vector matvec_transposed(const Matrix& m, std::span<const double> v);

Matrix transpose(const Matrix& m);

/// m += scale · (u ⊗ v)
void add_outer(Matrix& m, std::span<const double> u, std::span<const double> v, double scale = 1.0);

double dot(std::span<const double> a, std::span<const double> b);

/// Counter-based generator: the n-th draw is a pure function of (key, n), so
/// streams are reproducible on every platform and can be split into
/// independent children.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double next_double();
    /// Standard normal via Box-Muller (consumes two draws).
    double next_normal();
    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

    /// Independent generator for a named sub-stream. Does not advance *this.
    Rng split(std::uint64_t stream) const;

private:
    Rng(std::uint64_t seed, std::uint64_t key);

    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// n draws uniform in [lo, hi). Throws ParameterError unless lo < hi.
Vector sample_uniform(Rng& rng, double lo, double hi, std::size_t n);

}  // namespace dbn
