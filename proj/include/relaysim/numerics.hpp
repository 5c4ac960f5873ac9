#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace relaysim {

using Complex = std::complex<double>;

/// Circularly symmetric complex Gaussian CN(mean, variance). `variance` is the
/// total variance; each of the real and imaginary parts carries variance/2.
struct ComplexGaussianSpec {
    Complex mean{0.0, 0.0};
    double variance = 1.0;
};

/// Deterministic random stream identified by (seed, stream id).
///
/// Two streams with the same identity produce bitwise identical sequences.
/// Different stream ids are seeded through a seed_seq over all four 32-bit
/// halves so that neighbouring ids give unrelated engine states.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    /// Stream for a hierarchical path, e.g. (cell, frame, purpose).
    static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    double uniform() { return uniform_(engine_); }
    double normal() { return normal_(engine_); }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    /// One draw from CN(0, variance).
    Complex complex_normal(double variance);

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// n i.i.d. draws from `spec`. Throws InvalidParameter for variance <= 0.
std::vector<Complex> sample_cn(const ComplexGaussianSpec& spec, std::size_t n, RngStream& rng);

/// Log density of CN(mean, variance) at z.
inline double log_cn_density(Complex z, Complex mean, double variance) {
    constexpr double kLogPi = 1.1447298858494002;
    return -kLogPi - std::log(variance) - std::norm(z - mean) / variance;
}

/// Linear-interpolation quantile between order statistics: with sorted data
/// x_0..x_{n-1} and h = (n-1)·alpha, q = x_floor(h) + frac(h)·(x_ceil(h) - x_floor(h)).
double empirical_quantile(std::span<const double> data, double alpha);

/// Same estimator on data that is already sorted ascending. No checks.
double sorted_quantile(std::span<const double> sorted, double alpha);

/// Dense row-major matrix used for covariances.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    static Matrix identity(std::size_t n);
    double trace() const;
    /// Frobenius norm.
    double norm() const;
};

/// Unbiased sample covariance of the rows of `draws` (n x d, divides by n-1).
Matrix sample_covariance(const Matrix& draws);

}  // namespace relaysim
