#include "relaysim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relaysim/errors.hpp"

namespace relaysim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t id = 0x5ca1ab1e0ddba11ULL;
    for (auto p : path) id = splitmix64(id ^ splitmix64(p));
    return RngStream(seed, id);
}

std::size_t RngStream::index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

Complex RngStream::complex_normal(double variance) {
    const double sd = std::sqrt(0.5 * variance);
    const double re = normal();
    const double im = normal();
    return {sd * re, sd * im};
}

std::vector<Complex> sample_cn(const ComplexGaussianSpec& spec, std::size_t n, RngStream& rng) {
    if (!(spec.variance > 0.0) || !std::isfinite(spec.variance))
        throw InvalidParameter("complex Gaussian variance must be positive, got " + std::to_string(spec.variance));
    std::vector<Complex> out(n);
    for (auto& z : out) z = spec.mean + rng.complex_normal(spec.variance);
    return out;
}

double sorted_quantile(std::span<const double> sorted, double alpha) {
    const double h = static_cast<double>(sorted.size() - 1) * alpha;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted[sorted.size() - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double empirical_quantile(std::span<const double> data, double alpha) {
    if (data.empty()) throw InvalidInput("empirical_quantile: empty data");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("empirical_quantile: alpha must lie in (0,1)");
    std::vector<double> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted_quantile(sorted, alpha);
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double Matrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows, cols); ++i) t += (*this)(i, i);
    return t;
}

double Matrix::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

Matrix sample_covariance(const Matrix& draws) {
    const std::size_t n = draws.rows;
    const std::size_t d = draws.cols;
    if (n < 2) throw InsufficientData("sample_covariance: need at least 2 draws, got " + std::to_string(n));
    if (d == 0) throw InvalidInput("sample_covariance: zero-dimensional draws");

    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mean[c] += draws(r, c);
    for (auto& m : mean) m /= static_cast<double>(n);

    Matrix cov(d, d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            const double di = draws(r, i) - mean[i];
            for (std::size_t j = i; j < d; ++j) cov(i, j) += di * (draws(r, j) - mean[j]);
        }
    }
    const double denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            cov(i, j) /= denom;
            cov(j, i) = cov(i, j);
        }
    }
    return cov;
}

}  // namespace relaysim
