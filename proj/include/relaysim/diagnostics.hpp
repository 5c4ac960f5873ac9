#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "relaysim/samplers.hpp"

namespace relaysim {

/// Lag-tau autocorrelation normalised by the sample variance, so acf(x, 0) = 1.
/// Throws NumericDomainError for a constant series.
double acf(std::span<const double> series, std::size_t tau);
/// acf at lags 0..max_lag.
std::vector<double> acf_curve(std::span<const double> series, std::size_t max_lag);

/// Right-continuous empirical distribution function.
class Edf {
public:
    explicit Edf(std::span<const double> samples);
    Edf(std::span<const double> samples, std::span<const double> weights);

    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<double>& cumulative() const noexcept { return cumulative_; }

    double operator()(double x) const;
    /// Left limit F(x-).
    double left(double x) const;

private:
    std::vector<double> values_;
    std::vector<double> cumulative_;
};

/// Kolmogorov-Smirnov statistic between two EDFs, evaluated on the union of
/// their sample points.
double edf_max_distance(const Edf& a, const Edf& b);

/// sup_x |F_n(x) - F(x)| against a continuous CDF.
double ks_against_cdf(const Edf& edf, const std::function<double(double)>& cdf);

double normal_cdf(double x, double mean, double sd);

/// Fraction of accepted moves in trace entries [from, to).
double acceptance_rate(const ChainTrace& trace, std::size_t from, std::size_t to);

/// Relative frequency of every code over trace entries [burn_in, size).
std::vector<double> codeword_frequencies(const ChainTrace& trace, std::size_t burn_in, std::uint64_t space_size);

/// Half the L1 distance between two pmfs on the same support.
double total_variation(std::span<const double> p, std::span<const double> q);

void write_acf_csv(std::ostream& out, std::span<const double> curve);
void write_edf_csv(std::ostream& out, const Edf& edf);

}  // namespace relaysim
