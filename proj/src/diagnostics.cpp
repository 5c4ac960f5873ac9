#include "relaysim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "relaysim/errors.hpp"

namespace relaysim {

double acf(std::span<const double> series, std::size_t tau) {
    const std::size_t n = series.size();
    if (n < 2) throw InsufficientData("acf needs at least 2 samples");
    if (tau >= n) throw InvalidParameter("acf lag must be smaller than the series length");
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : series) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (!(var > 0.0)) throw NumericDomainError("acf of a constant series is undefined");
    double sum = 0.0;
    for (std::size_t i = 0; i + tau < n; ++i) sum += (series[i] - mean) * (series[i + tau] - mean);
    return sum / (static_cast<double>(n - tau) * var);
}

std::vector<double> acf_curve(std::span<const double> series, std::size_t max_lag) {
    std::vector<double> out;
    const std::size_t top = std::min(max_lag, series.empty() ? 0 : series.size() - 1);
    for (std::size_t tau = 0; tau <= top; ++tau) out.push_back(acf(series, tau));
    return out;
}

Edf::Edf(std::span<const double> samples) {
    if (samples.empty()) throw InsufficientData("EDF of an empty sample");
    values_.assign(samples.begin(), samples.end());
    std::sort(values_.begin(), values_.end());
    cumulative_.resize(values_.size());
    const double n = static_cast<double>(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) cumulative_[i] = static_cast<double>(i + 1) / n;
}

Edf::Edf(std::span<const double> samples, std::span<const double> weights) {
    if (samples.empty()) throw InsufficientData("EDF of an empty sample");
    if (weights.size() != samples.size()) throw InvalidInput("EDF weights and samples differ in length");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw InvalidInput("EDF weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidInput("EDF weights sum to zero");
    double acc = 0.0;
    for (std::size_t i : order) {
        acc += weights[i];
        values_.push_back(samples[i]);
        cumulative_.push_back(acc / total);
    }
    cumulative_.back() = 1.0;
}

double Edf::operator()(double x) const {
    const auto it = std::upper_bound(values_.begin(), values_.end(), x);
    return it == values_.begin() ? 0.0 : cumulative_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

double Edf::left(double x) const {
    const auto it = std::lower_bound(values_.begin(), values_.end(), x);
    return it == values_.begin() ? 0.0 : cumulative_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

double edf_max_distance(const Edf& a, const Edf& b) {
    double d = 0.0;
    for (double x : a.values()) d = std::max(d, std::abs(a(x) - b(x)));
    for (double x : b.values()) d = std::max(d, std::abs(a(x) - b(x)));
    return d;
}

double ks_against_cdf(const Edf& edf, const std::function<double(double)>& cdf) {
    double d = 0.0;
    for (double x : edf.values()) {
        const double f = cdf(x);
        d = std::max({d, std::abs(edf(x) - f), std::abs(edf.left(x) - f)});
    }
    return d;
}

double normal_cdf(double x, double mean, double sd) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); }

double acceptance_rate(const ChainTrace& trace, std::size_t from, std::size_t to) {
    if (from >= to) throw InvalidInput("empty acceptance window");
    if (to > trace.size()) throw InvalidInput("acceptance window exceeds the trace");
    std::size_t hits = 0;
    for (std::size_t n = from; n < to; ++n) hits += trace.accepted(n) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(to - from);
}

std::vector<double> codeword_frequencies(const ChainTrace& trace, std::size_t burn_in, std::uint64_t space_size) {
    if (trace.size() <= burn_in) throw InsufficientData("trace is not longer than the burn-in");
    std::vector<double> freq(space_size, 0.0);
    for (std::size_t n = burn_in; n < trace.size(); ++n) freq.at(trace.code(n)) += 1.0;
    for (double& f : freq) f /= static_cast<double>(trace.size() - burn_in);
    return freq;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw InvalidInput("pmfs have different supports");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
    return 0.5 * sum;
}

void write_acf_csv(std::ostream& out, std::span<const double> curve) {
    out << "lag,acf\n";
    for (std::size_t i = 0; i < curve.size(); ++i) out << i << ',' << curve[i] << '\n';
}

void write_edf_csv(std::ostream& out, const Edf& edf) {
    out << "x,edf\n";
    for (std::size_t i = 0; i < edf.size(); ++i) out << edf.values()[i] << ',' << edf.cumulative()[i] << '\n';
}

}  // namespace relaysim
