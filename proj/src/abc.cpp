#include "relaysim/abc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "relaysim/errors.hpp"

namespace relaysim {

std::size_t SummarySpec::dimension(std::size_t relays, std::size_t symbols) const {
    const std::size_t parts = complex == ComplexHandling::split ? 2 : 1;
    if (kind == Kind::identity) return parts * relays * symbols;
    return parts * levels.size();
}

void SummarySpec::validate() const {
    if (kind != Kind::quantile_grid) return;
    if (levels.empty()) throw InvalidParameter("quantile summary needs at least one level");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0 && levels[i] < 1.0)) throw InvalidParameter("quantile levels must lie in (0,1)");
        if (i > 0 && !(levels[i] > levels[i - 1])) throw InvalidParameter("quantile levels must be strictly increasing");
    }
}

Summarizer::Summarizer(SummarySpec spec, std::size_t relays, std::size_t symbols)
    : spec_(std::move(spec)), count_(relays * symbols), dim_(spec_.dimension(relays, symbols)), scratch_(count_) {
    spec_.validate();
    if (count_ == 0) throw InvalidInput("cannot summarise an empty observation");
}

void Summarizer::operator()(std::span<const Complex> data, std::span<double> out) {
    const bool split = spec_.complex == SummarySpec::ComplexHandling::split;
    if (spec_.kind == SummarySpec::Kind::identity) {
        std::size_t j = 0;
        for (const Complex& z : data) {
            if (split) {
                out[j++] = z.real();
                out[j++] = z.imag();
            } else {
                out[j++] = std::abs(z);
            }
        }
        return;
    }
    const std::size_t n_levels = spec_.levels.size();
    auto fill_block = [&](auto project, std::size_t offset) {
        for (std::size_t i = 0; i < count_; ++i) scratch_[i] = project(data[i]);
        std::sort(scratch_.begin(), scratch_.end());
        for (std::size_t q = 0; q < n_levels; ++q) out[offset + q] = sorted_quantile(scratch_, spec_.levels[q]);
    };
    if (split) {
        fill_block([](Complex z) { return z.real(); }, 0);
        fill_block([](Complex z) { return z.imag(); }, n_levels);
    } else {
        fill_block([](Complex z) { return std::abs(z); }, 0);
    }
}

SummaryVector summarize(const SummarySpec& spec, const Observation& obs) {
    Summarizer summarizer(spec, obs.relays, obs.symbols);
    SummaryVector out(summarizer.dimension());
    summarizer(obs.data, out);
    return out;
}

DistanceMetric DistanceMetric::euclidean() { return DistanceMetric{}; }

DistanceMetric DistanceMetric::scaled_euclidean(std::vector<double> weights) {
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw InvalidParameter("scaled Euclidean weights must be positive");
    DistanceMetric m;
    m.kind_ = Kind::scaled_euclidean;
    m.weights_ = std::move(weights);
    return m;
}

DistanceMetric DistanceMetric::scaled_euclidean_from_covariance(const Matrix& covariance) {
    std::vector<double> w(covariance.rows);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(covariance(i, i) > 0.0)) throw SingularMatrix("summary covariance has a non-positive diagonal entry");
        w[i] = 1.0 / covariance(i, i);
    }
    return scaled_euclidean(std::move(w));
}

DistanceMetric DistanceMetric::mahalanobis(const Matrix& covariance) {
    if (covariance.rows != covariance.cols || covariance.rows == 0)
        throw InvalidInput("Mahalanobis covariance must be a non-empty square matrix");
    const auto d = static_cast<Eigen::Index>(covariance.rows);
    Eigen::MatrixXd sigma(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            sigma(i, j) = 0.5 * (covariance(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) +
                                 covariance(static_cast<std::size_t>(j), static_cast<std::size_t>(i)));

    DistanceMetric m;
    m.kind_ = Kind::mahalanobis;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        const double scale = sigma.trace() / static_cast<double>(d);
        if (!(scale > 0.0)) throw SingularMatrix("Mahalanobis covariance has zero trace and cannot be regularised");
        double ridge = 1e-8 * scale;
        for (int attempt = 0; attempt < 16 && llt.info() != Eigen::Success; ++attempt, ridge *= 10.0)
            llt.compute(sigma + ridge * Eigen::MatrixXd::Identity(d, d));
        if (llt.info() != Eigen::Success) throw SingularMatrix("Mahalanobis covariance is not positive definite");
        spdlog::warn("summary covariance is not positive definite; added a diagonal ridge of {:.3g}", ridge / 10.0);
        m.regularized_ = true;
    }
    const Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
    m.precision_ = Matrix(covariance.rows, covariance.rows);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            m.precision_(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 0.5 * (precision(i, j) + precision(j, i));
    return m;
}

DistanceMetric DistanceMetric::lp(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidParameter("Lp exponent must be >= 1");
    DistanceMetric m;
    m.kind_ = Kind::lp;
    m.p_ = p;
    return m;
}

DistanceMetric DistanceMetric::city_block() {
    DistanceMetric m;
    m.kind_ = Kind::city_block;
    return m;
}

double DistanceMetric::operator()(std::span<const double> a, std::span<const double> b) const {
    const std::size_t d = a.size();
    double total = 0.0;
    switch (kind_) {
        case Kind::euclidean:
            for (std::size_t i = 0; i < d; ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
            return total;
        case Kind::scaled_euclidean:
            for (std::size_t i = 0; i < d; ++i) total += weights_[i] * (a[i] - b[i]) * (a[i] - b[i]);
            return total;
        case Kind::mahalanobis: {
            double diff[64];
            std::vector<double> heap;
            double* delta = diff;
            if (d > 64) {
                heap.resize(d);
                delta = heap.data();
            }
            for (std::size_t i = 0; i < d; ++i) delta[i] = a[i] - b[i];
            for (std::size_t i = 0; i < d; ++i) {
                const double* row = precision_.values.data() + i * d;
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += row[j] * delta[j];
                total += delta[i] * acc;
            }
            return std::max(total, 0.0);
        }
        case Kind::lp:
            for (std::size_t i = 0; i < d; ++i) total += std::pow(std::abs(a[i] - b[i]), p_);
            return std::pow(total, 1.0 / p_);
        case Kind::city_block:
            for (std::size_t i = 0; i < d; ++i) total += std::abs(a[i] - b[i]);
            return total;
    }
    return total;
}

std::string to_string(DistanceMetric::Kind kind) {
    switch (kind) {
        case DistanceMetric::Kind::euclidean: return "euclidean";
        case DistanceMetric::Kind::scaled_euclidean: return "scaled-euclidean";
        case DistanceMetric::Kind::mahalanobis: return "mahalanobis";
        case DistanceMetric::Kind::lp: return "lp";
        case DistanceMetric::Kind::city_block: return "city-block";
    }
    return "unknown";
}

DistanceMetric::Kind parse_metric_kind(const std::string& name) {
    for (auto k : {DistanceMetric::Kind::euclidean, DistanceMetric::Kind::scaled_euclidean,
                   DistanceMetric::Kind::mahalanobis, DistanceMetric::Kind::lp, DistanceMetric::Kind::city_block})
        if (to_string(k) == name) return k;
    throw InvalidParameter("unknown distance metric '" + name + "'");
}

double distance(const DistanceMetric& metric, std::span<const double> t_y, std::span<const double> t_x) {
    if (t_y.size() != t_x.size()) throw InvalidInput("summary vectors have different dimensions");
    if (metric.kind() == DistanceMetric::Kind::scaled_euclidean && metric.weights().size() != t_y.size())
        throw InvalidInput("scaled Euclidean weights do not match the summary dimension");
    if (metric.kind() == DistanceMetric::Kind::mahalanobis && metric.precision().rows != t_y.size())
        throw InvalidInput("Mahalanobis covariance does not match the summary dimension");
    return metric(t_y, t_x);
}

double WeightingFunction::operator()(double rho) const {
    if (kind == Kind::hard) return rho <= epsilon ? 1.0 : 0.0;
    return std::exp(-rho / (epsilon * epsilon));
}

double WeightingFunction::log_weight(double rho) const {
    if (kind == Kind::hard) return rho <= epsilon ? 0.0 : -std::numeric_limits<double>::infinity();
    return -rho / (epsilon * epsilon);
}

std::string to_string(WeightingFunction::Kind kind) { return kind == WeightingFunction::Kind::hard ? "HD" : "SD"; }

WeightingFunction::Kind parse_weighting_kind(const std::string& name) {
    if (name == "HD" || name == "hd" || name == "hard") return WeightingFunction::Kind::hard;
    if (name == "SD" || name == "sd" || name == "soft") return WeightingFunction::Kind::soft;
    throw InvalidParameter("unknown weighting function '" + name + "'");
}

double weight(const WeightingFunction& w, double rho) { return w(rho); }

double tolerance_at(const ToleranceSchedule& schedule, std::size_t n) {
    if (n < 1 || n > schedule.iterations) throw InvalidParameter("tolerance_at: iteration outside [1, N]");
    const double linear = static_cast<double>(schedule.iterations) - 10.0 * static_cast<double>(n);
    return std::max(linear, schedule.epsilon_min);
}

Matrix estimate_summary_covariance(const SystemConfig& config, const SummarySpec& spec, std::size_t n_draws,
                                   RngStream& rng) {
    const std::size_t L = config.relays();
    const std::size_t K = config.symbols();
    Summarizer summarizer(spec, L, K);
    const std::size_t d = summarizer.dimension();
    if (n_draws < d + 1)
        throw InsufficientData("covariance estimation needs at least dim(T)+1 = " + std::to_string(d + 1) + " draws");

    const Codeword mode = config.codewords().decode(config.prior.mode());
    const auto symbols = symbol_values(config.constellation, mode);
    std::vector<Complex> w(L * K);
    std::vector<Complex> x(L * K);
    Matrix draws(n_draws, d);
    for (std::size_t r = 0; r < n_draws; ++r) {
        simulate_into(config, symbols, config.csi.h_hat, config.csi.g_hat, rng, w, x);
        summarizer(x, std::span<double>(draws.values.data() + r * d, d));
    }
    Matrix cov = sample_covariance(draws);
    const double ridge = 1e-8 * cov.trace() / static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) cov(i, i) += ridge;

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> view(
        cov.values.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::LLT<Eigen::MatrixXd> llt(view);
    if (!(ridge > 0.0) || llt.info() != Eigen::Success)
        throw SingularMatrix("summary covariance is singular after regularisation (trace " +
                             std::to_string(cov.trace()) + ", dim " + std::to_string(d) + ")");
    return cov;
}

DistanceMetric make_metric(DistanceMetric::Kind kind, const Matrix& covariance, double p) {
    switch (kind) {
        case DistanceMetric::Kind::euclidean: return DistanceMetric::euclidean();
        case DistanceMetric::Kind::scaled_euclidean: return DistanceMetric::scaled_euclidean_from_covariance(covariance);
        case DistanceMetric::Kind::mahalanobis: return DistanceMetric::mahalanobis(covariance);
        case DistanceMetric::Kind::lp: return DistanceMetric::lp(p);
        case DistanceMetric::Kind::city_block: return DistanceMetric::city_block();
    }
    return DistanceMetric::euclidean();
}

}  // namespace relaysim
