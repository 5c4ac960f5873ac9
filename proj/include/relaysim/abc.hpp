#pragma once

#include <span>
#include <string>
#include <vector>

#include "relaysim/numerics.hpp"
#include "relaysim/relay_model.hpp"

namespace relaysim {

using SummaryVector = std::vector<double>;

struct SummarySpec {
    enum class Kind { quantile_grid, identity };
    /// How complex samples become reals: real and imaginary parts as two
    /// blocks, or the modulus only.
    enum class ComplexHandling { split, modulus };

    Kind kind = Kind::quantile_grid;
    ComplexHandling complex = ComplexHandling::split;
    std::vector<double> levels = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

    std::size_t dimension(std::size_t relays, std::size_t symbols) const;
    void validate() const;
};

/// Reusable summariser. Holds scratch space so the sampler hot loop does not
/// allocate. Quantile-grid summaries pool all L*K entries, so the result does
/// not depend on the order of the entries.
class Summarizer {
public:
    Summarizer(SummarySpec spec, std::size_t relays, std::size_t symbols);

    std::size_t dimension() const noexcept { return dim_; }
    const SummarySpec& spec() const noexcept { return spec_; }
    void operator()(std::span<const Complex> data, std::span<double> out);

private:
    SummarySpec spec_;
    std::size_t count_;
    std::size_t dim_;
    std::vector<double> scratch_;
};

SummaryVector summarize(const SummarySpec& spec, const Observation& obs);

class DistanceMetric {
public:
    enum class Kind { euclidean, scaled_euclidean, mahalanobis, lp, city_block };

    /// Sum of squared differences.
    static DistanceMetric euclidean();
    /// sum_i weights_i (a_i - b_i)^2.
    static DistanceMetric scaled_euclidean(std::vector<double> weights);
    /// Scaled Euclidean with weights 1/Sigma_ii, i.e. Mahalanobis with diag(Sigma).
    static DistanceMetric scaled_euclidean_from_covariance(const Matrix& covariance);
    /// Quadratic form (a-b)^T Sigma^{-1} (a-b). A covariance that is not
    /// positive definite gets a ridge added and a warning is logged.
    static DistanceMetric mahalanobis(const Matrix& covariance);
    /// (sum_i |a_i - b_i|^p)^(1/p), p >= 1.
    static DistanceMetric lp(double p);
    static DistanceMetric city_block();

    Kind kind() const noexcept { return kind_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const Matrix& precision() const noexcept { return precision_; }
    double exponent() const noexcept { return p_; }
    /// True if the covariance had to be ridge-regularised.
    bool regularized() const noexcept { return regularized_; }

    double operator()(std::span<const double> a, std::span<const double> b) const;

private:
    Kind kind_ = Kind::euclidean;
    std::vector<double> weights_;
    Matrix precision_;
    double p_ = 2.0;
    bool regularized_ = false;
};

std::string to_string(DistanceMetric::Kind kind);
DistanceMetric::Kind parse_metric_kind(const std::string& name);

/// Checked distance. Throws InvalidInput on dimension mismatch.
double distance(const DistanceMetric& metric, std::span<const double> t_y, std::span<const double> t_x);

struct WeightingFunction {
    enum class Kind { hard, soft };

    Kind kind = Kind::soft;
    double epsilon = 1.0;

    /// HD: 1 if rho <= epsilon else 0. SD: exp(-rho / epsilon^2).
    double operator()(double rho) const;
    double log_weight(double rho) const;
};

std::string to_string(WeightingFunction::Kind kind);
WeightingFunction::Kind parse_weighting_kind(const std::string& name);

double weight(const WeightingFunction& w, double rho);

/// Annealed tolerance eps_n = max(N - 10 n, eps_min), n = 1..N.
struct ToleranceSchedule {
    std::size_t iterations = 20000;
    double epsilon_min = 1.0;
};

double tolerance_at(const ToleranceSchedule& schedule, std::size_t n);

/// Full likelihood-free configuration used by the MCMC-ABC sampler.
struct AbcSpec {
    SummarySpec summary;
    DistanceMetric metric = DistanceMetric::euclidean();
    WeightingFunction::Kind weighting = WeightingFunction::Kind::soft;
    double epsilon_min = 1.0;
    /// Anneal with tolerance_at during burn-in; otherwise eps_min throughout.
    bool anneal = true;
    /// Synthetic datasets simulated per proposal.
    std::size_t synthetic_draws = 1;
    /// Re-simulate the current state's distance every iteration instead of
    /// keeping the value stored when it was accepted.
    bool refresh_current_distance = false;
};

/// Sample covariance of summaries of `n_draws` forward simulations at the
/// prior mode with channels fixed at the CSI estimates, plus a relative ridge
/// of 1e-8 * trace / d on the diagonal.
Matrix estimate_summary_covariance(const SystemConfig& config, const SummarySpec& spec, std::size_t n_draws,
                                   RngStream& rng);

/// Builds the metric of the given kind from a summary covariance (ignored by
/// kinds that do not use it).
DistanceMetric make_metric(DistanceMetric::Kind kind, const Matrix& covariance, double p = 2.0);

}  // namespace relaysim
