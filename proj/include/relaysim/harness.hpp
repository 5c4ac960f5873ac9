#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "relaysim/abc.hpp"
#include "relaysim/detectors.hpp"
#include "relaysim/relay_model.hpp"
#include "relaysim/samplers.hpp"

namespace relaysim {

/// Per-relay-count system description. The same CSI statistics apply to every
/// relay; the noise follows from the SNR of each cell.
struct SystemTemplate {
    Constellation constellation = Constellation::pam(4);
    CodewordPrior prior = CodewordPrior::two_mode_default(Constellation::pam(4));
    Complex h_hat{1.0, 0.0};
    Complex g_hat{1.0, 0.0};
    double sigma_h_sq = 0.1;
    double sigma_g_sq = 0.1;
    RelayFunction relay = RelayFunction::tanh();

    SystemConfig instantiate(std::size_t relays, double snr_db) const;
};

struct AbcPlan {
    SummarySpec summary{SummarySpec::Kind::identity};
    DistanceMetric::Kind metric = DistanceMetric::Kind::euclidean;
    double lp_exponent = 2.0;
    WeightingFunction::Kind weighting = WeightingFunction::Kind::soft;
    double epsilon_min = 1.0;
    bool anneal = true;
    std::size_t synthetic_draws = 1;
    bool refresh_current_distance = false;
    std::size_t covariance_draws = 2000;

    /// Per-cell search for the smallest eps_min whose pilot acceptance reaches
    /// `target_acceptance` (median over `pilot_frames` pilot frames).
    bool tune_tolerance = true;
    double target_acceptance = 0.25;
    std::size_t pilot_frames = 3;
    double tolerance_lo = 1e-3;
    double tolerance_hi = 1e4;
    std::size_t tolerance_steps = 14;
};

struct SamplerPlan {
    std::size_t iterations = 20000;
    std::size_t burn_in = 5000;
    ScanMode scan = ScanMode::random_single;
    ProposalScales scales;
    bool tune_scales = true;
    AcceptanceTarget abc_target{0.2, 0.5};
    AcceptanceTarget av_target{0.3, 0.5};
    PilotSettings pilot;
};

struct ExperimentPlan {
    SystemTemplate system;
    std::vector<std::size_t> relays{5};
    std::vector<double> snr_db{0, 5, 10, 15, 20, 25, 30};
    std::size_t frames = 2000;
    std::vector<DetectorMethod> detectors{DetectorMethod::mcmc_abc, DetectorMethod::ses_zf, DetectorMethod::omap};
    AbcPlan abc;
    SamplerPlan sampler;
    std::uint64_t seed = 2024;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Everything a frame needs that is fixed per (L, snr) cell.
struct CellSetup {
    std::size_t relays = 0;
    double snr_db = 0.0;
    SystemConfig config;
    AbcSpec abc;
    ProposalScales abc_scales;
    ProposalScales av_scales;
    double abc_pilot_acceptance = 0.0;
    double av_pilot_acceptance = 0.0;
    ChainSettings chain;
};

struct DetectorOutcome {
    DetectorMethod method;
    std::size_t symbol_errors = 0;
    bool failed = false;
    std::string error;
};

struct FrameResult {
    Codeword truth;
    std::vector<DetectorOutcome> outcomes;
};

struct SerRecord {
    std::size_t relays = 0;
    double snr_db = 0.0;
    DetectorMethod detector = DetectorMethod::omap;
    std::size_t symbols = 0;
    std::size_t frames = 0;
    std::size_t symbol_errors = 0;
    std::size_t failures = 0;
    double ser = 0.0;
    double wall_seconds = 0.0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

struct SweepResult {
    std::vector<SerRecord> records;
    std::vector<CellSetup> cells;
};

/// One transmitted frame: codeword, true channels, relay noise and Y.
struct Frame {
    Codeword s;
    ChannelRealization channels;
    ForwardDraw draw;
};

Frame generate_frame(const SystemConfig& config, RngStream& rng);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Random stream for (seed, L, snr, frame, purpose).
RngStream frame_stream(std::uint64_t seed, std::size_t relays, double snr_db, std::uint64_t frame, std::uint64_t purpose);

/// Covariance estimation, tolerance and proposal tuning for one cell.
CellSetup prepare_cell(const ExperimentPlan& plan, std::size_t relays, double snr_db);

/// Draws s, channels and relay noise from `data_rng`, simulates y and runs every
/// detector on the same frame. Each detector consumes its own stream derived
/// from `data_rng`. A detector that throws is counted as K symbol errors.
FrameResult run_frame(const CellSetup& cell, const std::vector<DetectorMethod>& detectors, RngStream& data_rng);

/// Runs all (L, snr) cells with `threads` workers. Output does not depend on
/// the thread count.
SweepResult run_ser_sweep(const ExperimentPlan& plan, std::size_t threads = 1, std::uint64_t config_hash = 0,
                          const ProgressFn& progress = {});

void write_ser_csv(std::ostream& out, const std::vector<SerRecord>& records);
std::vector<SerRecord> read_ser_csv(std::istream& in);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
/// thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct ToleranceConfig {
    WeightingFunction::Kind weighting;
    DistanceMetric::Kind metric;
};

struct TolerancePlan {
    SystemTemplate system;
    std::size_t relays = 5;
    double snr_db = 15.0;
    std::size_t datasets = 20;
    std::vector<double> epsilons{0.25, 0.5, 0.75, 1.0};
    std::vector<ToleranceConfig> configs{
        {WeightingFunction::Kind::soft, DistanceMetric::Kind::mahalanobis},
        {WeightingFunction::Kind::soft, DistanceMetric::Kind::scaled_euclidean},
        {WeightingFunction::Kind::hard, DistanceMetric::Kind::mahalanobis},
        {WeightingFunction::Kind::hard, DistanceMetric::Kind::scaled_euclidean},
    };
    SummarySpec summary;
    bool anneal = true;
    bool refresh_current_distance = true;
    std::size_t covariance_draws = 2000;
    std::size_t iterations = 20000;
    std::size_t burn_in = 5000;
    double baseline_epsilon = 0.2;
    std::size_t baseline_iterations = 100000;
    std::size_t baseline_burn_in = 20000;
    ProposalScales scales;
    AcceptanceTarget target{0.1, 0.3};
    PilotSettings pilot;
    std::size_t max_lag = 100;
    std::uint64_t seed = 2024;

    void validate() const;
};

/// One (weighting, metric, eps, dataset) chain.
struct ToleranceRun {
    ToleranceConfig config;
    double epsilon = 0.0;
    std::size_t dataset = 0;
    double edf_error = 0.0;
    double acceptance = 0.0;
    bool stuck = false;
    std::vector<double> acf;
};

struct ToleranceSummary {
    ToleranceConfig config;
    double epsilon = 0.0;
    double mean_edf_error = 0.0;
    double mean_acceptance = 0.0;
    std::size_t stuck = 0;
    std::vector<double> mean_acf;
};

struct ToleranceResult {
    std::vector<ToleranceRun> runs;
    std::vector<ToleranceSummary> summaries;
    /// Post-burn-in acceptance of each dataset's baseline chain.
    std::vector<double> baseline_acceptance;
    /// Tuned scales per (eps index, dataset).
    std::vector<ProposalScales> scales;

    const ToleranceSummary& summary(ToleranceConfig config, double epsilon) const;
};

/// Re(g_1) chains at each tolerance compared to a long baseline chain. Stuck
/// chains (constant series) get an ACF of 1 at every lag and are flagged.
ToleranceResult run_tolerance_study(const TolerancePlan& plan, std::size_t threads = 1,
                                    const ProgressFn& progress = {});

void write_tolerance_csv(std::ostream& out, const ToleranceResult& result);
void write_acf_table(std::ostream& out, const ToleranceResult& result);

std::string to_string(const ToleranceConfig& config);

}  // namespace relaysim
