#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relaysim/abc.hpp"
#include "relaysim/numerics.hpp"
#include "relaysim/relay_model.hpp"

namespace relaysim {

/// Posterior parameter vector Theta = (s, g, h) of the likelihood-free sampler.
struct AbcChainState {
    Codeword s;
    std::vector<Complex> h;
    std::vector<Complex> g;
};

/// Theta extended with the relay noise realisations w (L x K).
struct AvChainState {
    Codeword s;
    std::vector<Complex> h;
    std::vector<Complex> g;
    ComplexGrid w;
};

/// Random-walk variances of the channel and relay-noise kernels.
struct ProposalScales {
    double sigma_g_rw_sq = 0.01;
    double sigma_h_rw_sq = 0.01;
    double sigma_w_rw_sq = 0.01;

    ProposalScales scaled(double factor) const {
        return {sigma_g_rw_sq * factor, sigma_h_rw_sq * factor, sigma_w_rw_sq * factor};
    }
};

/// Which components are updated per iteration: one drawn uniformly from all
/// components, or one symbol, one g and one h jointly.
enum class ScanMode { random_single, per_block };

struct ChainSettings {
    std::size_t iterations = 20000;
    std::size_t burn_in = 5000;
    ScanMode scan = ScanMode::random_single;
    bool freeze_symbols = false;
    bool freeze_channels = false;
    bool freeze_aux_noise = false;
    std::optional<std::uint64_t> initial_codeword;
    std::optional<ChannelRealization> initial_channels;
    std::optional<ComplexGrid> initial_aux_noise;
    /// A chain with no acceptance in its last `stuck_window` iterations is flagged.
    std::size_t stuck_window = 5000;
};

/// Component numbering: [0,K) symbols, [K,K+L) g, [K+L,K+2L) h,
/// [K+2L, K+2L+KL) relay noise w in row-major (l,k) order.
struct ComponentLayout {
    std::size_t symbols;
    std::size_t relays;
    bool aux;

    std::size_t count() const noexcept { return symbols + 2 * relays + (aux ? symbols * relays : 0); }
    bool is_symbol(std::size_t i) const noexcept { return i < symbols; }
    bool is_g(std::size_t i) const noexcept { return i >= symbols && i < symbols + relays; }
    bool is_h(std::size_t i) const noexcept { return i >= symbols + relays && i < symbols + 2 * relays; }
    bool is_w(std::size_t i) const noexcept { return i >= symbols + 2 * relays; }
};

/// Recorded Markov chain. Index 0 is the initial state; iteration n (1-based)
/// is stored at index n-1.
class ChainTrace {
public:
    static constexpr std::int32_t kInitial = -1;
    static constexpr std::int32_t kBlock = -2;

    ChainTrace() = default;
    ChainTrace(std::size_t relays, std::size_t symbols, bool aux, std::size_t capacity);

    std::size_t size() const noexcept { return codes_.size(); }
    std::size_t relays() const noexcept { return relays_; }
    std::size_t symbols() const noexcept { return symbols_; }
    bool has_aux_noise() const noexcept { return aux_; }

    void push(std::uint64_t code, std::span<const Complex> h, std::span<const Complex> g, std::span<const Complex> w,
              bool accepted, double epsilon, std::int32_t component, double rho);

    std::uint64_t code(std::size_t n) const { return codes_[n]; }
    std::span<const Complex> h(std::size_t n) const { return {channels_.data() + n * 2 * relays_, relays_}; }
    std::span<const Complex> g(std::size_t n) const { return {channels_.data() + n * 2 * relays_ + relays_, relays_}; }
    std::span<const Complex> w(std::size_t n) const {
        return {aux_values_.data() + n * relays_ * symbols_, relays_ * symbols_};
    }
    bool accepted(std::size_t n) const { return accepted_[n] != 0; }
    double epsilon(std::size_t n) const { return epsilon_[n]; }
    std::int32_t component(std::size_t n) const { return component_[n]; }
    /// Distance of the proposal made at step n (NaN when none was simulated).
    double rho(std::size_t n) const { return rho_[n]; }

    const std::vector<std::uint64_t>& codes() const noexcept { return codes_; }

    AbcChainState state(std::size_t n, const CodewordSpace& space) const;
    AvChainState av_state(std::size_t n, const CodewordSpace& space) const;

    /// Real or imaginary part of g_l (or h_l) over iterations [from, size()).
    enum class Channel { g, h };
    std::vector<double> channel_series(Channel which, std::size_t relay, bool imaginary, std::size_t from) const;

    bool stuck = false;
    std::vector<std::string> warnings;

private:
    std::size_t relays_ = 0;
    std::size_t symbols_ = 0;
    bool aux_ = false;
    std::vector<std::uint64_t> codes_;
    std::vector<Complex> channels_;
    std::vector<Complex> aux_values_;
    std::vector<std::uint8_t> accepted_;
    std::vector<double> epsilon_;
    std::vector<std::int32_t> component_;
    std::vector<double> rho_;
};

/// Per-iteration CSV dump: iteration,component,accepted,epsilon,rho,codeword,
/// then re/im of h_1..h_L, g_1..g_L (and w when present).
void write_trace_csv(std::ostream& out, const ChainTrace& trace);

struct AbcProposal {
    AbcChainState state;
    double log_q_ratio = 0.0;
    std::size_t component = 0;
};

/// Single-component random-scan proposal. Symbols are redrawn uniformly over
/// the constellation, channels take a complex Gaussian random-walk step. All
/// kernels are symmetric so log_q_ratio is always 0.
AbcProposal propose_abc(const AbcChainState& state, const ProposalScales& scales, const SystemConfig& config,
                        RngStream& rng);

/// log p(s) + sum_l log CN(h_l; h_hat_l, sigma_h^2) + log CN(g_l; g_hat_l, sigma_g^2).
double log_prior(const SystemConfig& config, const AbcChainState& state);

struct AcceptDecision {
    bool accept = false;
    double rho = 0.0;        ///< distance of the freshly simulated proposal data
    double log_alpha = 0.0;  ///< log acceptance probability before the uniform draw
};

/// One likelihood-free acceptance step: simulate synthetic data at the
/// proposal, compare summaries with y, and accept with
///   HD: rho* <= eps_n and u <= prior ratio,
///   SD: u <= [exp(-rho*/eps_n^2) p(theta*)] / [exp(-rho_cur/eps_prev^2) p(theta_cur)].
AcceptDecision abc_accept(const AbcChainState& current, double current_rho, const AbcChainState& proposal,
                          const Observation& y, const AbcSpec& spec, const SystemConfig& config, double epsilon_n,
                          double epsilon_prev, RngStream& rng);

ChainTrace run_mcmc_abc(const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                        const ProposalScales& scales, const ChainSettings& settings, RngStream& rng);
ChainTrace run_mcmc_abc(const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                        const ProposalScales& scales, std::size_t iterations, std::size_t burn_in, RngStream& rng);

/// Warm-started tolerance ladder: a short fixed-tolerance chain at each value
/// of `ladder` above spec.epsilon_min (in the given order), each started from
/// the previous chain's last state, then the full chain at spec.epsilon_min.
/// Only the final chain is returned.
ChainTrace run_mcmc_abc_ladder(const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                               const ProposalScales& scales, const ChainSettings& settings,
                               std::span<const double> ladder, std::size_t stage_iterations, RngStream& rng);

/// sum_l sum_k log CN(y_lk; f(s_k h_l + w_lk) g_l, sigma_v^2).
double av_log_likelihood(const Observation& y, const AvChainState& state, const SystemConfig& config);

ChainTrace run_mcmc_av(const SystemConfig& config, const Observation& y, const ProposalScales& scales,
                       const ChainSettings& settings, RngStream& rng);
ChainTrace run_mcmc_av(const SystemConfig& config, const Observation& y, const ProposalScales& scales,
                       std::size_t iterations, std::size_t burn_in, RngStream& rng);

struct AcceptanceTarget {
    double low = 0.3;
    double high = 0.5;
};

struct PilotSettings {
    std::size_t iterations = 2000;
    std::size_t burn_in = 500;
    std::size_t max_pilots = 20;
};

struct TuneResult {
    ProposalScales scales;
    double acceptance = 0.0;
    std::size_t pilots = 0;
    bool converged = false;
};

enum class SamplerKind { abc, av };

/// Post-burn-in acceptance rate of one pilot chain.
double measure_acceptance(SamplerKind kind, const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                          const ProposalScales& scales, const PilotSettings& pilot, const RngStream& stream);

/// Multiplicative search on all random-walk variances: halve when the pilot
/// acceptance is below the target, double when above, and switch to
/// square-root steps once the direction reverses. Every pilot reuses the same
/// random stream. Returns the closest scales found if the target is not met.
TuneResult tune_proposals(SamplerKind kind, const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                          const ProposalScales& initial, AcceptanceTarget target, RngStream& rng,
                          const PilotSettings& pilot = {});

/// Smallest tolerance (geometric bisection between `lo` and `hi`) whose pilot
/// acceptance reaches `min_acceptance`.
double tune_tolerance(const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                      const ProposalScales& scales, double min_acceptance, double lo, double hi, RngStream& rng,
                      const PilotSettings& pilot = {}, std::size_t steps = 24);

}  // namespace relaysim
