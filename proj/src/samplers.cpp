#include "relaysim/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <spdlog/spdlog.h>

#include "relaysim/errors.hpp"

namespace relaysim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_mean_weight(WeightingFunction::Kind kind, std::span<const double> rhos, double epsilon) {
    const WeightingFunction w{kind, epsilon};
    if (rhos.size() == 1) return w.log_weight(rhos[0]);
    if (kind == WeightingFunction::Kind::hard) {
        std::size_t hits = 0;
        for (double r : rhos) hits += r <= epsilon ? 1 : 0;
        return hits == 0 ? kNegInf : std::log(static_cast<double>(hits) / static_cast<double>(rhos.size()));
    }
    double top = kNegInf;
    for (double r : rhos) top = std::max(top, w.log_weight(r));
    double sum = 0.0;
    for (double r : rhos) sum += std::exp(w.log_weight(r) - top);
    return top + std::log(sum / static_cast<double>(rhos.size()));
}

/// Log acceptance probability of a likelihood-free move. A current state
/// with zero weight (HD outside tolerance during annealing) falls back to the
/// prior ratio.
double abc_log_alpha(double log_prior_delta, double log_w_star, double log_w_cur) {
    if (log_w_star == kNegInf || log_prior_delta == kNegInf) return kNegInf;
    const double denom = std::isfinite(log_w_cur) ? log_w_cur : log_w_star;
    return log_prior_delta + log_w_star - denom;
}

bool metropolis(double log_alpha, RngStream& rng) {
    if (log_alpha == kNegInf) return false;
    if (log_alpha >= 0.0) return true;
    return std::log(rng.uniform()) <= log_alpha;
}

/// Simulation and distance evaluation against a fixed observation.
class AbcEngine {
public:
    AbcEngine(const SystemConfig& config, const Observation& y, const AbcSpec& spec)
        : config_(config),
          spec_(spec),
          summarizer_(spec.summary, y.relays, y.symbols),
          t_y_(summarizer_.dimension()),
          t_x_(summarizer_.dimension()),
          w_(y.relays * y.symbols),
          x_(y.relays * y.symbols) {
        if (y.relays != config.relays() || y.symbols != config.symbols())
            throw InvalidInput("observation dimensions do not match the configuration");
        if (spec.synthetic_draws < 1) throw InvalidParameter("synthetic_draws must be >= 1");
        if (!(spec.epsilon_min > 0.0)) throw InvalidParameter("epsilon_min must be > 0");
        summarizer_(y.data, t_y_);
        (void)distance(spec_.metric, t_y_, t_x_);
    }

    double simulate_rho(std::span<const double> symbols, std::span<const Complex> h, std::span<const Complex> g,
                        RngStream& rng) {
        simulate_into(config_, symbols, h, g, rng, w_, x_);
        summarizer_(x_, t_x_);
        return spec_.metric(t_y_, t_x_);
    }

    void simulate_rhos(std::span<const double> symbols, std::span<const Complex> h, std::span<const Complex> g,
                       RngStream& rng, std::span<double> out) {
        for (double& r : out) r = simulate_rho(symbols, h, g, rng);
    }

private:
    const SystemConfig& config_;
    const AbcSpec& spec_;
    Summarizer summarizer_;
    SummaryVector t_y_;
    SummaryVector t_x_;
    std::vector<Complex> w_;
    std::vector<Complex> x_;
};

double channel_log_prior(Complex value, Complex mean, double variance) {
    return -std::norm(value - mean) / variance;
}

std::vector<std::uint64_t> place_values(const CodewordSpace& space) {
    std::vector<std::uint64_t> place(space.length());
    std::uint64_t p = 1;
    for (std::size_t k = space.length(); k-- > 0;) {
        place[k] = p;
        p *= space.alphabet();
    }
    return place;
}

void check_settings(const ChainSettings& settings) {
    if (settings.iterations < 2) throw InvalidParameter("chain needs at least 2 iterations");
    if (settings.burn_in >= settings.iterations) throw InvalidParameter("burn_in must be smaller than the chain length");
}

std::vector<std::size_t> active_components(const ComponentLayout& layout, const ChainSettings& settings) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < layout.count(); ++i) {
        if (layout.is_symbol(i) && settings.freeze_symbols) continue;
        if ((layout.is_g(i) || layout.is_h(i)) && settings.freeze_channels) continue;
        if (layout.is_w(i) && settings.freeze_aux_noise) continue;
        active.push_back(i);
    }
    if (active.empty()) throw InvalidParameter("every parameter block is frozen");
    return active;
}

void flag_if_stuck(ChainTrace& trace, std::size_t window) {
    const std::size_t n = trace.size();
    const std::size_t span = std::min(window, n - 1);
    for (std::size_t i = n - span; i < n; ++i)
        if (trace.accepted(i)) return;
    trace.stuck = true;
    trace.warnings.push_back("chain stuck: no acceptance in the final " + std::to_string(span) + " iterations");
}

/// Mutable chain state shared by both samplers.
struct WorkingState {
    std::uint64_t code = 0;
    Codeword s;
    std::vector<double> values;
    std::vector<Complex> h;
    std::vector<Complex> g;
    ComplexGrid w;

    WorkingState(const SystemConfig& config, const ChainSettings& settings, bool with_aux, RngStream& rng) {
        const auto& space = config.codewords();
        code = settings.initial_codeword ? *settings.initial_codeword : config.prior.sample(rng);
        if (code >= space.size()) throw InvalidParameter("initial codeword outside the codeword space");
        s = space.decode(code);
        values = symbol_values(config.constellation, s);
        if (settings.initial_channels) {
            if (settings.initial_channels->relays() != config.relays())
                throw InvalidInput("initial channels do not match the relay count");
            h = settings.initial_channels->h;
            g = settings.initial_channels->g;
        } else {
            h = config.csi.h_hat;
            g = config.csi.g_hat;
        }
        if (with_aux) {
            if (settings.initial_aux_noise) {
                w = *settings.initial_aux_noise;
                if (w.relays != config.relays() || w.symbols != config.symbols())
                    throw InvalidInput("initial relay noise has the wrong shape");
            } else {
                w = ComplexGrid(config.relays(), config.symbols());
                for (auto& z : w.data) z = rng.complex_normal(config.noise.sigma_w_sq);
            }
        }
    }
};

/// Undo record for a rejected move.
struct Change {
    enum class Kind { symbol, g, h, w } kind;
    std::size_t index;
    std::uint32_t old_symbol = 0;
    Complex old_value{};
};

}  // namespace

ChainTrace::ChainTrace(std::size_t relays, std::size_t symbols, bool aux, std::size_t capacity)
    : relays_(relays), symbols_(symbols), aux_(aux) {
    codes_.reserve(capacity);
    channels_.reserve(capacity * 2 * relays);
    if (aux) aux_values_.reserve(capacity * relays * symbols);
    accepted_.reserve(capacity);
    epsilon_.reserve(capacity);
    component_.reserve(capacity);
    rho_.reserve(capacity);
}

void ChainTrace::push(std::uint64_t code, std::span<const Complex> h, std::span<const Complex> g,
                      std::span<const Complex> w, bool accepted, double epsilon, std::int32_t component, double rho) {
    codes_.push_back(code);
    channels_.insert(channels_.end(), h.begin(), h.end());
    channels_.insert(channels_.end(), g.begin(), g.end());
    if (aux_) aux_values_.insert(aux_values_.end(), w.begin(), w.end());
    accepted_.push_back(accepted ? 1 : 0);
    epsilon_.push_back(epsilon);
    component_.push_back(component);
    rho_.push_back(rho);
}

AbcChainState ChainTrace::state(std::size_t n, const CodewordSpace& space) const {
    AbcChainState st;
    st.s = space.decode(codes_[n]);
    st.h.assign(h(n).begin(), h(n).end());
    st.g.assign(g(n).begin(), g(n).end());
    return st;
}

AvChainState ChainTrace::av_state(std::size_t n, const CodewordSpace& space) const {
    AvChainState st;
    st.s = space.decode(codes_[n]);
    st.h.assign(h(n).begin(), h(n).end());
    st.g.assign(g(n).begin(), g(n).end());
    st.w = ComplexGrid(relays_, symbols_);
    if (aux_) std::copy(w(n).begin(), w(n).end(), st.w.data.begin());
    return st;
}

std::vector<double> ChainTrace::channel_series(Channel which, std::size_t relay, bool imaginary,
                                               std::size_t from) const {
    std::vector<double> out;
    out.reserve(size() > from ? size() - from : 0);
    for (std::size_t n = from; n < size(); ++n) {
        const Complex z = which == Channel::g ? g(n)[relay] : h(n)[relay];
        out.push_back(imaginary ? z.imag() : z.real());
    }
    return out;
}

void write_trace_csv(std::ostream& out, const ChainTrace& trace) {
    out << "iteration,component,accepted,epsilon,rho,codeword";
    for (std::size_t l = 0; l < trace.relays(); ++l) out << ",h" << l + 1 << "_re,h" << l + 1 << "_im";
    for (std::size_t l = 0; l < trace.relays(); ++l) out << ",g" << l + 1 << "_re,g" << l + 1 << "_im";
    if (trace.has_aux_noise())
        for (std::size_t l = 0; l < trace.relays(); ++l)
            for (std::size_t k = 0; k < trace.symbols(); ++k)
                out << ",w" << l + 1 << '_' << k + 1 << "_re,w" << l + 1 << '_' << k + 1 << "_im";
    out << '\n';
    out.precision(17);
    for (std::size_t n = 0; n < trace.size(); ++n) {
        out << n + 1 << ',' << trace.component(n) << ',' << (trace.accepted(n) ? 1 : 0) << ',' << trace.epsilon(n)
            << ',' << trace.rho(n) << ',' << trace.code(n);
        for (auto z : trace.h(n)) out << ',' << z.real() << ',' << z.imag();
        for (auto z : trace.g(n)) out << ',' << z.real() << ',' << z.imag();
        if (trace.has_aux_noise())
            for (auto z : trace.w(n)) out << ',' << z.real() << ',' << z.imag();
        out << '\n';
    }
}

AbcProposal propose_abc(const AbcChainState& state, const ProposalScales& scales, const SystemConfig& config,
                        RngStream& rng) {
    const ComponentLayout layout{config.symbols(), config.relays(), false};
    AbcProposal p{state, 0.0, rng.index(layout.count())};
    const std::size_t i = p.component;
    if (layout.is_symbol(i)) {
        p.state.s[i] = static_cast<std::uint32_t>(rng.index(config.constellation.size()));
    } else if (layout.is_g(i)) {
        const std::size_t l = i - layout.symbols;
        p.state.g[l] += rng.complex_normal(scales.sigma_g_rw_sq);
    } else {
        const std::size_t l = i - layout.symbols - layout.relays;
        p.state.h[l] += rng.complex_normal(scales.sigma_h_rw_sq);
    }
    return p;
}

double log_prior(const SystemConfig& config, const AbcChainState& state) {
    double lp = config.prior.log_probability(config.codewords().encode(state.s));
    for (std::size_t l = 0; l < config.relays(); ++l) {
        lp += log_cn_density(state.h[l], config.csi.h_hat[l], config.csi.sigma_h_sq);
        lp += log_cn_density(state.g[l], config.csi.g_hat[l], config.csi.sigma_g_sq);
    }
    return lp;
}

AcceptDecision abc_accept(const AbcChainState& current, double current_rho, const AbcChainState& proposal,
                          const Observation& y, const AbcSpec& spec, const SystemConfig& config, double epsilon_n,
                          double epsilon_prev, RngStream& rng) {
    AbcEngine engine(config, y, spec);
    const auto values = symbol_values(config.constellation, proposal.s);
    std::vector<double> rhos(spec.synthetic_draws);
    engine.simulate_rhos(values, proposal.h, proposal.g, rng, rhos);
    const double cur[1] = {current_rho};
    const double log_w_star = log_mean_weight(spec.weighting, rhos, epsilon_n);
    const double log_w_cur = log_mean_weight(spec.weighting, cur, epsilon_prev);
    AcceptDecision d;
    d.rho = rhos[0];
    d.log_alpha = abc_log_alpha(log_prior(config, proposal) - log_prior(config, current), log_w_star, log_w_cur);
    d.accept = metropolis(d.log_alpha, rng);
    return d;
}

ChainTrace run_mcmc_abc(const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                        const ProposalScales& scales, const ChainSettings& settings, RngStream& rng) {
    check_settings(settings);
    const std::size_t N = settings.iterations;
    const std::size_t L = config.relays();
    const std::size_t K = config.symbols();
    const ComponentLayout layout{K, L, false};
    const auto active = active_components(layout, settings);
    const auto place = place_values(config.codewords());
    const auto& csi = config.csi;
    const ToleranceSchedule schedule{N, spec.epsilon_min};
    auto epsilon_at = [&](std::size_t n) {
        return spec.anneal && n <= settings.burn_in ? tolerance_at(schedule, n) : spec.epsilon_min;
    };

    AbcEngine engine(config, y, spec);
    WorkingState st(config, settings, false, rng);
    const std::size_t D = spec.synthetic_draws;
    std::vector<double> rho_cur(D);
    std::vector<double> rho_new(D);
    engine.simulate_rhos(st.values, st.h, st.g, rng, rho_cur);

    ChainTrace trace(L, K, false, N);
    trace.push(st.code, st.h, st.g, {}, true, epsilon_at(1), ChainTrace::kInitial, rho_cur[0]);

    Change changes[3];
    for (std::size_t n = 2; n <= N; ++n) {
        const double eps_n = epsilon_at(n);
        const double eps_prev = epsilon_at(n - 1);
        if (spec.refresh_current_distance) engine.simulate_rhos(st.values, st.h, st.g, rng, rho_cur);

        std::size_t n_changes = 0;
        double log_prior_delta = 0.0;
        std::int32_t component = 0;
        auto change_symbol = [&](std::size_t k) {
            const auto proposed = static_cast<std::uint32_t>(rng.index(config.constellation.size()));
            changes[n_changes++] = {Change::Kind::symbol, k, st.s[k], {}};
            const std::uint64_t new_code = st.code - st.s[k] * place[k] + proposed * place[k];
            log_prior_delta += config.prior.log_probability(new_code) - config.prior.log_probability(st.code);
            st.code = new_code;
            st.s[k] = proposed;
            st.values[k] = config.constellation[proposed];
        };
        auto change_g = [&](std::size_t l) {
            changes[n_changes++] = {Change::Kind::g, l, 0, st.g[l]};
            const Complex proposed = st.g[l] + rng.complex_normal(scales.sigma_g_rw_sq);
            log_prior_delta += channel_log_prior(proposed, csi.g_hat[l], csi.sigma_g_sq) -
                               channel_log_prior(st.g[l], csi.g_hat[l], csi.sigma_g_sq);
            st.g[l] = proposed;
        };
        auto change_h = [&](std::size_t l) {
            changes[n_changes++] = {Change::Kind::h, l, 0, st.h[l]};
            const Complex proposed = st.h[l] + rng.complex_normal(scales.sigma_h_rw_sq);
            log_prior_delta += channel_log_prior(proposed, csi.h_hat[l], csi.sigma_h_sq) -
                               channel_log_prior(st.h[l], csi.h_hat[l], csi.sigma_h_sq);
            st.h[l] = proposed;
        };

        if (settings.scan == ScanMode::per_block) {
            component = ChainTrace::kBlock;
            if (!settings.freeze_symbols) change_symbol(rng.index(K));
            if (!settings.freeze_channels) {
                change_g(rng.index(L));
                change_h(rng.index(L));
            }
        } else {
            const std::size_t i = active[rng.index(active.size())];
            component = static_cast<std::int32_t>(i);
            if (layout.is_symbol(i)) change_symbol(i);
            else if (layout.is_g(i)) change_g(i - K);
            else change_h(i - K - L);
        }

        double rho_record = kNaN;
        double log_alpha = kNegInf;
        if (log_prior_delta != kNegInf) {
            engine.simulate_rhos(st.values, st.h, st.g, rng, rho_new);
            rho_record = rho_new[0];
            log_alpha = abc_log_alpha(log_prior_delta, log_mean_weight(spec.weighting, rho_new, eps_n),
                                      log_mean_weight(spec.weighting, rho_cur, eps_prev));
        }
        const bool accepted = metropolis(log_alpha, rng);
        if (accepted) {
            rho_cur.swap(rho_new);
        } else {
            for (std::size_t c = n_changes; c-- > 0;) {
                const Change& ch = changes[c];
                switch (ch.kind) {
                    case Change::Kind::symbol:
                        st.code = st.code - st.s[ch.index] * place[ch.index] + ch.old_symbol * place[ch.index];
                        st.s[ch.index] = ch.old_symbol;
                        st.values[ch.index] = config.constellation[ch.old_symbol];
                        break;
                    case Change::Kind::g: st.g[ch.index] = ch.old_value; break;
                    case Change::Kind::h: st.h[ch.index] = ch.old_value; break;
                    case Change::Kind::w: break;
                }
            }
        }
        trace.push(st.code, st.h, st.g, {}, accepted, eps_n, component, rho_record);
    }
    flag_if_stuck(trace, settings.stuck_window);
    return trace;
}

ChainTrace run_mcmc_abc(const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                        const ProposalScales& scales, std::size_t iterations, std::size_t burn_in, RngStream& rng) {
    ChainSettings settings;
    settings.iterations = iterations;
    settings.burn_in = burn_in;
    return run_mcmc_abc(config, y, spec, scales, settings, rng);
}

ChainTrace run_mcmc_abc_ladder(const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                               const ProposalScales& scales, const ChainSettings& settings,
                               std::span<const double> ladder, std::size_t stage_iterations, RngStream& rng) {
    if (stage_iterations < 2) throw InvalidParameter("ladder stages need at least 2 iterations");
    AbcSpec stage_spec = spec;
    stage_spec.anneal = false;
    ChainSettings stage = settings;
    stage.iterations = stage_iterations;
    stage.burn_in = 0;
    for (double eps : ladder) {
        if (!(eps > spec.epsilon_min)) break;
        stage_spec.epsilon_min = eps;
        const ChainTrace t = run_mcmc_abc(config, y, stage_spec, scales, stage, rng);
        const std::size_t last = t.size() - 1;
        stage.initial_codeword = t.code(last);
        stage.initial_channels = ChannelRealization{{t.h(last).begin(), t.h(last).end()},
                                                    {t.g(last).begin(), t.g(last).end()}};
    }
    ChainSettings final_settings = settings;
    final_settings.initial_codeword = stage.initial_codeword ? stage.initial_codeword : settings.initial_codeword;
    final_settings.initial_channels = stage.initial_channels ? stage.initial_channels : settings.initial_channels;
    stage_spec.epsilon_min = spec.epsilon_min;
    return run_mcmc_abc(config, y, stage_spec, scales, final_settings, rng);
}

double av_log_likelihood(const Observation& y, const AvChainState& state, const SystemConfig& config) {
    const std::size_t L = config.relays();
    const std::size_t K = config.symbols();
    if (y.relays != L || y.symbols != K || state.w.relays != L || state.w.symbols != K)
        throw InvalidInput("av_log_likelihood: dimension mismatch");
    const auto values = symbol_values(config.constellation, state.s);
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t k = 0; k < K; ++k)
            total += log_cn_density(y(l, k), config.relay(values[k] * state.h[l] + state.w(l, k)) * state.g[l],
                                    config.noise.sigma_v_sq);
    return total;
}

ChainTrace run_mcmc_av(const SystemConfig& config, const Observation& y, const ProposalScales& scales,
                       const ChainSettings& settings, RngStream& rng) {
    check_settings(settings);
    const std::size_t N = settings.iterations;
    const std::size_t L = config.relays();
    const std::size_t K = config.symbols();
    if (y.relays != L || y.symbols != K) throw InvalidInput("observation dimensions do not match the configuration");
    const ComponentLayout layout{K, L, true};
    const auto active = active_components(layout, settings);
    const auto place = place_values(config.codewords());
    const auto& csi = config.csi;
    const double sv2 = config.noise.sigma_v_sq;
    const double sw2 = config.noise.sigma_w_sq;

    WorkingState st(config, settings, true, rng);
    auto term = [&](std::size_t l, std::size_t k, double symbol, Complex h, Complex g, Complex w) {
        return log_cn_density(y(l, k), config.relay(symbol * h + w) * g, sv2);
    };
    std::vector<double> ll(L * K);
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t k = 0; k < K; ++k) ll[l * K + k] = term(l, k, st.values[k], st.h[l], st.g[l], st.w(l, k));

    std::vector<double> fresh(std::max(L, K));
    ChainTrace trace(L, K, true, N);
    trace.push(st.code, st.h, st.g, st.w.data, true, kNaN, ChainTrace::kInitial, kNaN);

    for (std::size_t n = 2; n <= N; ++n) {
        const std::size_t i = active[rng.index(active.size())];
        double log_alpha = 0.0;
        bool accepted = false;
        if (layout.is_symbol(i)) {
            const std::size_t k = i;
            const auto proposed = static_cast<std::uint32_t>(rng.index(config.constellation.size()));
            const std::uint64_t new_code = st.code - st.s[k] * place[k] + proposed * place[k];
            const double value = config.constellation[proposed];
            log_alpha = config.prior.log_probability(new_code) - config.prior.log_probability(st.code);
            if (log_alpha != kNegInf) {
                for (std::size_t l = 0; l < L; ++l) {
                    fresh[l] = term(l, k, value, st.h[l], st.g[l], st.w(l, k));
                    log_alpha += fresh[l] - ll[l * K + k];
                }
            }
            accepted = metropolis(log_alpha, rng);
            if (accepted) {
                st.code = new_code;
                st.s[k] = proposed;
                st.values[k] = value;
                for (std::size_t l = 0; l < L; ++l) ll[l * K + k] = fresh[l];
            }
        } else if (layout.is_g(i) || layout.is_h(i)) {
            const bool is_g = layout.is_g(i);
            const std::size_t l = is_g ? i - K : i - K - L;
            Complex h = st.h[l];
            Complex g = st.g[l];
            if (is_g) {
                g += rng.complex_normal(scales.sigma_g_rw_sq);
                log_alpha = channel_log_prior(g, csi.g_hat[l], csi.sigma_g_sq) -
                            channel_log_prior(st.g[l], csi.g_hat[l], csi.sigma_g_sq);
            } else {
                h += rng.complex_normal(scales.sigma_h_rw_sq);
                log_alpha = channel_log_prior(h, csi.h_hat[l], csi.sigma_h_sq) -
                            channel_log_prior(st.h[l], csi.h_hat[l], csi.sigma_h_sq);
            }
            for (std::size_t k = 0; k < K; ++k) {
                fresh[k] = term(l, k, st.values[k], h, g, st.w(l, k));
                log_alpha += fresh[k] - ll[l * K + k];
            }
            accepted = metropolis(log_alpha, rng);
            if (accepted) {
                st.h[l] = h;
                st.g[l] = g;
                for (std::size_t k = 0; k < K; ++k) ll[l * K + k] = fresh[k];
            }
        } else {
            const std::size_t idx = i - K - 2 * L;
            const std::size_t l = idx / K;
            const std::size_t k = idx % K;
            const Complex w = st.w(l, k) + rng.complex_normal(scales.sigma_w_rw_sq);
            const double updated = term(l, k, st.values[k], st.h[l], st.g[l], w);
            log_alpha = -(std::norm(w) - std::norm(st.w(l, k))) / sw2 + updated - ll[idx];
            accepted = metropolis(log_alpha, rng);
            if (accepted) {
                st.w(l, k) = w;
                ll[idx] = updated;
            }
        }
        trace.push(st.code, st.h, st.g, st.w.data, accepted, kNaN, static_cast<std::int32_t>(i), kNaN);
    }
    flag_if_stuck(trace, settings.stuck_window);
    return trace;
}

ChainTrace run_mcmc_av(const SystemConfig& config, const Observation& y, const ProposalScales& scales,
                       std::size_t iterations, std::size_t burn_in, RngStream& rng) {
    ChainSettings settings;
    settings.iterations = iterations;
    settings.burn_in = burn_in;
    return run_mcmc_av(config, y, scales, settings, rng);
}

double measure_acceptance(SamplerKind kind, const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                          const ProposalScales& scales, const PilotSettings& pilot, const RngStream& stream) {
    RngStream rng = stream;
    ChainSettings settings;
    settings.iterations = pilot.iterations;
    settings.burn_in = pilot.burn_in;
    const ChainTrace trace = kind == SamplerKind::abc ? run_mcmc_abc(config, y, spec, scales, settings, rng)
                                                      : run_mcmc_av(config, y, scales, settings, rng);
    std::size_t hits = 0;
    for (std::size_t n = pilot.burn_in; n < trace.size(); ++n) hits += trace.accepted(n) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(trace.size() - pilot.burn_in);
}

TuneResult tune_proposals(SamplerKind kind, const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                          const ProposalScales& initial, AcceptanceTarget target, RngStream& rng,
                          const PilotSettings& pilot) {
    const RngStream stream(rng.engine()(), 0);
    auto gap = [&](double acc) { return acc < target.low ? target.low - acc : (acc > target.high ? acc - target.high : 0.0); };

    TuneResult best{initial, 0.0, 0, false};
    double best_gap = std::numeric_limits<double>::infinity();
    ProposalScales scales = initial;
    double factor = 2.0;
    int last_direction = 0;
    for (std::size_t p = 1; p <= pilot.max_pilots; ++p) {
        const double acc = measure_acceptance(kind, config, y, spec, scales, pilot, stream);
        if (gap(acc) < best_gap) {
            best_gap = gap(acc);
            best = {scales, acc, p, false};
        }
        if (gap(acc) == 0.0) return {scales, acc, p, true};
        const int direction = acc < target.low ? -1 : 1;
        if (last_direction != 0 && direction != last_direction) factor = std::sqrt(factor);
        scales = direction < 0 ? scales.scaled(1.0 / factor) : scales.scaled(factor);
        last_direction = direction;
    }
    best.pilots = pilot.max_pilots;
    spdlog::warn("proposal tuning did not reach acceptance [{}, {}]; best pilot acceptance {:.3f}", target.low,
                 target.high, best.acceptance);
    return best;
}

double tune_tolerance(const SystemConfig& config, const Observation& y, const AbcSpec& spec,
                      const ProposalScales& scales, double min_acceptance, double lo, double hi, RngStream& rng,
                      const PilotSettings& pilot, std::size_t steps) {
    if (!(lo > 0.0 && hi > lo)) throw InvalidParameter("tune_tolerance needs 0 < lo < hi");
    const RngStream stream(rng.engine()(), 0);
    auto acceptance_at = [&](double eps) {
        AbcSpec trial = spec;
        trial.epsilon_min = eps;
        return measure_acceptance(SamplerKind::abc, config, y, trial, scales, pilot, stream);
    };
    if (acceptance_at(lo) >= min_acceptance) return lo;
    if (acceptance_at(hi) < min_acceptance) {
        spdlog::warn("tolerance tuning: acceptance at the upper bound {} is below {}", hi, min_acceptance);
        return hi;
    }
    for (std::size_t i = 0; i < steps; ++i) {
        const double mid = std::sqrt(lo * hi);
        if (acceptance_at(mid) >= min_acceptance) hi = mid;
        else lo = mid;
    }
    return hi;
}

}  // namespace relaysim
