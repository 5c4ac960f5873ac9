#include "relaysim/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "relaysim/errors.hpp"

namespace relaysim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_budget(const CodewordSpace& space) {
    if (space.size() > kExhaustiveBudget)
        throw BudgetExceeded("exhaustive search over " + std::to_string(space.size()) + " codewords exceeds the limit of " +
                             std::to_string(kExhaustiveBudget));
}

void check_observation(const Observation& y, const SystemConfig& config) {
    if (y.relays != config.relays() || y.symbols != config.symbols())
        throw InvalidInput("observation dimensions do not match the configuration");
}

/// table[k * M + m]: summed log-likelihood of symbol m at position k.
Detection exhaustive(const std::vector<double>& table, const SystemConfig& config, DetectorMethod method) {
    const auto& space = config.codewords();
    const std::size_t M = space.alphabet();
    const std::size_t K = space.length();
    Codeword word(K, 0);
    Detection best;
    best.method = method;
    best.score = kNegInf;
    bool found = false;
    for (std::uint64_t code = 0; code < space.size(); ++code) {
        const double lp = config.prior.log_probability(code);
        if (lp != kNegInf) {
            double score = lp;
            for (std::size_t k = 0; k < K; ++k) score += table[k * M + word[k]];
            if (!found || score > best.score) {
                best.score = score;
                best.code = code;
                found = true;
            }
        }
        for (std::size_t k = K; k-- > 0;) {
            if (++word[k] < M) break;
            word[k] = 0;
        }
    }
    best.s_hat = space.decode(best.code);
    return best;
}

}  // namespace

std::string to_string(DetectorMethod method) {
    switch (method) {
        case DetectorMethod::mcmc_abc: return "mcmc-abc";
        case DetectorMethod::mcmc_av: return "mcmc-av";
        case DetectorMethod::ses_zf: return "ses-zf";
        case DetectorMethod::omap: return "omap";
        case DetectorMethod::exact_known_channel: return "exact-known-channel";
    }
    return "unknown";
}

DetectorMethod parse_detector_method(const std::string& name) {
    for (auto m : {DetectorMethod::mcmc_abc, DetectorMethod::mcmc_av, DetectorMethod::ses_zf, DetectorMethod::omap,
                   DetectorMethod::exact_known_channel})
        if (to_string(m) == name) return m;
    throw InvalidInput("unknown detector '" + name + "'");
}

Detection map_from_trace(const ChainTrace& trace, std::size_t burn_in, const CodewordSpace& space,
                         DetectorMethod method) {
    if (trace.size() <= burn_in) throw InsufficientData("trace is not longer than the burn-in");
    std::unordered_map<std::uint64_t, std::size_t> counts;
    for (std::size_t n = burn_in; n < trace.size(); ++n) ++counts[trace.code(n)];
    std::uint64_t best_code = 0;
    std::size_t best_count = 0;
    for (const auto& [code, count] : counts)
        if (count > best_count || (count == best_count && code < best_code)) {
            best_code = code;
            best_count = count;
        }
    Detection d;
    d.code = best_code;
    d.s_hat = space.decode(best_code);
    d.score = std::log(static_cast<double>(best_count) / static_cast<double>(trace.size() - burn_in));
    d.method = method;
    return d;
}

Detection ses_zf_detect(const Observation& y, const ChannelCsi& csi, const SystemConfig& config) {
    check_observation(y, config);
    check_budget(config.codewords());
    const std::size_t M = config.constellation.size();
    const std::size_t K = config.symbols();
    std::vector<double> table(K * M, 0.0);
    for (std::size_t l = 0; l < config.relays(); ++l)
        for (std::size_t m = 0; m < M; ++m) {
            const Complex mean = config.relay(config.constellation[m] * csi.h_hat[l]) * csi.g_hat[l];
            for (std::size_t k = 0; k < K; ++k) table[k * M + m] += log_cn_density(y(l, k), mean, config.noise.sigma_v_sq);
        }
    return exhaustive(table, config, DetectorMethod::ses_zf);
}

Detection omap_detect(const Observation& y, const ChannelRealization& channels, const ComplexGrid& w,
                      const SystemConfig& config) {
    check_observation(y, config);
    check_budget(config.codewords());
    if (w.relays != y.relays || w.symbols != y.symbols) throw InvalidInput("relay noise has the wrong shape");
    const std::size_t M = config.constellation.size();
    const std::size_t K = config.symbols();
    std::vector<double> table(K * M, 0.0);
    for (std::size_t l = 0; l < config.relays(); ++l)
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t m = 0; m < M; ++m) {
                const Complex mean = config.relay(config.constellation[m] * channels.h[l] + w(l, k)) * channels.g[l];
                table[k * M + m] += log_cn_density(y(l, k), mean, config.noise.sigma_v_sq);
            }
    return exhaustive(table, config, DetectorMethod::omap);
}

std::vector<double> exact_posterior_known_channels(const Observation& y, const ChannelRealization& channels,
                                                   const SystemConfig& config) {
    if (!config.relay.is_linear()) throw InvalidParameter("exact posterior requires a linear relay");
    check_observation(y, config);
    const auto& space = config.codewords();
    check_budget(space);
    const std::size_t M = config.constellation.size();
    const std::size_t K = config.symbols();
    std::vector<double> table(K * M, 0.0);
    for (std::size_t l = 0; l < config.relays(); ++l) {
        const Complex hg = channels.h[l] * channels.g[l];
        const double var = std::norm(channels.g[l]) * config.noise.sigma_w_sq + config.noise.sigma_v_sq;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t m = 0; m < M; ++m) table[k * M + m] += log_cn_density(y(l, k), config.constellation[m] * hg, var);
    }
    std::vector<double> logp(space.size());
    Codeword word(K);
    double top = kNegInf;
    for (std::uint64_t code = 0; code < space.size(); ++code) {
        space.decode_into(code, word);
        double v = config.prior.log_probability(code);
        for (std::size_t k = 0; k < K; ++k) v += table[k * M + word[k]];
        logp[code] = v;
        top = std::max(top, v);
    }
    double sum = 0.0;
    for (double& v : logp) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double& v : logp) v /= sum;
    return logp;
}

std::size_t symbol_errors(std::span<const std::uint32_t> detected, std::span<const std::uint32_t> truth) {
    if (detected.size() != truth.size()) throw InvalidInput("codeword length mismatch");
    std::size_t errors = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) errors += detected[k] != truth[k] ? 1 : 0;
    return errors;
}

void write_detection_header(std::ostream& out) { out << "frame,method,s_hat,score,truth,symbol_errors\n"; }

void write_detection_row(std::ostream& out, std::size_t frame, const Detection& d, const Codeword& truth) {
    auto join = [](const Codeword& c) {
        std::string s;
        for (std::size_t k = 0; k < c.size(); ++k) s += (k ? " " : "") + std::to_string(c[k]);
        return s;
    };
    out << frame << ',' << to_string(d.method) << ',' << join(d.s_hat) << ',' << d.score << ',' << join(truth) << ','
        << symbol_errors(d.s_hat, truth) << '\n';
}

}  // namespace relaysim
