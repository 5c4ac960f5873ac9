#include "relaysim/relay_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "relaysim/errors.hpp"

namespace relaysim {

Constellation::Constellation(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw InvalidParameter("constellation needs at least 2 points");
    std::set<double> distinct(points_.begin(), points_.end());
    if (distinct.size() != points_.size()) throw InvalidParameter("constellation points must be distinct");
    for (double p : points_) {
        if (!std::isfinite(p)) throw InvalidParameter("constellation points must be finite");
        energy_ += p * p;
    }
    energy_ /= static_cast<double>(points_.size());
    if (!(energy_ > 0.0)) throw InvalidParameter("constellation has zero mean energy");
}

Constellation Constellation::pam(std::size_t m) {
    std::vector<double> pts(m);
    for (std::size_t i = 0; i < m; ++i) pts[i] = 2.0 * static_cast<double>(i) - static_cast<double>(m - 1);
    return Constellation(std::move(pts));
}

std::size_t Constellation::index_of(double value) const {
    for (std::size_t i = 0; i < points_.size(); ++i)
        if (points_[i] == value) return i;
    throw InvalidInput("value " + std::to_string(value) + " is not a constellation point");
}

CodewordSpace::CodewordSpace(std::size_t alphabet, std::size_t length) : m_(alphabet), k_(length), size_(1) {
    if (alphabet < 2) throw InvalidParameter("codeword alphabet must have at least 2 symbols");
    if (length < 1) throw InvalidParameter("codeword length must be at least 1");
    constexpr std::uint64_t limit = std::uint64_t{1} << 62;
    for (std::size_t i = 0; i < length; ++i) {
        if (size_ > limit / alphabet) throw InvalidParameter("codeword space M^K exceeds 2^62");
        size_ *= alphabet;
    }
}

std::uint64_t CodewordSpace::encode(std::span<const std::uint32_t> word) const {
    if (word.size() != k_) throw InvalidInput("codeword has wrong length");
    std::uint64_t code = 0;
    for (auto s : word) {
        if (s >= m_) throw InvalidInput("codeword symbol index out of range");
        code = code * m_ + s;
    }
    return code;
}

Codeword CodewordSpace::decode(std::uint64_t code) const {
    Codeword w(k_);
    decode_into(code, w);
    return w;
}

void CodewordSpace::decode_into(std::uint64_t code, std::span<std::uint32_t> out) const {
    for (std::size_t i = k_; i-- > 0;) {
        out[i] = static_cast<std::uint32_t>(code % m_);
        code /= m_;
    }
}

CodewordPrior::CodewordPrior(CodewordSpace space, std::map<std::uint64_t, double> listed)
    : space_(space), listed_(std::move(listed)) {
    double listed_mass = 0.0;
    for (const auto& [code, p] : listed_) {
        if (code >= space_.size()) throw InvalidParameter("prior lists a codeword outside the codeword space");
        if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidParameter("prior probabilities must be finite and >= 0");
        listed_mass += p;
    }
    if (listed_mass > 1.0 + 1e-12) throw InvalidParameter("listed prior mass exceeds 1");
    unlisted_count_ = space_.size() - listed_.size();
    const double residual = std::max(0.0, 1.0 - listed_mass);
    if (unlisted_count_ == 0) {
        if (residual > 1e-12) throw InvalidParameter("prior probabilities do not sum to 1");
    } else {
        unlisted_each_ = residual / static_cast<double>(unlisted_count_);
    }
    double acc = 0.0;
    for (const auto& [code, p] : listed_) {
        if (p <= 0.0) continue;
        acc += p;
        cumulative_codes_.push_back(code);
        cumulative_mass_.push_back(acc);
    }
}

CodewordPrior CodewordPrior::uniform(std::size_t alphabet, std::size_t length) {
    return CodewordPrior(CodewordSpace(alphabet, length), {});
}

CodewordPrior CodewordPrior::two_mode_default(const Constellation& constellation) {
    CodewordSpace space(constellation.size(), 2);
    const std::uint32_t plus_one = static_cast<std::uint32_t>(constellation.index_of(1.0));
    const std::uint32_t minus_one = static_cast<std::uint32_t>(constellation.index_of(-1.0));
    const std::array<std::uint32_t, 2> a{plus_one, plus_one};
    const std::array<std::uint32_t, 2> b{minus_one, plus_one};
    return CodewordPrior(space, {{space.encode(a), 0.3}, {space.encode(b), 0.3}});
}

double CodewordPrior::probability(std::uint64_t code) const {
    auto it = listed_.find(code);
    return it != listed_.end() ? it->second : unlisted_each_;
}

double CodewordPrior::log_probability(std::uint64_t code) const {
    const double p = probability(code);
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

std::uint64_t CodewordPrior::nth_unlisted(std::uint64_t j) const {
    std::uint64_t code = j;
    for (const auto& [listed_code, p] : listed_) {
        if (listed_code <= code) ++code;
        else break;
    }
    return code;
}

std::uint64_t CodewordPrior::sample(RngStream& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cumulative_mass_.begin(), cumulative_mass_.end(), u);
    if (it != cumulative_mass_.end()) return cumulative_codes_[static_cast<std::size_t>(it - cumulative_mass_.begin())];
    if (unlisted_count_ == 0 || unlisted_each_ <= 0.0) return cumulative_codes_.back();
    return nth_unlisted(rng.index(unlisted_count_));
}

std::uint64_t CodewordPrior::mode() const {
    double best_p = -1.0;
    std::uint64_t best = 0;
    for (const auto& [code, p] : listed_) {
        if (p > best_p) {
            best_p = p;
            best = code;
        }
    }
    if (unlisted_count_ > 0) {
        const std::uint64_t first_unlisted = nth_unlisted(0);
        if (unlisted_each_ > best_p || (unlisted_each_ == best_p && first_unlisted < best)) best = first_unlisted;
    }
    return best;
}

double CodewordPrior::total_mass() const {
    double total = unlisted_each_ * static_cast<double>(unlisted_count_);
    for (const auto& [code, p] : listed_) total += p;
    return total;
}

RelayFunction RelayFunction::custom(std::string name, std::function<double(double)> map, ComplexMode mode) {
    RelayFunction f(Kind::custom, mode);
    f.name_ = std::move(name);
    f.map_ = std::move(map);
    return f;
}

double RelayFunction::scalar(double x) const {
    switch (kind_) {
        case Kind::linear:
            return x;
        case Kind::tanh:
            return std::tanh(x);
        case Kind::custom: {
            const double v = map_(x);
            if (!std::isfinite(v))
                throw NumericDomainError("relay map '" + name_ + "' returned a non-finite value at " + std::to_string(x));
            return v;
        }
    }
    return x;
}

Complex RelayFunction::operator()(Complex r) const {
    if (kind_ == Kind::linear) return r;
    if (mode_ == ComplexMode::componentwise) return {scalar(r.real()), scalar(r.imag())};
    const double mag = std::abs(r);
    if (mag == 0.0) return {scalar(0.0), 0.0};
    return scalar(mag) * (r / mag);
}

std::vector<Complex> apply_relay(const RelayFunction& f, std::span<const Complex> r) {
    std::vector<Complex> out(r.size());
    std::transform(r.begin(), r.end(), out.begin(), [&](Complex z) { return f(z); });
    return out;
}

void SystemConfig::validate() const {
    if (prior.space().alphabet() != constellation.size())
        throw ConfigError("prior", "codeword alphabet does not match the constellation size");
    if (std::abs(prior.total_mass() - 1.0) > 1e-12) throw ConfigError("prior", "probabilities do not sum to 1");
    if (csi.h_hat.empty()) throw ConfigError("csi.h_hat", "at least one relay is required");
    if (csi.h_hat.size() != csi.g_hat.size())
        throw ConfigError("csi.g_hat", "h_hat and g_hat must have the same length");
    if (!(csi.sigma_h_sq > 0.0)) throw ConfigError("csi.sigma_h_sq", "must be > 0");
    if (!(csi.sigma_g_sq > 0.0)) throw ConfigError("csi.sigma_g_sq", "must be > 0");
    if (!(noise.sigma_w_sq > 0.0)) throw ConfigError("noise.sigma_w_sq", "must be > 0");
    if (!(noise.sigma_v_sq > 0.0)) throw ConfigError("noise.sigma_v_sq", "must be > 0");
}

NoiseSpec snr_to_noise(double snr_db, const Constellation& constellation) {
    if (!std::isfinite(snr_db)) throw InvalidParameter("snr_db must be finite");
    const double variance = constellation.mean_energy() / std::pow(10.0, snr_db / 10.0);
    return {variance, variance};
}

SystemConfig default_system(std::size_t relays, double snr_db) {
    SystemConfig config;
    config.csi.h_hat.assign(relays, Complex{1.0, 0.0});
    config.csi.g_hat.assign(relays, Complex{1.0, 0.0});
    config.csi.sigma_h_sq = 0.1;
    config.csi.sigma_g_sq = 0.1;
    config.noise = snr_to_noise(snr_db, config.constellation);
    return config;
}

ChannelRealization draw_channels(const ChannelCsi& csi, RngStream& rng) {
    ChannelRealization ch;
    ch.h.resize(csi.relays());
    ch.g.resize(csi.relays());
    for (std::size_t l = 0; l < csi.relays(); ++l) ch.h[l] = csi.h_hat[l] + rng.complex_normal(csi.sigma_h_sq);
    for (std::size_t l = 0; l < csi.relays(); ++l) ch.g[l] = csi.g_hat[l] + rng.complex_normal(csi.sigma_g_sq);
    return ch;
}

std::vector<double> symbol_values(const Constellation& c, std::span<const std::uint32_t> word) {
    std::vector<double> v(word.size());
    for (std::size_t k = 0; k < word.size(); ++k) v[k] = c[word[k]];
    return v;
}

void simulate_into(const SystemConfig& config, std::span<const double> symbols, std::span<const Complex> h,
                   std::span<const Complex> g, RngStream& rng, std::span<Complex> w, std::span<Complex> out) {
    const std::size_t L = h.size();
    const std::size_t K = symbols.size();
    for (std::size_t i = 0; i < L * K; ++i) w[i] = rng.complex_normal(config.noise.sigma_w_sq);
    for (std::size_t i = 0; i < L * K; ++i) out[i] = rng.complex_normal(config.noise.sigma_v_sq);
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t i = l * K + k;
            out[i] += config.relay(symbols[k] * h[l] + w[i]) * g[l];
        }
    }
}

ForwardDraw simulate_forward_with_noise(const SystemConfig& config, std::span<const std::uint32_t> s,
                                        const ChannelRealization& channels, RngStream& rng) {
    const std::size_t L = channels.relays();
    const std::size_t K = s.size();
    if (K != config.symbols()) throw InvalidInput("codeword length does not match the configuration");
    if (L != config.relays()) throw InvalidInput("channel realization does not match the relay count");
    ForwardDraw draw{Observation(L, K), ComplexGrid(L, K)};
    const auto values = symbol_values(config.constellation, s);
    simulate_into(config, values, channels.h, channels.g, rng, draw.w.data, draw.y.data);
    return draw;
}

Observation simulate_forward(const SystemConfig& config, std::span<const std::uint32_t> s,
                             const ChannelRealization& channels, RngStream& rng) {
    return simulate_forward_with_noise(config, s, channels, rng).y;
}

double linear_log_likelihood(std::span<const Complex> y_l, std::span<const double> symbols, Complex h, Complex g,
                             const NoiseSpec& noise) {
    const double variance = std::norm(g) * noise.sigma_w_sq + noise.sigma_v_sq;
    double total = 0.0;
    for (std::size_t k = 0; k < y_l.size(); ++k) total += log_cn_density(y_l[k], symbols[k] * h * g, variance);
    return total;
}

double linear_likelihood(std::span<const Complex> y_l, std::span<const double> symbols, Complex h, Complex g,
                         const NoiseSpec& noise) {
    return std::exp(linear_log_likelihood(y_l, symbols, h, g, noise));
}

}  // namespace relaysim
