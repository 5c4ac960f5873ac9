#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "relaysim/numerics.hpp"

namespace relaysim {

/// Real-valued symbol alphabet (e.g. 4-PAM {-3,-1,1,3}).
class Constellation {
public:
    explicit Constellation(std::vector<double> points);

    static Constellation pam(std::size_t m);

    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<double>& points() const noexcept { return points_; }
    double operator[](std::size_t i) const { return points_[i]; }
    /// Mean symbol energy (1/M) sum |p|^2.
    double mean_energy() const noexcept { return energy_; }
    /// Index of `value`, or throws InvalidInput if it is not a point.
    std::size_t index_of(double value) const;

private:
    std::vector<double> points_;
    double energy_ = 0.0;
};

/// A codeword as a sequence of constellation indices s_1..s_K.
using Codeword = std::vector<std::uint32_t>;

/// Bijection between codewords and integer codes in [0, M^K), lexicographic
/// in constellation index (first symbol most significant).
class CodewordSpace {
public:
    CodewordSpace(std::size_t alphabet, std::size_t length);

    std::size_t alphabet() const noexcept { return m_; }
    std::size_t length() const noexcept { return k_; }
    std::uint64_t size() const noexcept { return size_; }

    std::uint64_t encode(std::span<const std::uint32_t> word) const;
    Codeword decode(std::uint64_t code) const;
    void decode_into(std::uint64_t code, std::span<std::uint32_t> out) const;

private:
    std::size_t m_;
    std::size_t k_;
    std::uint64_t size_;
};

/// Prior pmf over codewords: explicitly listed probabilities, with the
/// remaining mass spread uniformly over every codeword not listed.
class CodewordPrior {
public:
    CodewordPrior(CodewordSpace space, std::map<std::uint64_t, double> listed);

    static CodewordPrior uniform(std::size_t alphabet, std::size_t length);
    /// Two-mode prior used throughout the default experiments: [1,1] and
    /// [-1,1] at 0.3 each, the other M^K - 2 codewords equiprobable.
    static CodewordPrior two_mode_default(const Constellation& constellation);

    const CodewordSpace& space() const noexcept { return space_; }
    std::size_t length() const noexcept { return space_.length(); }
    const std::map<std::uint64_t, double>& listed() const noexcept { return listed_; }
    /// Mass carried by each unlisted codeword.
    double unlisted_probability() const noexcept { return unlisted_each_; }

    double probability(std::uint64_t code) const;
    double log_probability(std::uint64_t code) const;
    std::uint64_t sample(RngStream& rng) const;
    /// Highest-probability codeword; ties go to the smallest code.
    std::uint64_t mode() const;
    /// Sum over the whole support, for validation.
    double total_mass() const;

private:
    std::uint64_t nth_unlisted(std::uint64_t j) const;

    CodewordSpace space_;
    std::map<std::uint64_t, double> listed_;
    double unlisted_each_ = 0.0;
    std::uint64_t unlisted_count_ = 0;
    std::vector<std::uint64_t> cumulative_codes_;
    std::vector<double> cumulative_mass_;
};

/// Partial CSI: channel estimates and estimation error variances.
struct ChannelCsi {
    std::vector<Complex> h_hat;
    std::vector<Complex> g_hat;
    double sigma_h_sq = 0.1;
    double sigma_g_sq = 0.1;

    std::size_t relays() const noexcept { return h_hat.size(); }
};

struct ChannelRealization {
    std::vector<Complex> h;
    std::vector<Complex> g;

    std::size_t relays() const noexcept { return h.size(); }
};

struct NoiseSpec {
    double sigma_w_sq = 1.0;  ///< relay receiver noise
    double sigma_v_sq = 1.0;  ///< destination receiver noise
};

/// Memoryless relay processing function f applied to each received sample.
class RelayFunction {
public:
    enum class Kind { linear, tanh, custom };
    enum class ComplexMode { componentwise, modulus_phase };

    RelayFunction() = default;
    RelayFunction(Kind kind, ComplexMode mode) : kind_(kind), mode_(mode) {}

    static RelayFunction linear() { return {Kind::linear, ComplexMode::componentwise}; }
    static RelayFunction tanh(ComplexMode mode = ComplexMode::componentwise) { return {Kind::tanh, mode}; }
    static RelayFunction custom(std::string name, std::function<double(double)> map,
                                ComplexMode mode = ComplexMode::componentwise);

    Kind kind() const noexcept { return kind_; }
    ComplexMode mode() const noexcept { return mode_; }
    const std::string& name() const noexcept { return name_; }
    bool is_linear() const noexcept { return kind_ == Kind::linear; }

    /// Throws NumericDomainError if a custom map yields a non-finite value.
    Complex operator()(Complex r) const;

private:
    double scalar(double x) const;

    Kind kind_ = Kind::tanh;
    ComplexMode mode_ = ComplexMode::componentwise;
    std::string name_;
    std::function<double(double)> map_;
};

std::vector<Complex> apply_relay(const RelayFunction& f, std::span<const Complex> r);

/// Row-major L x K grid of complex samples (relay l, symbol k).
struct ComplexGrid {
    std::size_t relays = 0;
    std::size_t symbols = 0;
    std::vector<Complex> data;

    ComplexGrid() = default;
    ComplexGrid(std::size_t l, std::size_t k) : relays(l), symbols(k), data(l * k) {}

    Complex& operator()(std::size_t l, std::size_t k) { return data[l * symbols + k]; }
    Complex operator()(std::size_t l, std::size_t k) const { return data[l * symbols + k]; }
    std::span<const Complex> row(std::size_t l) const { return {data.data() + l * symbols, symbols}; }
};

/// Signal Y received at the destination.
using Observation = ComplexGrid;

struct SystemConfig {
    Constellation constellation = Constellation::pam(4);
    CodewordPrior prior = CodewordPrior::two_mode_default(Constellation::pam(4));
    ChannelCsi csi;
    NoiseSpec noise;
    RelayFunction relay = RelayFunction::tanh();

    std::size_t relays() const noexcept { return csi.relays(); }
    std::size_t symbols() const noexcept { return prior.length(); }
    const CodewordSpace& codewords() const noexcept { return prior.space(); }

    /// Throws ConfigError on inconsistent dimensions or invalid parameters.
    void validate() const;
};

/// Default experiment system: 4-PAM, K = 2, two-mode prior, unit channel
/// estimates with error variance 0.1, componentwise tanh relays.
SystemConfig default_system(std::size_t relays, double snr_db);

/// sigma_w^2 = sigma_v^2 = E_s / 10^(snr_db/10).
NoiseSpec snr_to_noise(double snr_db, const Constellation& constellation);

/// Independent draws h_l ~ CN(h_hat_l, sigma_h^2), g_l ~ CN(g_hat_l, sigma_g^2).
ChannelRealization draw_channels(const ChannelCsi& csi, RngStream& rng);

/// Output of one forward simulation together with the relay noise used.
struct ForwardDraw {
    Observation y;
    ComplexGrid w;
};

/// Y^(l) = f(s h_l + W^(l)) g_l + V^(l). All W are drawn before all V.
Observation simulate_forward(const SystemConfig& config, std::span<const std::uint32_t> s,
                             const ChannelRealization& channels, RngStream& rng);
ForwardDraw simulate_forward_with_noise(const SystemConfig& config, std::span<const std::uint32_t> s,
                                        const ChannelRealization& channels, RngStream& rng);

/// Allocation-free forward simulation for the samplers. `symbols` holds the
/// symbol values (not indices); `w` is scratch of size L*K.
void simulate_into(const SystemConfig& config, std::span<const double> symbols, std::span<const Complex> h,
                   std::span<const Complex> g, RngStream& rng, std::span<Complex> w, std::span<Complex> out);

/// Closed-form per-relay likelihood for a linear relay:
/// prod_k CN(y_k; s_k h g, |g|^2 sigma_w^2 + sigma_v^2).
double linear_log_likelihood(std::span<const Complex> y_l, std::span<const double> symbols, Complex h, Complex g,
                             const NoiseSpec& noise);
double linear_likelihood(std::span<const Complex> y_l, std::span<const double> symbols, Complex h, Complex g,
                         const NoiseSpec& noise);

/// Symbol values of a codeword.
std::vector<double> symbol_values(const Constellation& c, std::span<const std::uint32_t> word);

}  // namespace relaysim
