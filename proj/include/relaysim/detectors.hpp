#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "relaysim/relay_model.hpp"
#include "relaysim/samplers.hpp"

namespace relaysim {

enum class DetectorMethod { mcmc_abc, mcmc_av, ses_zf, omap, exact_known_channel };

std::string to_string(DetectorMethod method);
DetectorMethod parse_detector_method(const std::string& name);

struct Detection {
    Codeword s_hat;
    std::uint64_t code = 0;
    /// Log empirical frequency for chain-based detection, log MAP objective otherwise.
    double score = 0.0;
    DetectorMethod method = DetectorMethod::mcmc_abc;
};

/// Largest codeword space the exhaustive detectors will enumerate.
inline constexpr std::uint64_t kExhaustiveBudget = 10'000'000;

/// Most frequent codeword among trace entries [burn_in, size). Ties go to the
/// smallest code.
Detection map_from_trace(const ChainTrace& trace, std::size_t burn_in, const CodewordSpace& space,
                         DetectorMethod method = DetectorMethod::mcmc_abc);

/// argmax_s sum_l log CN(y_l; f(s h_hat_l) g_hat_l, sigma_v^2 I) + log p(s).
Detection ses_zf_detect(const Observation& y, const ChannelCsi& csi, const SystemConfig& config);

/// argmax_s sum_l log CN(y_l; f(s h_l + w_l) g_l, sigma_v^2 I) + log p(s) using
/// the true channels and relay noise.
Detection omap_detect(const Observation& y, const ChannelRealization& channels, const ComplexGrid& w,
                      const SystemConfig& config);

/// Normalised posterior over all codes for a linear relay with known channels.
std::vector<double> exact_posterior_known_channels(const Observation& y, const ChannelRealization& channels,
                                                   const SystemConfig& config);

std::size_t symbol_errors(std::span<const std::uint32_t> detected, std::span<const std::uint32_t> truth);

void write_detection_header(std::ostream& out);
void write_detection_row(std::ostream& out, std::size_t frame, const Detection& d, const Codeword& truth);

}  // namespace relaysim
