#include <doctest.h>

#include <cmath>
#include <sstream>

#include "relaysim/detectors.hpp"
#include "relaysim/diagnostics.hpp"
#include "relaysim/errors.hpp"
#include "relaysim/harness.hpp"

using namespace relaysim;

namespace {

ChainTrace trace_of(const std::vector<std::uint64_t>& codes, std::size_t relays = 1, std::size_t symbols = 2) {
    ChainTrace t(relays, symbols, false, codes.size());
    const std::vector<Complex> ones(relays, {1.0, 0.0});
    for (auto c : codes) t.push(c, ones, ones, {}, true, 1.0, 0, 0.0);
    return t;
}

/// Straight-line SES-ZF: enumerate every index pair, zero relay noise, CSI
/// channels, Gaussian log-density at the destination plus log prior.
Codeword naive_ses_zf(const Observation& y, const SystemConfig& c) {
    const auto& pts = c.constellation.points();
    double best = -INFINITY;
    Codeword arg{0, 0};
    for (std::uint32_t a = 0; a < pts.size(); ++a)
        for (std::uint32_t b = 0; b < pts.size(); ++b) {
            const double pr = c.prior.probability(a * pts.size() + b);
            if (pr <= 0) continue;
            double score = std::log(pr);
            for (std::size_t l = 0; l < c.relays(); ++l) {
                const Complex m0 = std::tanh(pts[a] * c.csi.h_hat[l].real()) * c.csi.g_hat[l];
                const Complex m1 = std::tanh(pts[b] * c.csi.h_hat[l].real()) * c.csi.g_hat[l];
                score += -std::norm(y(l, 0) - m0) / c.noise.sigma_v_sq - std::norm(y(l, 1) - m1) / c.noise.sigma_v_sq;
                score += -2.0 * std::log(M_PI * c.noise.sigma_v_sq);
            }
            if (score > best) {
                best = score;
                arg = {a, b};
            }
        }
    return arg;
}

struct ErrorCounts {
    std::size_t zf = 0, omap = 0;
};

ErrorCounts count_errors(std::size_t relays, double snr, std::size_t frames, std::uint64_t seed) {
    const SystemConfig c = default_system(relays, snr);
    ErrorCounts e;
    for (std::size_t f = 0; f < frames; ++f) {
        RngStream rng = RngStream::derive(seed, {f});
        const Frame fr = generate_frame(c, rng);
        e.zf += symbol_errors(ses_zf_detect(fr.draw.y, c.csi, c).s_hat, fr.s);
        e.omap += symbol_errors(omap_detect(fr.draw.y, fr.channels, fr.draw.w, c).s_hat, fr.s);
    }
    return e;
}

}  // namespace

TEST_CASE("detector names") {
    for (auto m : {DetectorMethod::mcmc_abc, DetectorMethod::mcmc_av, DetectorMethod::ses_zf, DetectorMethod::omap,
                   DetectorMethod::exact_known_channel})
        CHECK(parse_detector_method(to_string(m)) == m);
    CHECK(to_string(DetectorMethod::ses_zf) == "ses-zf");
    CHECK_THROWS_AS(parse_detector_method("viterbi"), InvalidInput);
}

TEST_CASE("map_from_trace") {
    const CodewordSpace space(4, 2);
    const Detection all = map_from_trace(trace_of({3, 3, 3, 3, 3}), 0, space);
    CHECK(all.code == 3);
    CHECK(all.s_hat == Codeword{0, 3});
    CHECK(all.score == doctest::Approx(0.0));

    // burn-in entries are ignored
    const Detection skip = map_from_trace(trace_of({7, 7, 7, 10, 10, 10, 6, 6}), 3, space);
    CHECK(skip.code == 10);
    CHECK(skip.score == doctest::Approx(std::log(0.6)));

    const Detection tie = map_from_trace(trace_of({9, 5, 9, 5}), 0, space);
    CHECK(tie.code == 5);
    CHECK(map_from_trace(trace_of({5, 9, 5, 9}), 0, space).code == 5);

    // Only the post-burn-in multiset matters.
    const Detection a = map_from_trace(trace_of({0, 1, 2, 2, 4, 1, 2}), 1, space);
    const Detection b = map_from_trace(trace_of({0, 2, 1, 4, 2, 2, 1}), 1, space);
    CHECK(a.code == b.code);
    CHECK(a.score == b.score);
    CHECK_THROWS_AS(map_from_trace(trace_of({1, 2}), 2, space), InsufficientData);
}

TEST_CASE("SES-ZF recovers a noiseless frame at the CSI channels") {
    SystemConfig c = default_system(3, 300);
    RngStream rng(1, 0);
    for (std::uint64_t code = 0; code < c.codewords().size(); ++code) {
        const Codeword s = c.codewords().decode(code);
        const Observation y = simulate_forward(c, s, {c.csi.h_hat, c.csi.g_hat}, rng);
        CHECK(ses_zf_detect(y, c.csi, c).s_hat == s);
    }
}

TEST_CASE("SES-ZF agrees with a naive reimplementation") {
    const SystemConfig c = default_system(5, 10);
    for (std::uint64_t f = 0; f < 100; ++f) {
        RngStream rng(42, f);
        const Frame fr = generate_frame(c, rng);
        CHECK(ses_zf_detect(fr.draw.y, c.csi, c).s_hat == naive_ses_zf(fr.draw.y, c));
    }
}

TEST_CASE("OMAP with zero relay noise and CSI channels equals SES-ZF") {
    const SystemConfig c = default_system(4, 5);
    const ComplexGrid w(4, 2);
    for (std::uint64_t f = 0; f < 200; ++f) {
        RngStream rng(7, f);
        const Frame fr = generate_frame(c, rng);
        const Detection a = omap_detect(fr.draw.y, {c.csi.h_hat, c.csi.g_hat}, w, c);
        const Detection b = ses_zf_detect(fr.draw.y, c.csi, c);
        CHECK(a.code == b.code);
        CHECK(a.score == doctest::Approx(b.score));
    }
}

TEST_CASE("OMAP is essentially error free at 40 dB") {
    const SystemConfig c = default_system(5, 40);
    std::size_t correct = 0;
    for (std::uint64_t f = 0; f < 2000; ++f) {
        RngStream rng(40, f);
        const Frame fr = generate_frame(c, rng);
        correct += omap_detect(fr.draw.y, fr.channels, fr.draw.w, c).s_hat == fr.s;
    }
    CHECK(static_cast<double>(correct) / 2000.0 >= 0.999);
}

TEST_CASE("SES-ZF is worse than OMAP at 0 dB") {
    const ErrorCounts e = count_errors(5, 0, 2000, 100);
    CHECK(e.zf > e.omap);
}

TEST_CASE("OMAP SER is a lower bound for SES-ZF across the SNR grid") {
    for (double snr : {0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0}) {
        const ErrorCounts e = count_errors(5, snr, 2000, 200 + static_cast<std::uint64_t>(snr));
        CAPTURE(snr);
        CHECK(e.omap <= e.zf);
    }
}

TEST_CASE("exhaustive detectors refuse huge codeword spaces") {
    SystemConfig c = default_system(1, 10);
    c.prior = CodewordPrior::uniform(4, 12);
    const Observation y(1, 12);
    CHECK_THROWS_AS(ses_zf_detect(y, c.csi, c), BudgetExceeded);
    CHECK_THROWS_AS(omap_detect(y, {c.csi.h_hat, c.csi.g_hat}, ComplexGrid(1, 12), c), BudgetExceeded);
}

TEST_CASE("detections stay in the prior support") {
    SystemConfig c = default_system(2, 5);
    // Only three codewords carry mass.
    c.prior = CodewordPrior(c.codewords(), {{1, 0.5}, {6, 0.3}, {15, 0.2}});
    const SystemConfig gen = default_system(2, 5);
    for (std::uint64_t f = 0; f < 100; ++f) {
        RngStream rng(9, f);
        const Frame fr = generate_frame(gen, rng);
        const auto zf = ses_zf_detect(fr.draw.y, c.csi, c).code;
        const auto om = omap_detect(fr.draw.y, fr.channels, fr.draw.w, c).code;
        CHECK(c.prior.probability(zf) > 0);
        CHECK(c.prior.probability(om) > 0);
    }
}

TEST_CASE("an explicitly listed uniform prior scores like the implicit one") {
    SystemConfig a = default_system(3, 10);
    a.prior = CodewordPrior::uniform(4, 2);
    SystemConfig b = a;
    std::map<std::uint64_t, double> all;
    for (std::uint64_t i = 0; i < 16; ++i) all[i] = 1.0 / 16;
    b.prior = CodewordPrior(a.codewords(), all);
    for (std::uint64_t f = 0; f < 50; ++f) {
        RngStream rng(11, f);
        const Frame fr = generate_frame(a, rng);
        const Detection da = ses_zf_detect(fr.draw.y, a.csi, a), db = ses_zf_detect(fr.draw.y, b.csi, b);
        CHECK(da.code == db.code);
        CHECK(da.score == doctest::Approx(db.score));
    }
}

TEST_CASE("exact posterior with known channels") {
    SystemConfig c = default_system(2, 10);
    c.relay = RelayFunction::linear();
    c.prior = CodewordPrior::uniform(4, 1);
    const ChannelRealization ch{{{1.0, 0.0}, {0.5, 0.5}}, {{1.0, 0.0}, {2.0, 0.0}}};

    // y midway between the means of symbols -1 and 1 on every relay.
    Observation mid(2, 1);
    auto pmf = exact_posterior_known_channels(mid, ch, c);
    double total = 0;
    for (double p : pmf) total += p;
    CHECK(std::abs(total - 1.0) < 1e-10);
    CHECK(std::abs(pmf[1] - pmf[2]) < 1e-10);
    CHECK(std::abs(pmf[0] - pmf[3]) < 1e-10);

    SystemConfig quiet = c;
    quiet.noise = {1e-6, 1e-6};
    Observation on(2, 1);
    for (std::size_t l = 0; l < 2; ++l) on(l, 0) = 3.0 * ch.h[l] * ch.g[l];
    pmf = exact_posterior_known_channels(on, ch, quiet);
    CHECK(pmf[3] > 1.0 - 1e-10);

    SystemConfig tanh_relay = c;
    tanh_relay.relay = RelayFunction::tanh();
    CHECK_THROWS_AS(exact_posterior_known_channels(mid, ch, tanh_relay), InvalidParameter);
}

TEST_CASE("detection rows") {
    std::ostringstream out;
    write_detection_header(out);
    const Detection d{{1, 2}, 6, -1.5, DetectorMethod::omap};
    write_detection_row(out, 4, d, Codeword{1, 3});
    CHECK(out.str() == "frame,method,s_hat,score,truth,symbol_errors\n4,omap,1 2,-1.5,1 3,1\n");
    CHECK(symbol_errors(Codeword{0, 1, 2}, Codeword{0, 2, 2}) == 1);
}

TEST_CASE("exact posterior matches a hard-decision ABC chain with clamped channels") {
    SystemConfig c = default_system(2, 15);
    c.relay = RelayFunction::linear();
    const std::vector<double> ladder{64, 32, 16, 8, 4, 2, 1};
    for (std::uint64_t f = 0; f < 3; ++f) {
        RngStream data(1000 + f, 0);
        const Frame fr = generate_frame(c, data);
        const auto exact = exact_posterior_known_channels(fr.draw.y, fr.channels, c);
        AbcSpec spec;
        spec.summary = SummarySpec{SummarySpec::Kind::identity};
        spec.weighting = WeightingFunction::Kind::hard;
        spec.epsilon_min = 0.5;
        ChainSettings settings;
        settings.iterations = 100000;
        settings.burn_in = 20000;
        settings.freeze_channels = true;
        settings.initial_channels = fr.channels;
        RngStream rng(f, 2);
        const ChainTrace t = run_mcmc_abc_ladder(c, fr.draw.y, spec, {}, settings, ladder, 20000, rng);
        CAPTURE(f);
        CHECK(total_variation(codeword_frequencies(t, settings.burn_in, 16), exact) < 0.05);
    }
}
