#include "relaysim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "relaysim/diagnostics.hpp"
#include "relaysim/errors.hpp"

namespace relaysim {

namespace {

enum Purpose : std::uint64_t {
    kData = 0,
    kCovariance = 1,
    kPilotFrame = 2,
    kTolerance = 3,
    kAbcScales = 4,
    kAvScales = 5,
};

bool needs_covariance(DistanceMetric::Kind kind) {
    return kind == DistanceMetric::Kind::mahalanobis || kind == DistanceMetric::Kind::scaled_euclidean;
}

bool contains(const std::vector<DetectorMethod>& v, DetectorMethod m) {
    return std::find(v.begin(), v.end(), m) != v.end();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Frame generate_frame(const SystemConfig& config, RngStream& rng) {
    Frame f;
    f.s = config.codewords().decode(config.prior.sample(rng));
    f.channels = draw_channels(config.csi, rng);
    f.draw = simulate_forward_with_noise(config, f.s, f.channels, rng);
    return f;
}


SystemConfig SystemTemplate::instantiate(std::size_t relays, double snr_db) const {
    SystemConfig config;
    config.constellation = constellation;
    config.prior = prior;
    config.csi.h_hat.assign(relays, h_hat);
    config.csi.g_hat.assign(relays, g_hat);
    config.csi.sigma_h_sq = sigma_h_sq;
    config.csi.sigma_g_sq = sigma_g_sq;
    config.noise = snr_to_noise(snr_db, constellation);
    config.relay = relay;
    config.validate();
    return config;
}

void ExperimentPlan::validate() const {
    if (relays.empty()) throw ConfigError("relays", "grid must not be empty");
    for (std::size_t L : relays)
        if (L == 0) throw ConfigError("relays", "relay counts must be >= 1");
    if (snr_db.empty()) throw ConfigError("snr_db", "grid must not be empty");
    for (double s : snr_db)
        if (!std::isfinite(s)) throw ConfigError("snr_db", "values must be finite");
    if (frames == 0) throw ConfigError("frames", "must be >= 1");
    if (detectors.empty()) throw ConfigError("detectors", "at least one detector is required");
    if (sampler.iterations < 2 || sampler.burn_in >= sampler.iterations)
        throw ConfigError("sampler.burn_in", "must be smaller than sampler.iterations");
    if (!(abc.epsilon_min > 0.0)) throw ConfigError("abc.epsilon_min", "must be > 0");
    if (abc.synthetic_draws == 0) throw ConfigError("abc.synthetic_draws", "must be >= 1");
    if (abc.tune_tolerance) {
        if (!(abc.target_acceptance > 0.0 && abc.target_acceptance < 1.0))
            throw ConfigError("abc.target_acceptance", "must lie in (0, 1)");
        if (!(abc.tolerance_lo > 0.0 && abc.tolerance_hi > abc.tolerance_lo))
            throw ConfigError("abc.tolerance_range", "needs 0 < lo < hi");
        if (abc.pilot_frames == 0) throw ConfigError("abc.pilot_frames", "must be >= 1");
    }
    auto check_scales = [](const ProposalScales& s) {
        if (!(s.sigma_g_rw_sq > 0.0 && s.sigma_h_rw_sq > 0.0 && s.sigma_w_rw_sq > 0.0))
            throw ConfigError("sampler.scales", "random-walk variances must be > 0");
    };
    check_scales(sampler.scales);
    if (sampler.pilot.burn_in >= sampler.pilot.iterations)
        throw ConfigError("sampler.pilot", "burn_in must be smaller than iterations");
    try {
        abc.summary.validate();
    } catch (const Error& e) {
        throw ConfigError("abc.summary", e.what());
    }
    (void)system.instantiate(relays.front(), snr_db.front());
}

RngStream frame_stream(std::uint64_t seed, std::size_t relays, double snr_db, std::uint64_t frame,
                       std::uint64_t purpose) {
    const auto snr_key = static_cast<std::uint64_t>(std::llround(snr_db * 1000.0));
    return RngStream::derive(seed, {static_cast<std::uint64_t>(relays), snr_key, frame, purpose});
}

CellSetup prepare_cell(const ExperimentPlan& plan, std::size_t relays, double snr_db) {
    CellSetup cell;
    cell.relays = relays;
    cell.snr_db = snr_db;
    cell.config = plan.system.instantiate(relays, snr_db);
    cell.chain.iterations = plan.sampler.iterations;
    cell.chain.burn_in = plan.sampler.burn_in;
    cell.chain.scan = plan.sampler.scan;
    cell.abc_scales = plan.sampler.scales;
    cell.av_scales = plan.sampler.scales;

    const bool abc = contains(plan.detectors, DetectorMethod::mcmc_abc);
    const bool av = contains(plan.detectors, DetectorMethod::mcmc_av);
    AbcSpec& spec = cell.abc;
    spec.summary = plan.abc.summary;
    spec.weighting = plan.abc.weighting;
    spec.epsilon_min = plan.abc.epsilon_min;
    spec.anneal = plan.abc.anneal;
    spec.synthetic_draws = plan.abc.synthetic_draws;
    spec.refresh_current_distance = plan.abc.refresh_current_distance;
    if (!abc && !av) return cell;

    std::vector<Observation> pilots;
    for (std::size_t p = 0; p < std::max<std::size_t>(plan.abc.pilot_frames, 1); ++p) {
        RngStream rng = frame_stream(plan.seed, relays, snr_db, p, kPilotFrame);
        pilots.push_back(generate_frame(cell.config, rng).draw.y);
    }

    if (abc) {
        Matrix cov;
        if (needs_covariance(plan.abc.metric)) {
            RngStream rng = frame_stream(plan.seed, relays, snr_db, 0, kCovariance);
            cov = estimate_summary_covariance(cell.config, spec.summary, plan.abc.covariance_draws, rng);
        }
        spec.metric = make_metric(plan.abc.metric, cov, plan.abc.lp_exponent);
        if (plan.abc.tune_tolerance) {
            std::vector<double> eps;
            for (std::size_t p = 0; p < pilots.size(); ++p) {
                RngStream rng = frame_stream(plan.seed, relays, snr_db, p, kTolerance);
                eps.push_back(tune_tolerance(cell.config, pilots[p], spec, cell.abc_scales,
                                             plan.abc.target_acceptance, plan.abc.tolerance_lo,
                                             plan.abc.tolerance_hi, rng, plan.sampler.pilot,
                                             plan.abc.tolerance_steps));
            }
            spec.epsilon_min = median(eps);
        }
        RngStream rng = frame_stream(plan.seed, relays, snr_db, 0, kAbcScales);
        if (plan.sampler.tune_scales) {
            const TuneResult t = tune_proposals(SamplerKind::abc, cell.config, pilots[0], spec, cell.abc_scales,
                                                plan.sampler.abc_target, rng, plan.sampler.pilot);
            cell.abc_scales = t.scales;
            cell.abc_pilot_acceptance = t.acceptance;
        } else {
            cell.abc_pilot_acceptance = measure_acceptance(SamplerKind::abc, cell.config, pilots[0], spec,
                                                           cell.abc_scales, plan.sampler.pilot, rng);
        }
    }
    if (av) {
        RngStream rng = frame_stream(plan.seed, relays, snr_db, 0, kAvScales);
        if (plan.sampler.tune_scales) {
            const TuneResult t = tune_proposals(SamplerKind::av, cell.config, pilots[0], spec, cell.av_scales,
                                                plan.sampler.av_target, rng, plan.sampler.pilot);
            cell.av_scales = t.scales;
            cell.av_pilot_acceptance = t.acceptance;
        } else {
            cell.av_pilot_acceptance = measure_acceptance(SamplerKind::av, cell.config, pilots[0], spec,
                                                          cell.av_scales, plan.sampler.pilot, rng);
        }
    }
    return cell;
}

FrameResult run_frame(const CellSetup& cell, const std::vector<DetectorMethod>& detectors, RngStream& data_rng) {
    const SystemConfig& config = cell.config;
    const Frame frame = generate_frame(config, data_rng);
    const std::uint64_t detector_seed = data_rng.engine()();
    const auto& y = frame.draw.y;

    FrameResult result;
    result.truth = frame.s;
    for (DetectorMethod method : detectors) {
        DetectorOutcome outcome;
        outcome.method = method;
        RngStream rng(detector_seed, static_cast<std::uint64_t>(method));
        try {
            Codeword s_hat;
            switch (method) {
                case DetectorMethod::mcmc_abc: {
                    const ChainTrace trace = run_mcmc_abc(config, y, cell.abc, cell.abc_scales, cell.chain, rng);
                    s_hat = map_from_trace(trace, cell.chain.burn_in, config.codewords(), method).s_hat;
                    break;
                }
                case DetectorMethod::mcmc_av: {
                    const ChainTrace trace = run_mcmc_av(config, y, cell.av_scales, cell.chain, rng);
                    s_hat = map_from_trace(trace, cell.chain.burn_in, config.codewords(), method).s_hat;
                    break;
                }
                case DetectorMethod::ses_zf: s_hat = ses_zf_detect(y, config.csi, config).s_hat; break;
                case DetectorMethod::omap: s_hat = omap_detect(y, frame.channels, frame.draw.w, config).s_hat; break;
                case DetectorMethod::exact_known_channel: {
                    const auto pmf = exact_posterior_known_channels(y, frame.channels, config);
                    const auto best = std::max_element(pmf.begin(), pmf.end()) - pmf.begin();
                    s_hat = config.codewords().decode(static_cast<std::uint64_t>(best));
                    break;
                }
            }
            outcome.symbol_errors = symbol_errors(s_hat, frame.s);
        } catch (const std::exception& e) {
            outcome.failed = true;
            outcome.symbol_errors = config.symbols();
            outcome.error = e.what();
        }
        result.outcomes.push_back(std::move(outcome));
    }
    return result;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

SweepResult run_ser_sweep(const ExperimentPlan& plan, std::size_t threads, std::uint64_t config_hash,
                          const ProgressFn& progress) {
    plan.validate();
    struct CellKey {
        std::size_t relays;
        double snr;
    };
    std::vector<CellKey> keys;
    for (std::size_t L : plan.relays)
        for (double snr : plan.snr_db) keys.push_back({L, snr});

    SweepResult result;
    result.cells.resize(keys.size());
    const std::size_t n_frames = keys.size() * plan.frames;
    const std::size_t total = keys.size() + n_frames;
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    auto tick = [&] {
        const std::size_t d = ++done;
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(d, total);
        }
    };

    std::vector<double> setup_seconds(keys.size(), 0.0);
    parallel_for(keys.size(), threads, [&](std::size_t c) {
        const auto t0 = std::chrono::steady_clock::now();
        result.cells[c] = prepare_cell(plan, keys[c].relays, keys[c].snr);
        setup_seconds[c] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        tick();
    });

    const std::size_t D = plan.detectors.size();
    std::vector<std::uint32_t> errors(n_frames * D, 0);
    std::vector<std::uint8_t> failed(n_frames * D, 0);
    std::vector<double> frame_seconds(n_frames, 0.0);
    parallel_for(n_frames, threads, [&](std::size_t task) {
        const std::size_t c = task / plan.frames;
        const std::size_t f = task % plan.frames;
        const auto t0 = std::chrono::steady_clock::now();
        RngStream rng = frame_stream(plan.seed, keys[c].relays, keys[c].snr, f, kData);
        const FrameResult r = run_frame(result.cells[c], plan.detectors, rng);
        for (std::size_t d = 0; d < D; ++d) {
            errors[task * D + d] = static_cast<std::uint32_t>(r.outcomes[d].symbol_errors);
            failed[task * D + d] = r.outcomes[d].failed ? 1 : 0;
            if (r.outcomes[d].failed)
                spdlog::warn("L={} snr={} frame {}: {} failed: {}", keys[c].relays, keys[c].snr, f,
                             to_string(plan.detectors[d]), r.outcomes[d].error);
        }
        frame_seconds[task] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        tick();
    });

    for (std::size_t c = 0; c < keys.size(); ++c) {
        double seconds = setup_seconds[c];
        for (std::size_t f = 0; f < plan.frames; ++f) seconds += frame_seconds[c * plan.frames + f];
        for (std::size_t d = 0; d < D; ++d) {
            SerRecord rec;
            rec.relays = keys[c].relays;
            rec.snr_db = keys[c].snr;
            rec.detector = plan.detectors[d];
            rec.symbols = result.cells[c].config.symbols();
            rec.frames = plan.frames;
            for (std::size_t f = 0; f < plan.frames; ++f) {
                const std::size_t idx = (c * plan.frames + f) * D + d;
                rec.symbol_errors += errors[idx];
                rec.failures += failed[idx];
            }
            rec.ser = static_cast<double>(rec.symbol_errors) / static_cast<double>(rec.frames * rec.symbols);
            rec.wall_seconds = seconds;
            rec.config_hash = config_hash;
            rec.seed = plan.seed;
            result.records.push_back(rec);
        }
    }
    return result;
}

void write_ser_csv(std::ostream& out, const std::vector<SerRecord>& records) {
    out << "relays,snr_db,detector,symbols,frames,symbol_errors,failures,ser,config_hash,seed\n";
    for (const auto& r : records) {
        std::ostringstream hash;
        hash << std::hex << std::setw(16) << std::setfill('0') << r.config_hash;
        out << r.relays << ',' << r.snr_db << ',' << to_string(r.detector) << ',' << r.symbols << ',' << r.frames << ','
            << r.symbol_errors << ',' << r.failures << ',' << std::setprecision(12) << r.ser << ',' << hash.str() << ','
            << r.seed << '\n';
    }
}

std::vector<SerRecord> read_ser_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("ser.csv: missing header");
    std::vector<SerRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        const std::string where = "ser.csv line " + std::to_string(line_no) + ": ";
        if (cells.size() != 10) throw InvalidInput(where + "expected 10 columns");
        SerRecord r;
        try {
            r.relays = std::stoul(cells[0]);
            r.snr_db = std::stod(cells[1]);
            r.detector = parse_detector_method(cells[2]);
            r.symbols = std::stoul(cells[3]);
            r.frames = std::stoul(cells[4]);
            r.symbol_errors = std::stoul(cells[5]);
            r.failures = std::stoul(cells[6]);
            r.ser = std::stod(cells[7]);
            r.config_hash = std::stoull(cells[8], nullptr, 16);
            r.seed = std::stoull(cells[9]);
        } catch (const std::logic_error& e) {
            throw InvalidInput(where + e.what());
        }
        if (r.frames == 0 || r.symbols == 0) throw InvalidInput(where + "frames and symbols must be positive");
        const double expected = static_cast<double>(r.symbol_errors) / static_cast<double>(r.frames * r.symbols);
        if (!(r.ser >= 0.0 && r.ser <= 1.0) || std::abs(r.ser - expected) > 1e-9)
            throw InvalidInput(where + "ser does not equal symbol_errors / (frames * symbols)");
        records.push_back(r);
    }
    return records;
}

void TolerancePlan::validate() const {
    if (relays == 0) throw ConfigError("relays", "must be >= 1");
    if (datasets == 0) throw ConfigError("datasets", "must be >= 1");
    if (epsilons.empty()) throw ConfigError("epsilons", "must not be empty");
    for (double e : epsilons)
        if (!(e > 0.0)) throw ConfigError("epsilons", "values must be > 0");
    if (configs.empty()) throw ConfigError("configs", "must not be empty");
    if (!(baseline_epsilon > 0.0)) throw ConfigError("baseline_epsilon", "must be > 0");
    if (burn_in >= iterations) throw ConfigError("burn_in", "must be smaller than iterations");
    if (baseline_burn_in >= baseline_iterations)
        throw ConfigError("baseline_burn_in", "must be smaller than baseline_iterations");
    if (max_lag >= iterations - burn_in) throw ConfigError("max_lag", "must be shorter than the recorded chain");
    (void)system.instantiate(relays, snr_db);
}

std::string to_string(const ToleranceConfig& config) {
    return to_string(config.weighting) + "+" + to_string(config.metric);
}

const ToleranceSummary& ToleranceResult::summary(ToleranceConfig config, double epsilon) const {
    for (const auto& s : summaries)
        if (s.config.weighting == config.weighting && s.config.metric == config.metric && s.epsilon == epsilon) return s;
    throw InvalidInput("no tolerance summary for " + to_string(config));
}

ToleranceResult run_tolerance_study(const TolerancePlan& plan, std::size_t threads, const ProgressFn& progress) {
    plan.validate();
    const SystemConfig config = plan.system.instantiate(plan.relays, plan.snr_db);
    RngStream cov_rng = RngStream::derive(plan.seed, {0x7001});
    const Matrix cov = estimate_summary_covariance(config, plan.summary, plan.covariance_draws, cov_rng);

    auto make_spec = [&](WeightingFunction::Kind w, DistanceMetric::Kind m, double eps) {
        AbcSpec spec;
        spec.summary = plan.summary;
        spec.metric = make_metric(m, cov, 2.0);
        spec.weighting = w;
        spec.epsilon_min = eps;
        spec.anneal = plan.anneal;
        spec.refresh_current_distance = plan.refresh_current_distance;
        return spec;
    };
    auto g1_series = [](const ChainTrace& trace, std::size_t burn_in) {
        return trace.channel_series(ChainTrace::Channel::g, 0, false, burn_in);
    };

    const std::size_t E = plan.epsilons.size();
    const std::size_t C = plan.configs.size();
    ToleranceResult result;
    result.runs.resize(plan.datasets * E * C);
    result.baseline_acceptance.resize(plan.datasets);
    result.scales.resize(E * plan.datasets);
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    parallel_for(plan.datasets, threads, [&](std::size_t d) {
        RngStream data_rng = RngStream::derive(plan.seed, {0x7002, d});
        const Observation y = generate_frame(config, data_rng).draw.y;

        const AbcSpec base_spec =
            make_spec(WeightingFunction::Kind::soft, DistanceMetric::Kind::mahalanobis, plan.baseline_epsilon);
        RngStream tune_rng = RngStream::derive(plan.seed, {0x7003, d});
        const ProposalScales base_scales =
            tune_proposals(SamplerKind::abc, config, y, base_spec, plan.scales, plan.target, tune_rng, plan.pilot).scales;
        ChainSettings base_settings;
        base_settings.iterations = plan.baseline_iterations;
        base_settings.burn_in = plan.baseline_burn_in;
        RngStream base_rng = RngStream::derive(plan.seed, {0x7004, d});
        const ChainTrace base_trace = run_mcmc_abc(config, y, base_spec, base_scales, base_settings, base_rng);
        result.baseline_acceptance[d] = acceptance_rate(base_trace, plan.baseline_burn_in, base_trace.size());
        const auto base_series = g1_series(base_trace, plan.baseline_burn_in);
        const Edf baseline(base_series);

        for (std::size_t e = 0; e < E; ++e) {
            const double eps = plan.epsilons[e];
            RngStream scale_rng = RngStream::derive(plan.seed, {0x7005, d, e});
            const ProposalScales scales =
                tune_proposals(SamplerKind::abc, config, y,
                               make_spec(WeightingFunction::Kind::soft, DistanceMetric::Kind::mahalanobis, eps),
                               plan.scales, plan.target, scale_rng, plan.pilot)
                    .scales;
            result.scales[e * plan.datasets + d] = scales;
            for (std::size_t c = 0; c < C; ++c) {
                const AbcSpec spec = make_spec(plan.configs[c].weighting, plan.configs[c].metric, eps);
                ChainSettings settings;
                settings.iterations = plan.iterations;
                settings.burn_in = plan.burn_in;
                RngStream rng = RngStream::derive(plan.seed, {0x7006, d, e, c});
                const ChainTrace trace = run_mcmc_abc(config, y, spec, scales, settings, rng);
                const auto series = g1_series(trace, plan.burn_in);

                ToleranceRun& run = result.runs[(e * C + c) * plan.datasets + d];
                run.config = plan.configs[c];
                run.epsilon = eps;
                run.dataset = d;
                run.acceptance = acceptance_rate(trace, plan.burn_in, trace.size());
                run.edf_error = edf_max_distance(Edf(series), baseline);
                run.stuck = trace.stuck;
                try {
                    run.acf = acf_curve(series, plan.max_lag);
                } catch (const NumericDomainError&) {
                    run.stuck = true;
                    run.acf.assign(plan.max_lag + 1, 1.0);
                }
            }
        }
        const std::size_t n = ++done;
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(n, plan.datasets);
        }
    });

    for (std::size_t e = 0; e < E; ++e)
        for (std::size_t c = 0; c < C; ++c) {
            ToleranceSummary s;
            s.config = plan.configs[c];
            s.epsilon = plan.epsilons[e];
            s.mean_acf.assign(plan.max_lag + 1, 0.0);
            for (std::size_t d = 0; d < plan.datasets; ++d) {
                const ToleranceRun& run = result.runs[(e * C + c) * plan.datasets + d];
                s.mean_edf_error += run.edf_error;
                s.mean_acceptance += run.acceptance;
                s.stuck += run.stuck ? 1 : 0;
                for (std::size_t k = 0; k <= plan.max_lag; ++k) s.mean_acf[k] += run.acf[k];
            }
            const double n = static_cast<double>(plan.datasets);
            s.mean_edf_error /= n;
            s.mean_acceptance /= n;
            for (double& v : s.mean_acf) v /= n;
            result.summaries.push_back(std::move(s));
        }
    return result;
}

void write_tolerance_csv(std::ostream& out, const ToleranceResult& result) {
    out << "weighting,metric,epsilon,mean_edf_error,mean_acceptance,stuck\n";
    out << std::setprecision(12);
    for (const auto& s : result.summaries)
        out << to_string(s.config.weighting) << ',' << to_string(s.config.metric) << ',' << s.epsilon << ','
            << s.mean_edf_error << ',' << s.mean_acceptance << ',' << s.stuck << '\n';
}

void write_acf_table(std::ostream& out, const ToleranceResult& result) {
    out << "weighting,metric,epsilon,lag,acf\n";
    out << std::setprecision(12);
    for (const auto& s : result.summaries)
        for (std::size_t k = 0; k < s.mean_acf.size(); ++k)
            out << to_string(s.config.weighting) << ',' << to_string(s.config.metric) << ',' << s.epsilon << ',' << k
                << ',' << s.mean_acf[k] << '\n';
}

}  // namespace relaysim
