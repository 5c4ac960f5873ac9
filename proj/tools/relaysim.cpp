#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "relaysim/config_io.hpp"
#include "relaysim/detectors.hpp"
#include "relaysim/errors.hpp"
#include "relaysim/harness.hpp"
#include "relaysim/plot.hpp"

namespace fs = std::filesystem;
using namespace relaysim;

namespace {

struct Options {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    bool quiet = false;
    std::string input;
    std::vector<std::string> methods;
    std::optional<std::size_t> frames;
    std::optional<std::size_t> relays;
    std::optional<double> snr;
};

/// Files written by the current command; removed again if the command fails.
class Outputs {
public:
    std::ofstream open(const fs::path& path, int precision = 12) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream out(path);
        if (!out) throw Error("cannot write '" + path.string() + "'");
        written_.push_back(path);
        out << std::setprecision(precision);
        return out;
    }
    void discard() {
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
        written_.clear();
    }
    const std::vector<fs::path>& written() const { return written_; }

private:
    std::vector<fs::path> written_;
};

std::size_t resolve_threads(const Options& o) {
    if (o.threads) return *o.threads;
    if (const char* env = std::getenv("RELAYSIM_THREADS")) {
        try {
            return std::stoul(env);
        } catch (const std::logic_error&) {
            throw ConfigError("RELAYSIM_THREADS", "expected a non-negative integer");
        }
    }
    return 1;
}

ExperimentPlan load_plan(const Options& o, Json& raw) {
    raw = o.config.empty() ? to_json(ExperimentPlan{}) : load_json_file(o.config);
    ExperimentPlan plan = experiment_plan_from_json(raw);
    if (o.seed) plan.seed = *o.seed;
    if (o.frames) plan.frames = *o.frames;
    if (o.relays) plan.relays = {*o.relays};
    if (o.snr) plan.snr_db = {*o.snr};
    if (!o.methods.empty()) {
        plan.detectors.clear();
        for (const auto& m : o.methods) plan.detectors.push_back(parse_detector_method(m));
    }
    plan.validate();
    raw = to_json(plan);
    return plan;
}

ProgressFn progress_logger(const std::string& what) {
    return [what, last = std::size_t{0}](std::size_t done, std::size_t total) mutable {
        const std::size_t pct = done * 100 / total;
        if (pct / 10 != last / 10 || done == total) spdlog::info("{}: {}/{} ({}%)", what, done, total, pct);
        last = pct;
    };
}

Json scales_json(const ProposalScales& s) {
    return {{"g", s.sigma_g_rw_sq}, {"h", s.sigma_h_rw_sq}, {"w", s.sigma_w_rw_sq}};
}

Json cells_json(const std::vector<CellSetup>& cells) {
    Json out = Json::array();
    for (const auto& c : cells)
        out.push_back({{"relays", c.relays},
                       {"snr_db", c.snr_db},
                       {"noise_variance", c.config.noise.sigma_w_sq},
                       {"epsilon_min", c.abc.epsilon_min},
                       {"abc_scales", scales_json(c.abc_scales)},
                       {"abc_pilot_acceptance", c.abc_pilot_acceptance},
                       {"av_scales", scales_json(c.av_scales)},
                       {"av_pilot_acceptance", c.av_pilot_acceptance}});
    return out;
}

Json design_flags(const ExperimentPlan& plan) {
    return {{"summary", plan.abc.summary.kind == SummarySpec::Kind::identity ? "identity" : "quantile-grid"},
            {"complex_handling",
             plan.abc.summary.complex == SummarySpec::ComplexHandling::split ? "split re/im" : "modulus"},
            {"metric", to_string(plan.abc.metric)},
            {"weighting", to_string(plan.abc.weighting)},
            {"synthetic_draws", plan.abc.synthetic_draws},
            {"current_distance", plan.abc.refresh_current_distance ? "refreshed each iteration" : "stored"},
            {"anneal", plan.abc.anneal},
            {"tolerance", plan.abc.tune_tolerance ? "tuned per cell to pilot acceptance" : "fixed"},
            {"scan", plan.sampler.scan == ScanMode::random_single ? "random single component" : "per block"},
            {"symbol_proposal", "uniform over constellation"},
            {"map_estimator", "post-burn-in codeword mode, ties to smallest code"},
            {"acf_normalisation", "sample variance"},
            {"frames_note", "binomial 95% half-width at SER 0.01 with 2000 frames of K=2 is about 0.003"}};
}

int cmd_simulate(const Options& o, Outputs& outputs) {
    Json raw;
    const ExperimentPlan plan = load_plan(o, raw);
    const SystemConfig config = plan.system.instantiate(plan.relays.front(), plan.snr_db.front());
    auto out = outputs.open(fs::path(o.out) / "frames.csv", 17);
    out << "snr_db,frame,relay,symbol,s_index,s_value,h_re,h_im,g_re,g_im,w_re,w_im,y_re,y_im\n";
    for (std::size_t f = 0; f < plan.frames; ++f) {
        RngStream rng = frame_stream(plan.seed, config.relays(), plan.snr_db.front(), f, 0);
        const Frame frame = generate_frame(config, rng);
        const Codeword& s = frame.s;
        const ChannelRealization& ch = frame.channels;
        const ForwardDraw& d = frame.draw;
        for (std::size_t l = 0; l < config.relays(); ++l)
            for (std::size_t k = 0; k < config.symbols(); ++k)
                out << plan.snr_db.front() << ',' << f << ',' << l << ',' << k << ',' << s[k] << ',' << config.constellation[s[k]] << ','
                    << ch.h[l].real() << ',' << ch.h[l].imag() << ',' << ch.g[l].real() << ',' << ch.g[l].imag() << ','
                    << d.w(l, k).real() << ',' << d.w(l, k).imag() << ',' << d.y(l, k).real() << ','
                    << d.y(l, k).imag() << '\n';
    }
    spdlog::info("wrote {} frames to {}", plan.frames, (fs::path(o.out) / "frames.csv").string());
    return 0;
}

struct StoredFrame {
    Codeword s;
    ChannelRealization channels;
    ComplexGrid w;
    Observation y;
};

std::vector<StoredFrame> read_frames(const std::string& path, const SystemConfig& config) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open frame file '" + path + "'");
    const CsvTable t = read_csv(in);
    const std::vector<std::string> cols{"frame", "relay", "symbol", "s_index", "h_re", "h_im", "g_re",
                                        "g_im",  "w_re",  "w_im",   "y_re",    "y_im"};
    std::vector<std::size_t> idx;
    for (const auto& c : cols) idx.push_back(t.column(c));
    std::map<std::size_t, std::vector<std::vector<double>>> by_frame;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        std::vector<double> v;
        for (std::size_t c : idx) {
            try {
                v.push_back(std::stod(t.rows[i][c]));
            } catch (const std::logic_error&) {
                throw InvalidInput(path + " line " + std::to_string(i + 2) + ": malformed number");
            }
        }
        by_frame[static_cast<std::size_t>(v[0])].push_back(v);
    }
    const std::size_t L = config.relays(), K = config.symbols();
    std::vector<StoredFrame> frames;
    for (const auto& [id, rows] : by_frame) {
        if (rows.size() != L * K)
            throw InvalidInput(path + ": frame " + std::to_string(id) + " must have relays*symbols = " +
                               std::to_string(L * K) + " rows");
        StoredFrame f{Codeword(K), {std::vector<Complex>(L), std::vector<Complex>(L)}, ComplexGrid(L, K),
                      ComplexGrid(L, K)};
        for (const auto& v : rows) {
            const auto l = static_cast<std::size_t>(v[1]), k = static_cast<std::size_t>(v[2]);
            if (l >= L || k >= K) throw InvalidInput(path + ": relay or symbol index out of range");
            f.s[k] = static_cast<std::uint32_t>(v[3]);
            if (f.s[k] >= config.constellation.size()) throw InvalidInput(path + ": symbol index out of range");
            f.channels.h[l] = {v[4], v[5]};
            f.channels.g[l] = {v[6], v[7]};
            f.w(l, k) = {v[8], v[9]};
            f.y(l, k) = {v[10], v[11]};
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

/// Relay count and SNR recorded in a frame file.
std::pair<std::size_t, double> frame_file_cell(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open frame file '" + path + "'");
    const CsvTable t = read_csv(in);
    if (t.rows.empty()) throw InvalidInput(path + ": no frames");
    const std::size_t col = t.column("relay");
    std::size_t L = 0;
    for (const auto& r : t.rows) L = std::max<std::size_t>(L, std::stoul(r[col]) + 1);
    return {L, std::stod(t.rows.front()[t.column("snr_db")])};
}

int cmd_detect(const Options& o, Outputs& outputs) {
    if (o.input.empty()) throw ConfigError("--input", "detect needs a frames.csv from 'simulate'");
    Options local = o;
    const auto [relays, snr] = frame_file_cell(o.input);
    if (!local.relays) local.relays = relays;
    if (!local.snr) local.snr = snr;
    Json raw;
    const ExperimentPlan plan = load_plan(local, raw);
    const CellSetup cell = prepare_cell(plan, plan.relays.front(), plan.snr_db.front());
    const SystemConfig& config = cell.config;
    const auto frames = read_frames(o.input, config);

    auto out = outputs.open(fs::path(o.out) / "detections.csv");
    std::cout << std::setprecision(12);
    write_detection_header(out);
    write_detection_header(std::cout);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const StoredFrame& fr = frames[f];
        for (DetectorMethod m : plan.detectors) {
            RngStream rng = frame_stream(plan.seed, config.relays(), plan.snr_db.front(), f,
                                         100 + static_cast<std::uint64_t>(m));
            Detection d;
            switch (m) {
                case DetectorMethod::mcmc_abc:
                    d = map_from_trace(run_mcmc_abc(config, fr.y, cell.abc, cell.abc_scales, cell.chain, rng),
                                       cell.chain.burn_in, config.codewords(), m);
                    break;
                case DetectorMethod::mcmc_av:
                    d = map_from_trace(run_mcmc_av(config, fr.y, cell.av_scales, cell.chain, rng), cell.chain.burn_in,
                                       config.codewords(), m);
                    break;
                case DetectorMethod::ses_zf: d = ses_zf_detect(fr.y, config.csi, config); break;
                case DetectorMethod::omap: d = omap_detect(fr.y, fr.channels, fr.w, config); break;
                case DetectorMethod::exact_known_channel: {
                    const auto pmf = exact_posterior_known_channels(fr.y, fr.channels, config);
                    const auto best = static_cast<std::uint64_t>(std::max_element(pmf.begin(), pmf.end()) - pmf.begin());
                    d = {config.codewords().decode(best), best, std::log(pmf[best]), m};
                    break;
                }
            }
            write_detection_row(out, f, d, fr.s);
            write_detection_row(std::cout, f, d, fr.s);
        }
    }
    return 0;
}

int cmd_sweep(const Options& o, Outputs& outputs) {
    Json raw;
    const ExperimentPlan plan = load_plan(o, raw);
    const std::uint64_t hash = config_hash(raw);
    const std::size_t threads = resolve_threads(o);
    spdlog::info("sweep: {} cells x {} frames, {} thread(s)", plan.relays.size() * plan.snr_db.size(), plan.frames,
                 threads);
    const SweepResult result = run_ser_sweep(plan, threads, hash, progress_logger("sweep"));

    const fs::path dir(o.out);
    {
        auto out = outputs.open(dir / "ser.csv");
        write_ser_csv(out, result.records);
    }
    {
        auto out = outputs.open(dir / "timing.csv");
        out << "relays,snr_db,wall_seconds\n";
        for (const auto& r : result.records)
            if (r.detector == plan.detectors.front())
                out << r.relays << ',' << r.snr_db << ',' << std::setprecision(6) << r.wall_seconds << '\n';
    }
    {
        const Constellation& c = plan.system.constellation;
        Json meta = {{"config_hash", hex64(hash)},
                     {"seed", plan.seed},
                     {"snr_mapping", {{"noise_variance", "E_s / 10^(snr_db / 10) at relays and destination"},
                                      {"symbol_energy", c.mean_energy()}}},
                     {"design", design_flags(plan)},
                     {"cells", cells_json(result.cells)},
                     {"plan", raw}};
        auto out = outputs.open(dir / "meta.json");
        out << meta.dump(2) << '\n';
    }
    // Re-read the table to validate what was written.
    std::ifstream check(dir / "ser.csv");
    (void)read_ser_csv(check);
    return 0;
}

int cmd_tolerance(const Options& o, Outputs& outputs) {
    Json raw = o.config.empty() ? to_json(TolerancePlan{}) : load_json_file(o.config);
    TolerancePlan plan = tolerance_plan_from_json(raw);
    if (o.seed) plan.seed = *o.seed;
    raw = to_json(plan);
    const std::size_t threads = resolve_threads(o);
    const ToleranceResult result = run_tolerance_study(plan, threads, progress_logger("tolerance study"));

    const fs::path dir(o.out);
    {
        auto out = outputs.open(dir / "tolerance.csv");
        write_tolerance_csv(out, result);
    }
    {
        auto out = outputs.open(dir / "acf.csv");
        write_acf_table(out, result);
    }
    {
        auto out = outputs.open(dir / "edf.csv");
        out << "weighting,metric,epsilon,dataset,edf_error,acceptance,stuck\n";
        for (const auto& r : result.runs)
            out << to_string(r.config.weighting) << ',' << to_string(r.config.metric) << ',' << r.epsilon << ','
                << r.dataset << ',' << r.edf_error << ',' << r.acceptance << ',' << (r.stuck ? 1 : 0) << '\n';
    }
    {
        Json scales = Json::array();
        for (const auto& s : result.scales) scales.push_back(scales_json(s));
        Json meta = {{"config_hash", hex64(config_hash(raw))},
                     {"seed", plan.seed},
                     {"baseline_acceptance", result.baseline_acceptance},
                     {"tuned_scales", scales},
                     {"series", "Re(g_1) after burn-in"},
                     {"stuck_policy", "constant series recorded with ACF 1 at every lag and flagged"},
                     {"plan", raw}};
        auto out = outputs.open(dir / "meta.json");
        out << meta.dump(2) << '\n';
    }
    return 0;
}

int cmd_tune(const Options& o, Outputs& outputs) {
    Json raw;
    Options local = o;
    if (local.methods.empty()) local.methods = {"mcmc-abc", "mcmc-av"};
    const ExperimentPlan plan = load_plan(local, raw);
    std::vector<CellSetup> cells;
    for (std::size_t L : plan.relays)
        for (double snr : plan.snr_db) cells.push_back(prepare_cell(plan, L, snr));
    auto out = outputs.open(fs::path(o.out) / "tuning.csv");
    out << "relays,snr_db,epsilon_min,abc_sigma_g_rw_sq,abc_sigma_h_rw_sq,abc_pilot_acceptance,av_sigma_g_rw_sq,"
           "av_sigma_h_rw_sq,av_sigma_w_rw_sq,av_pilot_acceptance\n";
    for (const auto& c : cells)
        out << c.relays << ',' << c.snr_db << ',' << c.abc.epsilon_min << ',' << c.abc_scales.sigma_g_rw_sq << ','
            << c.abc_scales.sigma_h_rw_sq << ',' << c.abc_pilot_acceptance << ',' << c.av_scales.sigma_g_rw_sq << ','
            << c.av_scales.sigma_h_rw_sq << ',' << c.av_scales.sigma_w_rw_sq << ',' << c.av_pilot_acceptance << '\n';
    return 0;
}

int cmd_plot(const Options& o, Outputs& outputs) {
    if (o.input.empty()) throw ConfigError("--input", "plot needs a CSV file");
    std::ifstream in(o.input);
    if (!in) throw InvalidInput("cannot open '" + o.input + "'");
    const Chart chart = chart_from_csv(read_csv(in));
    fs::path target(o.out);
    if (target.extension() != ".svg") target /= fs::path(o.input).stem().string() + ".svg";
    auto out = outputs.open(target);
    out << render_svg(chart);
    spdlog::info("wrote {}", target.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative relay network simulator and symbol detectors"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON config file (defaults apply when omitted)");
        sub->add_option("--out", o.out, "output directory (plot: directory or .svg file)");
        sub->add_option("--seed", o.seed, "master seed override");
        sub->add_option("--threads", o.threads, "worker threads (fallback: RELAYSIM_THREADS, then 1)");
        sub->add_flag("-q,--quiet", o.quiet, "only log errors");
    };
    auto* simulate = app.add_subcommand("simulate", "simulate frames and dump y, s, channels and relay noise");
    common(simulate);
    simulate->add_option("--frames", o.frames, "number of frames");
    simulate->add_option("--relays", o.relays, "relay count (default: first of the plan)");
    simulate->add_option("--snr", o.snr, "SNR in dB (default: first of the plan)");

    auto* detect = app.add_subcommand("detect", "run detectors on frames written by simulate");
    common(detect);
    detect->add_option("--input", o.input, "frames.csv")->required();
    detect->add_option("--method", o.methods, "mcmc-abc, mcmc-av, ses-zf, omap or exact-known-channel");

    auto* sweep = app.add_subcommand("sweep", "SER vs SNR sweep over the plan grid");
    common(sweep);
    sweep->add_option("--frames", o.frames, "frames per cell override");

    auto* tolerance = app.add_subcommand("tolerance-study", "tolerance, weighting and metric comparison");
    common(tolerance);

    auto* tune = app.add_subcommand("tune", "tune tolerance and proposal scales for every cell");
    common(tune);
    tune->add_option("--relays", o.relays, "single relay count instead of the plan grid");
    tune->add_option("--snr", o.snr, "single SNR in dB instead of the plan grid");

    auto* plot = app.add_subcommand("plot", "render ser.csv, acf.csv or tolerance.csv as SVG");
    common(plot);
    plot->add_option("--input", o.input, "CSV file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    spdlog::set_level(o.quiet ? spdlog::level::err : spdlog::level::info);
    spdlog::set_pattern("[%l] %v");

    Outputs outputs;
    try {
        if (*simulate) return cmd_simulate(o, outputs);
        if (*detect) return cmd_detect(o, outputs);
        if (*sweep) return cmd_sweep(o, outputs);
        if (*tolerance) return cmd_tolerance(o, outputs);
        if (*tune) return cmd_tune(o, outputs);
        if (*plot) return cmd_plot(o, outputs);
    } catch (const ConfigError& e) {
        outputs.discard();
        spdlog::error("config error: {}", e.what());
        return 2;
    } catch (const std::exception& e) {
        outputs.discard();
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
