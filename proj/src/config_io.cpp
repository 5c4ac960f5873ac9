#include "relaysim/config_io.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "relaysim/errors.hpp"

namespace relaysim {

namespace {

/// Walks one JSON object, remembering which keys were consumed so that
/// leftovers can be reported as unknown fields.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const Json* get(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T>
    void read(const std::string& key, T& out) {
        const Json* v = get(key);
        if (!v) return;
        out = as<T>(*v, field(key));
    }

    template <class T>
    static T as(const Json& v, const std::string& where) {
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_unsigned()) throw ConfigError(where, "expected a non-negative integer");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(where, "expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(where, "expected a string");
            }
            return v.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where, e.what());
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class T>
std::vector<T> read_list(const Json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where, "expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(Reader::as<T>(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

Complex read_complex(const Json& v, const std::string& where) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    const auto parts = read_list<double>(v, where);
    if (parts.size() != 2) throw ConfigError(where, "expected [re, im]");
    return {parts[0], parts[1]};
}

template <class F>
auto wrap(const std::string& where, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(where, e.what());
    }
}

AcceptanceTarget read_target(const Json& v, const std::string& where) {
    const auto t = read_list<double>(v, where);
    if (t.size() != 2 || !(t[0] >= 0.0 && t[0] <= t[1] && t[1] <= 1.0))
        throw ConfigError(where, "expected [low, high] with 0 <= low <= high <= 1");
    return {t[0], t[1]};
}

ProposalScales read_scales(const Json& v, const std::string& where) {
    Reader r(v, where);
    ProposalScales s;
    r.read("g", s.sigma_g_rw_sq);
    r.read("h", s.sigma_h_rw_sq);
    r.read("w", s.sigma_w_rw_sq);
    r.finish();
    if (!(s.sigma_g_rw_sq > 0.0 && s.sigma_h_rw_sq > 0.0 && s.sigma_w_rw_sq > 0.0))
        throw ConfigError(where, "random-walk variances must be > 0");
    return s;
}

PilotSettings read_pilot(const Json& v, const std::string& where) {
    Reader r(v, where);
    PilotSettings p;
    r.read("iterations", p.iterations);
    r.read("burn_in", p.burn_in);
    r.read("max_pilots", p.max_pilots);
    r.finish();
    if (p.burn_in >= p.iterations) throw ConfigError(r.field("burn_in"), "must be smaller than iterations");
    return p;
}

SummarySpec read_summary(const Json& v, const std::string& where, SummarySpec s) {
    Reader r(v, where);
    if (const Json* k = r.get("kind")) {
        const auto name = Reader::as<std::string>(*k, r.field("kind"));
        if (name == "quantile-grid") s.kind = SummarySpec::Kind::quantile_grid;
        else if (name == "identity") s.kind = SummarySpec::Kind::identity;
        else throw ConfigError(r.field("kind"), "expected 'quantile-grid' or 'identity'");
    }
    if (const Json* c = r.get("complex")) {
        const auto name = Reader::as<std::string>(*c, r.field("complex"));
        if (name == "split") s.complex = SummarySpec::ComplexHandling::split;
        else if (name == "modulus") s.complex = SummarySpec::ComplexHandling::modulus;
        else throw ConfigError(r.field("complex"), "expected 'split' or 'modulus'");
    }
    if (const Json* l = r.get("levels")) s.levels = read_list<double>(*l, r.field("levels"));
    r.finish();
    wrap(where, [&] { s.validate(); });
    return s;
}

Json summary_json(const SummarySpec& s) {
    return {{"kind", s.kind == SummarySpec::Kind::identity ? "identity" : "quantile-grid"},
            {"complex", s.complex == SummarySpec::ComplexHandling::split ? "split" : "modulus"},
            {"levels", s.levels}};
}

Json scales_json(const ProposalScales& s) {
    return {{"g", s.sigma_g_rw_sq}, {"h", s.sigma_h_rw_sq}, {"w", s.sigma_w_rw_sq}};
}

Json pilot_json(const PilotSettings& p) {
    return {{"iterations", p.iterations}, {"burn_in", p.burn_in}, {"max_pilots", p.max_pilots}};
}

Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

}  // namespace

Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
        std::size_t line = 1;
        std::size_t column = 1;
        for (std::size_t i = 0; i + 1 < offset; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ConfigError("", path + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + e.what());
    }
}

SystemTemplate system_from_json(const Json& j, const std::string& path) {
    Reader r(j, path);
    SystemTemplate s;
    if (const Json* c = r.get("constellation")) {
        const auto points = read_list<double>(*c, r.field("constellation"));
        s.constellation = wrap(r.field("constellation"), [&] { return Constellation(points); });
    }
    std::size_t symbols = 2;
    r.read("symbols", symbols);
    if (symbols == 0) throw ConfigError(r.field("symbols"), "must be >= 1");

    std::string prior_kind = "two-mode";
    const Json* prior = r.get("prior");
    std::map<std::uint64_t, double> listed;
    if (prior) {
        Reader pr(*prior, r.field("prior"));
        pr.read("kind", prior_kind);
        if (const Json* entries = pr.get("entries")) {
            if (!entries->is_array()) throw ConfigError(pr.field("entries"), "expected an array");
            const CodewordSpace space = wrap(r.field("symbols"),
                                             [&] { return CodewordSpace(s.constellation.size(), symbols); });
            for (std::size_t i = 0; i < entries->size(); ++i) {
                const std::string where = pr.field("entries") + "[" + std::to_string(i) + "]";
                Reader er((*entries)[i], where);
                const Json* word = er.get("codeword");
                const Json* prob = er.get("probability");
                if (!word || !prob) throw ConfigError(where, "needs 'codeword' and 'probability'");
                const auto values = read_list<double>(*word, er.field("codeword"));
                if (values.size() != symbols) throw ConfigError(er.field("codeword"), "length must equal symbols");
                Codeword cw;
                for (double v : values)
                    cw.push_back(static_cast<std::uint32_t>(
                        wrap(er.field("codeword"), [&] { return s.constellation.index_of(v); })));
                listed[space.encode(cw)] = Reader::as<double>(*prob, er.field("probability"));
                er.finish();
            }
        }
        pr.finish();
    }
    const std::string prior_field = path.empty() ? "prior" : path + ".prior";
    if (prior_kind == "two-mode") {
        if (symbols != 2) throw ConfigError(prior_field, "the two-mode prior needs symbols = 2");
        s.prior = wrap(prior_field, [&] { return CodewordPrior::two_mode_default(s.constellation); });
    } else if (prior_kind == "uniform") {
        s.prior = wrap(prior_field, [&] { return CodewordPrior::uniform(s.constellation.size(), symbols); });
    } else if (prior_kind == "listed") {
        s.prior = wrap(prior_field,
                       [&] { return CodewordPrior(CodewordSpace(s.constellation.size(), symbols), listed); });
    } else {
        throw ConfigError(prior_field + ".kind", "expected 'two-mode', 'uniform' or 'listed'");
    }

    if (const Json* v = r.get("h_hat")) s.h_hat = read_complex(*v, r.field("h_hat"));
    if (const Json* v = r.get("g_hat")) s.g_hat = read_complex(*v, r.field("g_hat"));
    r.read("sigma_h_sq", s.sigma_h_sq);
    r.read("sigma_g_sq", s.sigma_g_sq);
    if (!(s.sigma_h_sq > 0.0)) throw ConfigError(r.field("sigma_h_sq"), "must be > 0");
    if (!(s.sigma_g_sq > 0.0)) throw ConfigError(r.field("sigma_g_sq"), "must be > 0");

    std::string relay = "tanh";
    std::string mode = "componentwise";
    r.read("relay", relay);
    r.read("relay_mode", mode);
    RelayFunction::ComplexMode cm;
    if (mode == "componentwise") cm = RelayFunction::ComplexMode::componentwise;
    else if (mode == "modulus-phase") cm = RelayFunction::ComplexMode::modulus_phase;
    else throw ConfigError(r.field("relay_mode"), "expected 'componentwise' or 'modulus-phase'");
    if (relay == "tanh") s.relay = RelayFunction::tanh(cm);
    else if (relay == "linear") s.relay = RelayFunction::linear();
    else throw ConfigError(r.field("relay"), "expected 'tanh' or 'linear'");
    r.finish();
    return s;
}

Json to_json(const SystemTemplate& s) {
    Json prior;
    const auto& listed = s.prior.listed();
    if (listed.empty()) {
        prior = {{"kind", "uniform"}};
    } else {
        Json entries = Json::array();
        for (const auto& [code, p] : listed) {
            Json word = Json::array();
            for (auto i : s.prior.space().decode(code)) word.push_back(s.constellation[i]);
            entries.push_back({{"codeword", word}, {"probability", p}});
        }
        prior = {{"kind", "listed"}, {"entries", entries}};
    }
    return {{"constellation", s.constellation.points()},
            {"symbols", s.prior.length()},
            {"prior", prior},
            {"h_hat", complex_json(s.h_hat)},
            {"g_hat", complex_json(s.g_hat)},
            {"sigma_h_sq", s.sigma_h_sq},
            {"sigma_g_sq", s.sigma_g_sq},
            {"relay", s.relay.is_linear() ? "linear" : "tanh"},
            {"relay_mode", s.relay.mode() == RelayFunction::ComplexMode::componentwise ? "componentwise"
                                                                                       : "modulus-phase"}};
}

ExperimentPlan experiment_plan_from_json(const Json& j) {
    Reader r(j, "");
    ExperimentPlan plan;
    if (const Json* v = r.get("system")) plan.system = system_from_json(*v, "system");
    if (const Json* v = r.get("relays")) plan.relays = read_list<std::size_t>(*v, "relays");
    if (const Json* v = r.get("snr_db")) plan.snr_db = read_list<double>(*v, "snr_db");
    r.read("frames", plan.frames);
    r.read("seed", plan.seed);
    if (const Json* v = r.get("detectors")) {
        plan.detectors.clear();
        const auto names = read_list<std::string>(*v, "detectors");
        for (std::size_t i = 0; i < names.size(); ++i)
            plan.detectors.push_back(
                wrap("detectors[" + std::to_string(i) + "]", [&] { return parse_detector_method(names[i]); }));
    }
    if (const Json* v = r.get("abc")) {
        Reader a(*v, "abc");
        AbcPlan& abc = plan.abc;
        if (const Json* s = a.get("summary")) abc.summary = read_summary(*s, "abc.summary", abc.summary);
        if (const Json* m = a.get("metric"))
            abc.metric = wrap("abc.metric", [&] { return parse_metric_kind(Reader::as<std::string>(*m, "abc.metric")); });
        a.read("lp_exponent", abc.lp_exponent);
        if (const Json* w = a.get("weighting"))
            abc.weighting =
                wrap("abc.weighting", [&] { return parse_weighting_kind(Reader::as<std::string>(*w, "abc.weighting")); });
        a.read("epsilon_min", abc.epsilon_min);
        a.read("anneal", abc.anneal);
        a.read("synthetic_draws", abc.synthetic_draws);
        a.read("refresh_current_distance", abc.refresh_current_distance);
        a.read("covariance_draws", abc.covariance_draws);
        a.read("tune_tolerance", abc.tune_tolerance);
        a.read("target_acceptance", abc.target_acceptance);
        a.read("pilot_frames", abc.pilot_frames);
        if (const Json* t = a.get("tolerance_range")) {
            const auto range = read_list<double>(*t, "abc.tolerance_range");
            if (range.size() != 2) throw ConfigError("abc.tolerance_range", "expected [lo, hi]");
            abc.tolerance_lo = range[0];
            abc.tolerance_hi = range[1];
        }
        a.read("tolerance_steps", abc.tolerance_steps);
        a.finish();
    }
    if (const Json* v = r.get("sampler")) {
        Reader s(*v, "sampler");
        SamplerPlan& sp = plan.sampler;
        s.read("iterations", sp.iterations);
        s.read("burn_in", sp.burn_in);
        if (const Json* scan = s.get("scan")) {
            const auto name = Reader::as<std::string>(*scan, "sampler.scan");
            if (name == "random-single") sp.scan = ScanMode::random_single;
            else if (name == "per-block") sp.scan = ScanMode::per_block;
            else throw ConfigError("sampler.scan", "expected 'random-single' or 'per-block'");
        }
        if (const Json* sc = s.get("scales")) sp.scales = read_scales(*sc, "sampler.scales");
        s.read("tune_scales", sp.tune_scales);
        if (const Json* t = s.get("abc_target")) sp.abc_target = read_target(*t, "sampler.abc_target");
        if (const Json* t = s.get("av_target")) sp.av_target = read_target(*t, "sampler.av_target");
        if (const Json* p = s.get("pilot")) sp.pilot = read_pilot(*p, "sampler.pilot");
        s.finish();
    }
    r.finish();
    plan.validate();
    return plan;
}

Json to_json(const ExperimentPlan& plan) {
    Json detectors = Json::array();
    for (auto d : plan.detectors) detectors.push_back(to_string(d));
    const AbcPlan& a = plan.abc;
    const SamplerPlan& s = plan.sampler;
    return {{"system", to_json(plan.system)},
            {"relays", plan.relays},
            {"snr_db", plan.snr_db},
            {"frames", plan.frames},
            {"seed", plan.seed},
            {"detectors", detectors},
            {"abc",
             {{"summary", summary_json(a.summary)},
              {"metric", to_string(a.metric)},
              {"lp_exponent", a.lp_exponent},
              {"weighting", to_string(a.weighting)},
              {"epsilon_min", a.epsilon_min},
              {"anneal", a.anneal},
              {"synthetic_draws", a.synthetic_draws},
              {"refresh_current_distance", a.refresh_current_distance},
              {"covariance_draws", a.covariance_draws},
              {"tune_tolerance", a.tune_tolerance},
              {"target_acceptance", a.target_acceptance},
              {"pilot_frames", a.pilot_frames},
              {"tolerance_range", {a.tolerance_lo, a.tolerance_hi}},
              {"tolerance_steps", a.tolerance_steps}}},
            {"sampler",
             {{"iterations", s.iterations},
              {"burn_in", s.burn_in},
              {"scan", s.scan == ScanMode::random_single ? "random-single" : "per-block"},
              {"scales", scales_json(s.scales)},
              {"tune_scales", s.tune_scales},
              {"abc_target", {s.abc_target.low, s.abc_target.high}},
              {"av_target", {s.av_target.low, s.av_target.high}},
              {"pilot", pilot_json(s.pilot)}}}};
}

TolerancePlan tolerance_plan_from_json(const Json& j) {
    Reader r(j, "");
    TolerancePlan plan;
    if (const Json* v = r.get("system")) plan.system = system_from_json(*v, "system");
    r.read("relays", plan.relays);
    r.read("snr_db", plan.snr_db);
    r.read("datasets", plan.datasets);
    if (const Json* v = r.get("epsilons")) plan.epsilons = read_list<double>(*v, "epsilons");
    if (const Json* v = r.get("configs")) {
        if (!v->is_array()) throw ConfigError("configs", "expected an array");
        plan.configs.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::string where = "configs[" + std::to_string(i) + "]";
            Reader c((*v)[i], where);
            std::string w = "SD";
            std::string m = "mahalanobis";
            c.read("weighting", w);
            c.read("metric", m);
            c.finish();
            plan.configs.push_back({wrap(where + ".weighting", [&] { return parse_weighting_kind(w); }),
                                    wrap(where + ".metric", [&] { return parse_metric_kind(m); })});
        }
    }
    if (const Json* v = r.get("summary")) plan.summary = read_summary(*v, "summary", plan.summary);
    r.read("anneal", plan.anneal);
    r.read("refresh_current_distance", plan.refresh_current_distance);
    r.read("covariance_draws", plan.covariance_draws);
    r.read("iterations", plan.iterations);
    r.read("burn_in", plan.burn_in);
    r.read("baseline_epsilon", plan.baseline_epsilon);
    r.read("baseline_iterations", plan.baseline_iterations);
    r.read("baseline_burn_in", plan.baseline_burn_in);
    if (const Json* v = r.get("scales")) plan.scales = read_scales(*v, "scales");
    if (const Json* v = r.get("target")) plan.target = read_target(*v, "target");
    if (const Json* v = r.get("pilot")) plan.pilot = read_pilot(*v, "pilot");
    r.read("max_lag", plan.max_lag);
    r.read("seed", plan.seed);
    r.finish();
    plan.validate();
    return plan;
}

Json to_json(const TolerancePlan& plan) {
    Json configs = Json::array();
    for (const auto& c : plan.configs) configs.push_back({{"weighting", to_string(c.weighting)}, {"metric", to_string(c.metric)}});
    return {{"system", to_json(plan.system)},
            {"relays", plan.relays},
            {"snr_db", plan.snr_db},
            {"datasets", plan.datasets},
            {"epsilons", plan.epsilons},
            {"configs", configs},
            {"summary", summary_json(plan.summary)},
            {"anneal", plan.anneal},
            {"refresh_current_distance", plan.refresh_current_distance},
            {"covariance_draws", plan.covariance_draws},
            {"iterations", plan.iterations},
            {"burn_in", plan.burn_in},
            {"baseline_epsilon", plan.baseline_epsilon},
            {"baseline_iterations", plan.baseline_iterations},
            {"baseline_burn_in", plan.baseline_burn_in},
            {"scales", scales_json(plan.scales)},
            {"target", {plan.target.low, plan.target.high}},
            {"pilot", pilot_json(plan.pilot)},
            {"max_lag", plan.max_lag},
            {"seed", plan.seed}};
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t config_hash(const Json& j) { return fnv1a64(j.dump()); }

std::string hex64(std::uint64_t value) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << value;
    return out.str();
}

}  // namespace relaysim
