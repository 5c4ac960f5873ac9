#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "relaysim/config_io.hpp"
#include "relaysim/harness.hpp"
#include "relaysim/plot.hpp"

namespace fs = std::filesystem;
using namespace relaysim;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(RELAYSIM_BIN) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::current_path() / "cli_test_tmp" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

const char* kSmallSweep = R"({
  "relays": [2],
  "snr_db": [5, 15],
  "frames": 4,
  "detectors": ["mcmc-abc", "mcmc-av", "ses-zf", "omap"],
  "abc": {"pilot_frames": 1, "covariance_draws": 200},
  "sampler": {"iterations": 1500, "burn_in": 300, "pilot": {"iterations": 800, "burn_in": 200}}
})";

}  // namespace

TEST_CASE("simulate then detect recovers a noiseless frame") {
    const fs::path d = fresh_dir("noiseless");
    write_file(d / "cfg.json", R"({"system": {"sigma_h_sq": 1e-12, "sigma_g_sq": 1e-12}})");
    const Run sim = run("simulate -q --config " + (d / "cfg.json").string() + " --frames 3 --relays 3 --snr 200 --out " +
                        d.string());
    REQUIRE(sim.status == 0);
    REQUIRE(fs::exists(d / "frames.csv"));

    const Run det = run("detect -q --config " + (d / "cfg.json").string() + " --input " + (d / "frames.csv").string() +
                        " --method ses-zf --out " + d.string());
    REQUIRE(det.status == 0);
    std::istringstream rows(det.out);
    const CsvTable t = read_csv(rows);
    REQUIRE(t.rows.size() == 3);
    for (const auto& r : t.rows) {
        CHECK(r[t.column("method")] == "ses-zf");
        CHECK(r[t.column("s_hat")] == r[t.column("truth")]);
        CHECK(r[t.column("symbol_errors")] == "0");
    }
    CHECK(slurp(d / "detections.csv") == det.out);
}

TEST_CASE("sweep output is identical across runs and thread counts") {
    const fs::path a = fresh_dir("sweep_a"), b = fresh_dir("sweep_b");
    write_file(a / "cfg.json", kSmallSweep);
    REQUIRE(run("sweep -q --config " + (a / "cfg.json").string() + " --threads 1 --out " + a.string()).status == 0);
    REQUIRE(run("sweep -q --config " + (a / "cfg.json").string() + " --threads 3 --out " + b.string()).status == 0);
    const std::string ser = slurp(a / "ser.csv");
    CHECK(ser == slurp(b / "ser.csv"));
    std::istringstream in(ser);
    const auto records = read_ser_csv(in);
    CHECK(records.size() == 8);

    const Json meta = Json::parse(slurp(a / "meta.json"));
    CHECK(meta.at("seed") == 2024);
    CHECK(meta.at("config_hash").get<std::string>().size() == 16);
    CHECK(meta == Json::parse(slurp(b / "meta.json")));
    CHECK(fs::exists(a / "timing.csv"));

    const fs::path c = fresh_dir("sweep_c");
    REQUIRE(run("sweep -q --config " + (a / "cfg.json").string() + " --out " + c.string()).status == 0);
    CHECK(slurp(c / "ser.csv") == ser);

    const fs::path e = fresh_dir("sweep_seed");
    REQUIRE(run("sweep -q --config " + (a / "cfg.json").string() + " --seed 7 --out " + e.string()).status == 0);
    CHECK(Json::parse(slurp(e / "meta.json")).at("seed") == 7);
}

TEST_CASE("invalid configs exit with status 2 and write nothing") {
    const fs::path d = fresh_dir("bad");
    const fs::path out = d / "out";
    write_file(d / "unknown.json", R"({"frames": 3, "relais": [2]})");
    write_file(d / "type.json", R"({"frames": "many"})");
    write_file(d / "syntax.json", R"({"frames": 3,)");
    write_file(d / "range.json", R"({"frames": 0})");
    for (const char* name : {"unknown.json", "type.json", "syntax.json", "range.json"}) {
        CAPTURE(name);
        const Run r = run("sweep -q --config " + (d / name).string() + " --out " + out.string());
        CHECK(r.status == 2);
        CHECK((!fs::exists(out) || fs::is_empty(out)));
    }
    CHECK(run("sweep -q --config " + (d / "missing.json").string() + " --out " + out.string()).status == 2);
    CHECK(run("detect -q --input " + (d / "missing.csv").string()).status != 0);
    CHECK(run("detect -q --input " + (d / "unknown.json").string() + " --method viterbi").status != 0);
    CHECK(run("no-such-command").status != 0);
}

TEST_CASE("plot renders the CSV files written by the harness") {
    const fs::path d = fresh_dir("plot");
    write_file(d / "ser.csv",
               "relays,snr_db,detector,symbols,frames,symbol_errors,failures,ser,config_hash,seed\n"
               "5,0,omap,2,10,8,0,0.4,0,1\n5,10,omap,2,10,2,0,0.1,0,1\n5,0,ses-zf,2,10,9,0,0.45,0,1\n");
    REQUIRE(run("plot -q --input " + (d / "ser.csv").string() + " --out " + (d / "ser.svg").string()).status == 0);
    const std::string svg = slurp(d / "ser.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<polyline") != std::string::npos);
    write_file(d / "junk.csv", "a,b\n1,2\n");
    CHECK(run("plot -q --input " + (d / "junk.csv").string() + " --out " + (d / "junk.svg").string()).status == 1);
    CHECK_FALSE(fs::exists(d / "junk.svg"));
}

TEST_CASE("tune writes one row per cell") {
    const fs::path d = fresh_dir("tune");
    write_file(d / "cfg.json", kSmallSweep);
    REQUIRE(run("tune -q --config " + (d / "cfg.json").string() + " --relays 2 --snr 10 --out " + d.string()).status ==
            0);
    std::ifstream in(d / "tuning.csv");
    const CsvTable t = read_csv(in);
    REQUIRE(t.rows.size() == 1);
    CHECK(std::stod(t.rows[0][t.column("epsilon_min")]) > 0.0);
}
