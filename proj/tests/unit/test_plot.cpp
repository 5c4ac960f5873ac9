#include <doctest.h>

#include <sstream>

#include "relaysim/errors.hpp"
#include "relaysim/plot.hpp"

using namespace relaysim;

namespace {

std::size_t count(const std::string& haystack, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
    return n;
}

Chart chart_of(const std::string& csv) {
    std::istringstream in(csv);
    return chart_from_csv(read_csv(in));
}

}  // namespace

TEST_CASE("SER chart has one polyline per detector") {
    const std::string csv =
        "relays,snr_db,detector,symbols,frames,symbol_errors,failures,ser,config_hash,seed\n"
        "5,10,omap,2,10,2,0,0.1,0,1\n"
        "5,0,omap,2,10,8,0,0.4,0,1\n"
        "5,0,ses-zf,2,10,9,0,0.45,0,1\n";
    const Chart c = chart_of(csv);
    REQUIRE(c.series.size() == 2);
    CHECK(c.log_y);
    CHECK(c.series[0].label == "omap");
    CHECK(c.series[0].points.front().first == 0.0);
    const std::string svg = render_svg(c);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count(svg, "<polyline") == 2);
    CHECK(svg.find("ses-zf") != std::string::npos);
}

TEST_CASE("several relay counts split the series") {
    const Chart c = chart_of(
        "relays,snr_db,detector,symbols,frames,symbol_errors,failures,ser,config_hash,seed\n"
        "1,0,omap,2,10,2,0,0.1,0,1\n"
        "5,0,omap,2,10,0,0,0,0,1\n");
    REQUIRE(c.series.size() == 2);
    CHECK(c.series[1].label == "omap L=5");
    // a zero SER is drawn at the log floor
    CHECK(render_svg(c).find("nan") == std::string::npos);
}

TEST_CASE("ACF and tolerance charts") {
    const Chart acf = chart_of(
        "weighting,metric,epsilon,lag,acf\n"
        "SD,mahalanobis,0.5,0,1\nSD,mahalanobis,0.5,1,0.8\nHD,mahalanobis,0.5,0,1\nHD,mahalanobis,0.5,1,0.9\n");
    CHECK(acf.series.size() == 2);
    CHECK_FALSE(acf.log_y);
    CHECK(count(render_svg(acf), "<polyline") == 2);

    const Chart tol = chart_of(
        "weighting,metric,epsilon,mean_edf_error,mean_acceptance,stuck\n"
        "SD,mahalanobis,0.25,0.1,0.3,0\nSD,mahalanobis,0.5,0.2,0.4,0\nSD,scaled-euclidean,0.25,0.3,0.3,1\n");
    REQUIRE(tol.series.size() == 2);
    CHECK(tol.series[0].points.size() == 2);
}

TEST_CASE("labels are escaped") {
    Chart c{"a<b", "x", "y&z", false, {{"\"q\"", {{0, 1}, {1, 2}}}}};
    const std::string svg = render_svg(c);
    CHECK(svg.find("a&lt;b") != std::string::npos);
    CHECK(svg.find("y&amp;z") != std::string::npos);
    CHECK(svg.find("&quot;q&quot;") != std::string::npos);
    CHECK(count(render_svg(Chart{}), "<polyline") == 0);
}

TEST_CASE("bad CSV input") {
    std::istringstream empty("");
    CHECK_THROWS_AS(read_csv(empty), InvalidInput);
    std::istringstream ragged("a,b\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(ragged), InvalidInput);
    CHECK_THROWS_AS(chart_of("foo,bar\n1,2\n"), InvalidInput);
    CHECK_THROWS_AS(chart_of("weighting,metric,epsilon,lag,acf\nSD,m,0.5,x,1\n"), InvalidInput);
    const CsvTable t = [] {
        std::istringstream in("a,b\n1,\n");
        return read_csv(in);
    }();
    CHECK(t.rows[0].size() == 2);
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("c"), InvalidInput);
}
