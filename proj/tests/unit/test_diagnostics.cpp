#include <doctest.h>

#include <cmath>
#include <sstream>

#include "relaysim/diagnostics.hpp"
#include "relaysim/errors.hpp"

using namespace relaysim;

namespace {

std::vector<double> normals(RngStream& rng, std::size_t n, double mean = 0.0, double sd = 1.0) {
    std::vector<double> x(n);
    for (auto& v : x) v = mean + sd * rng.normal();
    return x;
}

ChainTrace accept_pattern(const std::vector<bool>& accepted) {
    ChainTrace t(1, 1, false, accepted.size());
    const std::vector<Complex> one{{1.0, 0.0}};
    for (bool a : accepted) t.push(0, one, one, {}, a, 1.0, 0, 0.0);
    return t;
}

}  // namespace

TEST_CASE("acf at lag zero and white noise") {
    RngStream rng(1, 0);
    const auto x = normals(rng, 100000);
    CHECK(std::abs(acf(x, 0) - 1.0) < 1e-6);
    CHECK(std::abs(acf(x, 10)) < 0.02);
    const auto curve = acf_curve(x, 20);
    REQUIRE(curve.size() == 21);
    CHECK(curve[0] == doctest::Approx(1.0));
    CHECK(curve[10] == acf(x, 10));
}

TEST_CASE("acf of an AR(1) process") {
    RngStream rng(2, 0);
    std::vector<double> x(100000);
    double v = 0;
    for (auto& e : x) {
        v = 0.9 * v + rng.normal();
        e = v;
    }
    CHECK(std::abs(acf(x, 1) - 0.9) < 0.02);
    CHECK(std::abs(acf(x, 5) - std::pow(0.9, 5)) < 0.03);
}

TEST_CASE("acf bounds, invariance and errors") {
    RngStream rng(3, 0);
    std::vector<double> x(500);
    double v = 0;
    for (auto& e : x) {
        v = -0.7 * v + rng.normal();
        e = v;
    }
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.5 * x[i] - 20.0;
    for (std::size_t tau = 0; tau < 499; ++tau) {
        const double a = acf(x, tau);
        CHECK(a >= -1.0 - 1e-6);
        CHECK(a <= 1.0 + 1e-6);
        CHECK(acf(y, tau) == doctest::Approx(a).epsilon(1e-9));
    }
    const std::vector<double> flat(10, 2.0);
    CHECK_THROWS_AS(acf(flat, 1), NumericDomainError);
    CHECK_THROWS_AS(acf(x, 500), InvalidParameter);
}

TEST_CASE("EDF evaluation") {
    const std::vector<double> s{3.0, 1.0, 2.0, 2.0};
    const Edf e(s);
    CHECK(e(0.5) == 0.0);
    CHECK(e(1.0) == doctest::Approx(0.25));
    CHECK(e(2.0) == doctest::Approx(0.75));
    CHECK(e.left(2.0) == doctest::Approx(0.25));
    CHECK(e(10.0) == doctest::Approx(1.0));
    CHECK(e.cumulative().back() == doctest::Approx(1.0));
    const std::vector<double> w{1.0, 3.0, 0.0, 0.0};
    const Edf we(s, w);
    CHECK(we(1.0) == doctest::Approx(0.75));
    CHECK(we(2.5) == doctest::Approx(0.75));
    CHECK_THROWS_AS(Edf(std::vector<double>{}), InsufficientData);
}

TEST_CASE("edf_max_distance hand cases") {
    const std::vector<double> a{0.0, 1.0, 2.0}, zero{0.0}, one{1.0};
    CHECK(edf_max_distance(Edf(a), Edf(a)) == 0.0);
    CHECK(edf_max_distance(Edf(zero), Edf(one)) == 1.0);
    CHECK(edf_max_distance(Edf(std::vector<double>{0, 1}), Edf(std::vector<double>{0.5, 1.5})) == doctest::Approx(0.5));
}

TEST_CASE("edf_max_distance KS null calibration") {
    RngStream rng(4, 0);
    const double crit = 1.63 * std::sqrt(2.0 / 1e4);
    int below = 0;
    for (int t = 0; t < 100; ++t) {
        const auto a = normals(rng, 10000), b = normals(rng, 10000);
        below += edf_max_distance(Edf(a), Edf(b)) < crit;
    }
    CHECK(below >= 95);
}

TEST_CASE("edf_max_distance is a metric") {
    RngStream rng(5, 0);
    for (int t = 0; t < 50; ++t) {
        const Edf a(normals(rng, 40)), b(normals(rng, 60, 0.3)), c(normals(rng, 25, -0.2, 2.0));
        const double ab = edf_max_distance(a, b), bc = edf_max_distance(b, c), ac = edf_max_distance(a, c);
        CHECK(ab == edf_max_distance(b, a));
        CHECK(ac <= ab + bc + 1e-12);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("KS against a continuous CDF") {
    RngStream rng(6, 0);
    const Edf e(normals(rng, 20000, 1.0, 0.5));
    CHECK(ks_against_cdf(e, [](double x) { return normal_cdf(x, 1.0, 0.5); }) < 0.02);
    CHECK(ks_against_cdf(e, [](double x) { return normal_cdf(x, 0.0, 0.5); }) > 0.5);
    CHECK(normal_cdf(0.0, 0.0, 1.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.2816, 0.0, 1.0) == doctest::Approx(0.9).epsilon(1e-4));
}

TEST_CASE("acceptance_rate") {
    CHECK(acceptance_rate(accept_pattern({true, true, true, true}), 0, 4) == 1.0);
    CHECK(acceptance_rate(accept_pattern({true, false, true, false, true, false}), 0, 6) == 0.5);
    CHECK(acceptance_rate(accept_pattern({false, true, false, true}), 1, 3) == 0.5);
    CHECK_THROWS_AS(acceptance_rate(accept_pattern({true, false}), 1, 1), InvalidInput);
    CHECK_THROWS_AS(acceptance_rate(accept_pattern({true, false}), 0, 3), InvalidInput);
}

TEST_CASE("codeword frequencies and total variation") {
    ChainTrace t(1, 1, false, 6);
    const std::vector<Complex> one{{1.0, 0.0}};
    for (std::uint64_t c : {3u, 0u, 1u, 1u, 2u, 1u}) t.push(c, one, one, {}, true, 1.0, 0, 0.0);
    const auto f = codeword_frequencies(t, 2, 4);
    CHECK(f == std::vector<double>{0.0, 0.75, 0.25, 0.0});
    CHECK(total_variation(f, std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(0.5));
    CHECK(total_variation(f, f) == 0.0);
    CHECK_THROWS_AS(total_variation(f, std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("diagnostic CSV tables") {
    std::ostringstream a, e;
    write_acf_csv(a, std::vector<double>{1.0, 0.5});
    CHECK(a.str() == "lag,acf\n0,1\n1,0.5\n");
    write_edf_csv(e, Edf(std::vector<double>{2.0, 1.0}));
    CHECK(e.str() == "x,edf\n1,0.5\n2,1\n");
}
