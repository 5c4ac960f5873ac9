#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "relaysim/abc.hpp"
#include "relaysim/errors.hpp"

using namespace relaysim;

namespace {

std::vector<double> random_vector(RngStream& rng, std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal() * 2.0;
    return v;
}

Matrix random_spd(RngStream& rng, std::size_t d) {
    Matrix a(d, d);
    for (auto& v : a.values) v = rng.normal();
    Matrix s(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double acc = i == j ? 0.5 : 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += a(i, k) * a(j, k);
            s(i, j) = acc;
        }
    return s;
}

std::vector<DistanceMetric> all_metrics(RngStream& rng, std::size_t d) {
    std::vector<double> w(d);
    for (auto& x : w) x = 0.5 + rng.uniform();
    return {DistanceMetric::euclidean(), DistanceMetric::scaled_euclidean(w),
            DistanceMetric::mahalanobis(random_spd(rng, d)), DistanceMetric::lp(3.0), DistanceMetric::city_block()};
}

}  // namespace

TEST_CASE("summarize constant observation") {
    Observation y(3, 4);
    for (auto& v : y.data) v = {1.25, -0.5};
    const SummaryVector t = summarize(SummarySpec{}, y);
    REQUIRE(t.size() == 18);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(t[i] == doctest::Approx(1.25));
        CHECK(t[9 + i] == doctest::Approx(-0.5));
    }
}

TEST_CASE("summarize quantile oracle on 1..9") {
    Observation y(1, 9);
    for (std::size_t k = 0; k < 9; ++k) y(0, k) = {static_cast<double>(9 - k), 0.0};
    const SummaryVector t = summarize(SummarySpec{}, y);
    const std::vector<double> want{1.8, 2.6, 3.4, 4.2, 5.0, 5.8, 6.6, 7.4, 8.2};
    for (std::size_t i = 0; i < 9; ++i) CHECK(t[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("summarize is order free") {
    RngStream rng(3, 0);
    Observation y(4, 3);
    for (auto& v : y.data) v = rng.complex_normal(2.0);
    Observation rows(4, 3);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    for (std::size_t l = 0; l < 4; ++l)
        for (std::size_t k = 0; k < 3; ++k) rows(l, k) = y(perm[l], k);
    Observation shuffled = y;
    std::shuffle(shuffled.data.begin(), shuffled.data.end(), rng.engine());
    for (auto handling : {SummarySpec::ComplexHandling::split, SummarySpec::ComplexHandling::modulus}) {
        SummarySpec spec;
        spec.complex = handling;
        CHECK(summarize(spec, y) == summarize(spec, rows));
        CHECK(summarize(spec, y) == summarize(spec, shuffled));
    }
}

TEST_CASE("summary dimensions") {
    SummarySpec q;
    CHECK(q.dimension(5, 2) == 18);
    q.complex = SummarySpec::ComplexHandling::modulus;
    CHECK(q.dimension(5, 2) == 9);
    SummarySpec id{SummarySpec::Kind::identity};
    CHECK(id.dimension(5, 2) == 20);
    Observation y(2, 2);
    y(1, 0) = {3.0, -4.0};
    const SummaryVector t = summarize(id, y);
    REQUIRE(t.size() == 8);
    CHECK(t[4] == 3.0);
    CHECK(t[5] == -4.0);
    SummarySpec bad;
    bad.levels = {0.5, 0.4};
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
}

TEST_CASE("distance hand values and identities") {
    const std::vector<double> a{1.0, 2.0}, z{0.0, 0.0};
    CHECK(distance(DistanceMetric::lp(1.0), a, z) == doctest::Approx(3.0));
    CHECK(distance(DistanceMetric::city_block(), a, z) == doctest::Approx(3.0));
    CHECK(distance(DistanceMetric::euclidean(), a, z) == doctest::Approx(5.0));
    CHECK(distance(DistanceMetric::lp(2.0), a, z) == doctest::Approx(std::sqrt(5.0)));
    CHECK(distance(DistanceMetric::scaled_euclidean({2.0, 0.5}), a, z) == doctest::Approx(4.0));
    CHECK_THROWS_AS(distance(DistanceMetric::euclidean(), a, std::vector<double>{1.0}), InvalidInput);
    CHECK_THROWS_AS(DistanceMetric::lp(0.5), InvalidParameter);
    CHECK_THROWS_AS(DistanceMetric::scaled_euclidean({1.0, 0.0}), InvalidParameter);

    RngStream rng(17, 1);
    const DistanceMetric mid = DistanceMetric::mahalanobis(Matrix::identity(6));
    for (int i = 0; i < 20; ++i) {
        const auto x = random_vector(rng, 6), y = random_vector(rng, 6);
        CHECK(distance(mid, x, y) == doctest::Approx(distance(DistanceMetric::euclidean(), x, y)));
        CHECK(distance(DistanceMetric::lp(1.0), x, y) == doctest::Approx(distance(DistanceMetric::city_block(), x, y)));
    }
}

TEST_CASE("metric axioms") {
    RngStream rng(5, 2);
    const std::size_t d = 5;
    for (const auto& m : all_metrics(rng, d)) {
        // Quadratic kinds satisfy the triangle inequality in square-root form.
        const bool quadratic = m.kind() == DistanceMetric::Kind::euclidean ||
                               m.kind() == DistanceMetric::Kind::scaled_euclidean ||
                               m.kind() == DistanceMetric::Kind::mahalanobis;
        auto dist = [&](const std::vector<double>& x, const std::vector<double>& y) {
            const double v = distance(m, x, y);
            return quadratic ? std::sqrt(v) : v;
        };
        for (int t = 0; t < 50; ++t) {
            const auto x = random_vector(rng, d), y = random_vector(rng, d), w = random_vector(rng, d);
            CHECK(distance(m, x, x) == doctest::Approx(0.0));
            CHECK(distance(m, x, y) > 0.0);
            CHECK(distance(m, x, y) == doctest::Approx(distance(m, y, x)).epsilon(1e-12));
            CHECK(dist(x, w) <= dist(x, y) + dist(y, w) + 1e-9);
        }
    }
}

TEST_CASE("mahalanobis regularises a singular covariance") {
    Matrix s(2, 2);
    s(0, 0) = s(0, 1) = s(1, 0) = s(1, 1) = 1.0;
    const DistanceMetric m = DistanceMetric::mahalanobis(s);
    CHECK(m.regularized());
    CHECK(std::isfinite(distance(m, std::vector<double>{1, -1}, std::vector<double>{0, 0})));
    CHECK_FALSE(DistanceMetric::mahalanobis(Matrix::identity(3)).regularized());
    CHECK_THROWS_AS(DistanceMetric::mahalanobis(Matrix(2, 2)), SingularMatrix);
}

TEST_CASE("scaled Euclidean from covariance equals Mahalanobis with the diagonal") {
    RngStream rng(23, 0);
    const Matrix s = random_spd(rng, 4);
    Matrix diag(4, 4);
    for (std::size_t i = 0; i < 4; ++i) diag(i, i) = s(i, i);
    const DistanceMetric se = DistanceMetric::scaled_euclidean_from_covariance(s);
    const DistanceMetric md = DistanceMetric::mahalanobis(diag);
    for (int t = 0; t < 20; ++t) {
        const auto x = random_vector(rng, 4), y = random_vector(rng, 4);
        CHECK(distance(se, x, y) == doctest::Approx(distance(md, x, y)).epsilon(1e-9));
    }
}

TEST_CASE("weighting functions") {
    const WeightingFunction hd{WeightingFunction::Kind::hard, 0.7};
    const WeightingFunction sd{WeightingFunction::Kind::soft, 0.7};
    CHECK(weight(hd, 0.7) == 1.0);
    CHECK(weight(hd, 0.7000001) == 0.0);
    CHECK(weight(hd, 0.0) == 1.0);
    CHECK(weight(sd, 0.0) == 1.0);
    CHECK(weight(sd, 0.49) == doctest::Approx(std::exp(-1.0)));
    CHECK(weight(sd, 0.49) == doctest::Approx(0.3679).epsilon(1e-4));
    CHECK(sd.log_weight(0.49) == doctest::Approx(-1.0));
    CHECK(hd.log_weight(1.0) == -std::numeric_limits<double>::infinity());
    for (const auto& w : {hd, sd}) {
        double prev = 2.0;
        for (double rho = 0.0; rho < 5.0; rho += 0.01) {
            CHECK(weight(w, rho) <= prev);
            prev = weight(w, rho);
        }
    }
    CHECK(parse_weighting_kind("SD") == WeightingFunction::Kind::soft);
    CHECK(to_string(WeightingFunction::Kind::hard) == "HD");
}

TEST_CASE("tolerance schedule") {
    const ToleranceSchedule s{20000, 0.25};
    CHECK(tolerance_at({20000, 1.0}, 1) == 19990.0);
    CHECK(tolerance_at(s, 2000) == 0.25);
    CHECK(tolerance_at(s, 1999) == 10.0);
    for (std::size_t n : {2000u, 2001u, 10000u, 20000u}) CHECK(tolerance_at(s, n) == 0.25);
    const ToleranceSchedule odd{995, 0.5};
    double prev = 1e300;
    for (std::size_t n = 1; n <= odd.iterations; ++n) {
        CHECK(tolerance_at(odd, n) <= prev);
        prev = tolerance_at(odd, n);
    }
    CHECK(tolerance_at(odd, 100) == 0.5);
    CHECK(tolerance_at(odd, 99) == 5.0);
    CHECK_THROWS_AS(tolerance_at(s, 0), InvalidParameter);
    CHECK_THROWS_AS(tolerance_at(s, 20001), InvalidParameter);
}

TEST_CASE("summary covariance with negligible noise") {
    SystemConfig c = default_system(2, 300.0);
    RngStream rng(1, 1);
    const Matrix s = estimate_summary_covariance(c, SummarySpec{}, 100, rng);
    CHECK(s.rows == 18);
    CHECK(s.norm() < 1e-12);
}

TEST_CASE("summary covariance at 15 dB is positive definite and stable") {
    const SystemConfig c = default_system(5, 15.0);
    RngStream r1(101, 0), r2(202, 0);
    const Matrix a = estimate_summary_covariance(c, SummarySpec{}, 2000, r1);
    const Matrix b = estimate_summary_covariance(c, SummarySpec{}, 2000, r2);
    REQUIRE(a.rows == 18);
    REQUIRE(a.cols == 18);
    CHECK_FALSE(DistanceMetric::mahalanobis(a).regularized());
    Matrix diff = a;
    for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= b.values[i];
    CHECK(diff.norm() < 0.1 * a.norm());
    CHECK_THROWS_AS(estimate_summary_covariance(c, SummarySpec{}, 18, r1), InsufficientData);
}

TEST_CASE("make_metric and names") {
    const Matrix s = Matrix::identity(3);
    CHECK(make_metric(DistanceMetric::Kind::mahalanobis, s).kind() == DistanceMetric::Kind::mahalanobis);
    CHECK(make_metric(DistanceMetric::Kind::lp, s, 4.0).exponent() == 4.0);
    for (auto k : {DistanceMetric::Kind::euclidean, DistanceMetric::Kind::scaled_euclidean,
                   DistanceMetric::Kind::mahalanobis, DistanceMetric::Kind::lp, DistanceMetric::Kind::city_block})
        CHECK(parse_metric_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_metric_kind("cosine"), InvalidParameter);
}
