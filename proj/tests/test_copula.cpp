#include "npl/copula.hpp"
#include "npl/error.hpp"
#include "npl/normal.hpp"
#include "npl/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace npl;

namespace {

const std::vector<double> kGrid = regular_tau_grid(99);

// Atom of mass `zeros` / 100 at zero, then a convex ramp.
MarginalDistribution atom_fixture(int zeros) {
    std::vector<double> q(99, 0.0);
    for (int k = zeros; k < 99; ++k) q[static_cast<std::size_t>(k)] = 1.4 * std::pow((k - zeros + 1) / 99.0, 1.5);
    return MarginalDistribution::build(q, kGrid);
}

double ks_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const auto n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        d = std::max({d, (static_cast<double>(i) + 1) / n - u[i], u[i] - static_cast<double>(i) / n});
    return d;
}

} // namespace

TEST_CASE("rand_pit at a continuity point ignores u'") {
    const auto d = atom_fixture(0);
    const double y = d.quantile(0.7);
    for (double up : {0.01, 0.5, 0.99}) CHECK(rand_pit(y, d, up) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("rand_pit inside the zero atom") {
    const auto d = atom_fixture(40);
    REQUIRE(d.atom_at_zero() == doctest::Approx(0.4));
    CHECK(rand_pit(0.0, d, 0.5) == doctest::Approx(0.2));
    CHECK(rand_pit(0.0, d, 1.0 - 1e-12) == doctest::Approx(0.4));
    CHECK(rand_pit(0.0, d, 1e-300) == kUniformClamp);
}

TEST_CASE("inverse_pit") {
    const auto d = atom_fixture(40);
    CHECK(inverse_pit(0.2, d) == 0.0);
    for (int k = 41; k <= 99; ++k) {
        const double tau = kGrid[static_cast<std::size_t>(k - 1)];
        CHECK(inverse_pit(tau, d) == doctest::Approx(d.sorted_quantiles()[static_cast<std::size_t>(k - 1)]).epsilon(1e-12));
    }
    CHECK(std::isfinite(inverse_pit(0.0, d)));
    CHECK(std::isfinite(inverse_pit(1.0, d)));
}

TEST_CASE("round trip over atoms of mass 0, 0.4 and 0.99") {
    Stream rng(8, {});
    for (int zeros : {0, 40, 99}) {
        const auto d = zeros == 99 ? MarginalDistribution::build(std::vector<double>(99, 0.0), kGrid) : atom_fixture(zeros);
        for (int i = 0; i < 1000; ++i) {
            // y drawn from the law itself, so atoms are hit with their mass.
            const double y = inverse_pit(rng.uniform(), d);
            const double up = rng.uniform();
            CHECK(std::fabs(inverse_pit(rand_pit(y, d, up), d) - y) <= 1e-9);
        }
    }
}

TEST_CASE("rand_pit of draws from the law is uniform") {
    const auto d = atom_fixture(40);
    Stream rng(9, {});
    std::vector<double> u(100000);
    for (double& v : u) {
        const double y = inverse_pit(rng.uniform(), d);
        v = rand_pit(y, d, rng.uniform());
    }
    // One-sample Kolmogorov-Smirnov, 1% critical value 1.628 / sqrt(n).
    CHECK(ks_uniform(u) < 1.628 / std::sqrt(100000.0));
}

TEST_CASE("rand_pit projects rates outside the fitted support") {
    const auto d = atom_fixture(0);
    const double top = d.support_max();
    const double u = rand_pit(top + 0.05, d, 0.5);
    CHECK(u > 0.99);
    CHECK(inverse_pit(u, d) == doctest::Approx(top));
}

TEST_CASE("factor_combine") {
    CHECK(factor_combine(0.7, -1.2, 0.0) == -1.2);
    CHECK(factor_combine(0.7, -1.2, 1.0) == 0.7);
    CHECK(factor_combine(1.0, -0.5, 0.6) == doctest::Approx(0.2));
    CHECK_THROWS_AS(factor_combine(0.0, 0.0, -0.1), InvalidInput);
    CHECK_THROWS_AS(factor_combine(0.0, 0.0, 1.1), InvalidInput);
}

TEST_CASE("one-factor scores have unit variance and correlation beta_a beta_b") {
    Stream rng(10, {});
    for (double beta : {0.0, 0.3, 0.8, 1.0}) {
        const int n = 1000000;
        double s = 0, s2 = 0;
        for (int i = 0; i < n; ++i) {
            const double v = factor_combine(rng.normal(), rng.normal(), beta);
            s += v;
            s2 += v * v;
        }
        CHECK(std::fabs(s2 / n - (s / n) * (s / n) - 1.0) < 0.01);
    }
    const int n = 100000;
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < n; ++i) {
        const double m = rng.normal();
        const double a = factor_combine(m, rng.normal(), 0.3);
        const double b = factor_combine(m, rng.normal(), 0.7);
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
    }
    const double cov = sab / n - sa / n * sb / n;
    const double corr = cov / std::sqrt((saa / n - sa / n * sa / n) * (sbb / n - sb / n * sb / n));
    CHECK(std::fabs(corr - 0.21) <= 0.02);
}

TEST_CASE("factor params validation") {
    CHECK_NOTHROW(validate(FactorParams{1, 0.5, {0.0, 1.0}}));
    CHECK_THROWS_AS(validate(FactorParams{1, 0.5, {}}), InvalidInput);
    CHECK_THROWS_AS(validate(FactorParams{1, 0.5, {1.2}}), InvalidInput);
    CHECK_THROWS_AS(validate(FactorParams{1, NAN, {0.2}}), InvalidInput);
    CHECK(FactorParams{1, 0.0, {0.2, 0.4}}.beta(2) == 0.4);
}
