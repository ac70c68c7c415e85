#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "searchdid/distributions.hpp"
#include "searchdid/rng.hpp"

using searchdid::Dist;
using searchdid::Rng;

namespace {

std::vector<Dist> all_kinds() {
    return {Dist::exponential(1.3), Dist::uniform(0.5, 3.5), Dist::lognormal(0.2, 0.7),
            Dist::truncated_normal(1.0, 0.8)};
}

double pe_oracle(const Dist& d, double c) {
    const auto f = [&](double x) { return (x - c) * d.density(x); };
    const double lo = std::max(c, d.support_lo());
    if (std::isfinite(d.support_hi())) return oracle::simpson(f, lo, d.support_hi(), 20000);
    return oracle::simpson_to_inf(f, lo, 20000);
}

std::vector<double> cutoffs_for(const Dist& d) {
    const double m = d.mean();
    std::vector<double> out = {d.support_lo() + 0.05, 0.5 * (d.support_lo() + m), m, m + 1.0};
    if (std::isfinite(d.support_hi()))
        out.push_back(0.5 * (m + d.support_hi()));
    else
        out.push_back(m + 3.0);
    return out;
}

}  // namespace

TEST_CASE("parameter validation rejects bad constructions") {
    CHECK_THROWS_AS(Dist::exponential(0.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Dist::exponential(-1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Dist::uniform(2.0, 2.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Dist::uniform(3.0, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Dist::lognormal(0.0, 0.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Dist::lognormal(0.0, -0.5).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Dist::truncated_normal(1.0, 0.0).validate(), std::invalid_argument);
    for (const Dist& d : all_kinds()) CHECK_NOTHROW(d.validate());
}

TEST_CASE("cdf and quantile are inverse on the interior") {
    for (const Dist& d : all_kinds()) {
        for (double u = 0.02; u < 1.0; u += 0.02) {
            const double x = d.quantile(u);
            CHECK(d.cdf(x) == doctest::Approx(u).epsilon(1e-9));
        }
        CHECK(d.quantile(0.0) == doctest::Approx(d.support_lo()).epsilon(1e-12));
        if (std::isfinite(d.support_hi()))
            CHECK(d.quantile(1.0) == doctest::Approx(d.support_hi()).epsilon(1e-12));
        else
            CHECK(d.quantile(1.0) == std::numeric_limits<double>::infinity());
        CHECK_THROWS_AS(d.quantile(-0.1), std::invalid_argument);
        CHECK_THROWS_AS(d.quantile(1.1), std::invalid_argument);
    }
}

TEST_CASE("density integrates to one and matches the stated mean") {
    for (const Dist& d : all_kinds()) {
        const auto dens = [&](double x) { return d.density(x); };
        const auto xdens = [&](double x) { return x * d.density(x); };
        double mass, mean;
        if (std::isfinite(d.support_hi())) {
            mass = oracle::simpson(dens, d.support_lo(), d.support_hi(), 20000);
            mean = oracle::simpson(xdens, d.support_lo(), d.support_hi(), 20000);
        } else {
            mass = oracle::simpson_to_inf(dens, d.support_lo(), 20000);
            mean = oracle::simpson_to_inf(xdens, d.support_lo(), 20000);
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-7));
        CHECK(mean == doctest::Approx(d.mean()).epsilon(1e-7));
    }
}

TEST_CASE("partial expectation matches quadrature at interior and tail cutoffs") {
    for (const Dist& d : all_kinds()) {
        for (double c : cutoffs_for(d)) {
            const double expected = pe_oracle(d, c);
            CHECK(d.partial_expectation(c) == doctest::Approx(expected).epsilon(5e-7));
        }
    }
}

TEST_CASE("partial expectation of the standard lognormal at cutoff 1") {
    // E[(X-1)^+] for log X ~ N(0,1): exp(1/2)Phi(1/2) - Phi(-1/2).
    const Dist d = Dist::lognormal(0.0, 1.0);
    CHECK(d.partial_expectation(1.0) == doctest::Approx(0.887142978835004775).epsilon(1e-12));
}

TEST_CASE("partial expectation below the support is mean minus cutoff") {
    for (const Dist& d : all_kinds()) {
        const double c = d.support_lo() - 2.5;
        CHECK(d.partial_expectation(c) == doctest::Approx(d.mean() - c).epsilon(1e-12));
    }
}

TEST_CASE("partial expectation slope is minus the survival function") {
    const double h = 1e-5;
    for (const Dist& d : all_kinds()) {
        for (double c : cutoffs_for(d)) {
            const double slope =
                (d.partial_expectation(c + h) - d.partial_expectation(c - h)) / (2.0 * h);
            CHECK(slope == doctest::Approx(-d.survival(c)).epsilon(1e-6).scale(1.0));
        }
    }
}

TEST_CASE("partial expectation is nonincreasing and convex in the cutoff") {
    for (const Dist& d : all_kinds()) {
        const double lo = d.support_lo();
        std::vector<double> pe;
        for (int i = 0; i <= 20; ++i) pe.push_back(d.partial_expectation(lo + 0.25 * i));
        for (std::size_t i = 1; i < pe.size(); ++i) CHECK(pe[i] <= pe[i - 1] + 1e-12);
        for (std::size_t i = 1; i + 1 < pe.size(); ++i)
            CHECK(pe[i + 1] - pe[i] >= pe[i] - pe[i - 1] - 1e-9);
    }
}

TEST_CASE("scaling by k multiplies quantiles, means, and the partial expectation") {
    const double k = 10.0;
    for (const Dist& d : all_kinds()) {
        const Dist s = d.scaled(k);
        CHECK(s.mean() == doctest::Approx(k * d.mean()).epsilon(1e-12));
        for (double u = 0.05; u < 1.0; u += 0.05)
            CHECK(s.quantile(u) == doctest::Approx(k * d.quantile(u)).epsilon(1e-12));
        for (double c : cutoffs_for(d)) {
            const double lhs = s.partial_expectation(k * c);
            const double rhs = k * d.partial_expectation(c);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8).scale(1.0));
        }
        // survival is scale-free: S_k(k x) = S(x)
        CHECK(s.survival(k * d.mean()) == doctest::Approx(d.survival(d.mean())).epsilon(1e-12));
    }
}

TEST_CASE("sampling is deterministic, in-support, and consistent with the mean") {
    for (const Dist& d : all_kinds()) {
        Rng a(7), b(7);
        for (int i = 0; i < 5; ++i) CHECK(d.sample(a) == d.sample(b));

        Rng rng(123);
        const int n = 20000;
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = d.sample(rng);
            CHECK(x >= d.support_lo());
            CHECK(x <= d.support_hi());
            sum += x;
            sumsq += x * x;
        }
        const double mean = sum / n;
        const double sd = std::sqrt((sumsq - n * mean * mean) / (n - 1));
        CHECK(std::abs(mean - d.mean()) <= 5.0 * sd / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("describe names the family") {
    CHECK(Dist::exponential(2.0).describe().find("exponential") != std::string::npos);
    CHECK(Dist::uniform(0, 1).describe().find("uniform") != std::string::npos);
    CHECK(Dist::lognormal(0, 1).describe().find("lognormal") != std::string::npos);
    CHECK(!Dist::truncated_normal(1, 1).describe().empty());
}
