#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "searchdid/model.hpp"
#include "searchdid/rng.hpp"

using namespace searchdid;

namespace {

// Baseline with an exponential offer law: every piece has a closed form, so
// this configuration anchors the solver against an independent oracle.
ModelParams exp_params() { return ModelParams{}; }  // lambda 1/1, eta .1, rho .05, b .4, alpha .5, d .2, p .3
const Dist kExpOffer = Dist::exponential(1.0);
const Dist kExpOutside = Dist::uniform(0.0, 3.0);

// Independent reservation-value oracle: bisection on v = b + (lambda*alpha /
// (rho+eta)) * [p*PE(v+shift) + (1-p)*PE(v)] with PE computed by quadrature.
double oracle_reservation(const ModelParams& m, const Dist& offer, double shift) {
    const auto pe = [&](double c) {
        const auto f = [&](double x) { return (x - c) * offer.density(x); };
        const double lo = std::max(c, offer.support_lo());
        if (std::isfinite(offer.support_hi()))
            return oracle::simpson(f, lo, offer.support_hi(), 8192);
        return oracle::simpson_to_inf(f, lo, 8192);
    };
    const double scale = m.lambda_minority * m.alpha / (m.rho + m.eta);
    const auto g = [&](double v) {
        return m.b + scale * (m.p * pe(v + shift) + (1.0 - m.p) * pe(v)) - v;
    };
    const double hi = m.b + scale * (m.p * pe(m.b + shift) + (1.0 - m.p) * pe(m.b)) + 1.0;
    return oracle::bisect(g, m.b, hi);
}

}  // namespace

TEST_CASE("parameter validation names offending fields") {
    ModelParams m;
    m.eta = 0.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = ModelParams{};
    m.alpha = 1.5;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = ModelParams{};
    m.d = -0.1;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = ModelParams{};
    m.p = -0.2;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("exponential baseline matches the independent bisection oracle") {
    const Equilibrium eq = solve_equilibrium(exp_params(), kExpOffer, kExpOutside);
    const double v_minority = oracle_reservation(exp_params(), kExpOffer, exp_params().d);
    const double v_majority = oracle_reservation(exp_params(), kExpOffer, 0.0);
    CHECK(eq.minority.reservation_value == doctest::Approx(v_minority).epsilon(1e-8));
    CHECK(eq.majority.reservation_value == doctest::Approx(v_majority).epsilon(1e-8));
}

TEST_CASE("exponential baseline equilibrium values") {
    const Equilibrium eq = solve_equilibrium(exp_params(), kExpOffer, kExpOutside);
    CHECK(eq.minority.reservation_value == doctest::Approx(1.27807769834102288).epsilon(1e-9));
    CHECK(eq.majority.reservation_value == doctest::Approx(1.30442675746609163).epsilon(1e-9));
    CHECK(eq.minority.unemployment_rate == doctest::Approx(0.27516121664553066).epsilon(1e-9));
    CHECK(eq.minority.participation_rate == doctest::Approx(0.42602589944700763).epsilon(1e-9));
    CHECK(eq.segregation_defined);
    CHECK(eq.segregation_share == doctest::Approx(0.74025567671432646).epsilon(1e-9));
    // exponential memorylessness: mean accepted wage is v + alpha exactly
    CHECK(mean_accepted_wage(WorkerGroup::Minority, eq) ==
          doctest::Approx(1.77807769834102288).epsilon(1e-9));
    CHECK(mean_accepted_wage(WorkerGroup::Majority, eq) ==
          doctest::Approx(eq.majority.reservation_value + 0.5).epsilon(1e-10));
    // employment share identity e = l(1-u)
    CHECK(eq.minority.employment_share ==
          doctest::Approx(eq.minority.participation_rate * (1.0 - eq.minority.unemployment_rate))
              .epsilon(1e-12));
}

TEST_CASE("default lognormal configuration with the documented outside-option law") {
    const ModelParams m;
    const Dist offer = Dist::lognormal(0.0, 0.5);
    const Dist outside = default_outside_dist(m, offer);
    CHECK(outside.kind == DistKind::Uniform);
    CHECK(outside.a == 0.0);
    CHECK(outside.b == doctest::Approx(3.41554320837635211).epsilon(1e-8));

    const Equilibrium eq = solve_equilibrium(m, offer, outside);
    CHECK(eq.minority.reservation_value == doctest::Approx(1.10851992645556074).epsilon(1e-8));
    CHECK(eq.majority.reservation_value == doctest::Approx(1.13851440279211737).epsilon(1e-8));
    CHECK(eq.minority.unemployment_rate == doctest::Approx(0.20769695353361261).epsilon(1e-8));
    CHECK(eq.segregation_share == doctest::Approx(0.76772015096650902).epsilon(1e-8));
}

TEST_CASE("documented outside-option law ignores the prejudice channel") {
    const ModelParams base;
    const Dist offer = Dist::lognormal(0.0, 0.5);
    const Dist ref = default_outside_dist(base, offer);
    ModelParams m = base;
    m.d = 0.9;
    CHECK(default_outside_dist(m, offer).b == ref.b);
    m = base;
    m.lambda_minority = 0.1;
    CHECK(default_outside_dist(m, offer).b == ref.b);
}

TEST_CASE("no-contact and no-bargaining limits collapse to the unemployment flow value") {
    ModelParams m;
    m.lambda_minority = 0.0;
    Equilibrium eq = solve_equilibrium(m, kExpOffer, kExpOutside);
    CHECK(eq.minority.reservation_value == m.b);
    CHECK(eq.minority.unemployment_rate == 1.0);
    CHECK(eq.majority.reservation_value > m.b);

    m = ModelParams{};
    m.alpha = 0.0;
    eq = solve_equilibrium(m, kExpOffer, kExpOutside);
    CHECK(eq.minority.reservation_value == m.b);
    CHECK(eq.majority.reservation_value == m.b);
}

TEST_CASE("without prejudice the two groups coincide and the firm split is population share") {
    ModelParams m;
    m.d = 0.0;
    const Equilibrium eq = solve_equilibrium(m, kExpOffer, kExpOutside);
    CHECK(eq.minority.reservation_value ==
          doctest::Approx(eq.majority.reservation_value).epsilon(1e-13));
    CHECK(eq.minority.unemployment_rate ==
          doctest::Approx(eq.majority.unemployment_rate).epsilon(1e-13));
    CHECK(eq.segregation_share == doctest::Approx(1.0 - m.p).epsilon(1e-12));
}

TEST_CASE("invariants hold across random parameter draws and offer families") {
    Rng rng(42);
    const Dist offers[] = {Dist::exponential(0.8), Dist::uniform(0.0, 4.0),
                           Dist::lognormal(0.1, 0.6), Dist::truncated_normal(1.5, 1.0)};
    for (int rep = 0; rep < 100; ++rep) {
        ModelParams m;
        m.lambda_minority = rng.uniform(0.0, 3.0);
        m.lambda_majority = rng.bernoulli(0.5) ? m.lambda_minority : rng.uniform(0.0, 3.0);
        m.eta = rng.uniform(0.02, 0.8);
        m.rho = rng.uniform(0.02, 0.8);
        m.b = rng.uniform(0.0, 1.5);
        m.alpha = rng.uniform(0.0, 1.0);
        m.d = rng.uniform(0.0, 1.5);
        m.p = rng.uniform(0.0, 1.0);
        const Dist& offer = offers[rep % 4];
        const Equilibrium eq = solve_equilibrium(m, offer, kExpOutside);

        for (WorkerGroup g : {WorkerGroup::Minority, WorkerGroup::Majority}) {
            const GroupEquilibrium& ge = eq.group(g);
            CHECK(ge.reservation_value >= m.b - 1e-12);
            const double rhs = reservation_rhs(m, offer, ge.reservation_value, g);
            CHECK(std::abs(rhs - ge.reservation_value) <= 1e-7);
            CHECK(ge.unemployment_rate >= 0.0);
            CHECK(ge.unemployment_rate <= 1.0);
            CHECK(ge.participation_rate >= 0.0);
            CHECK(ge.participation_rate <= 1.0);
        }
        if (m.lambda_minority == m.lambda_majority)
            CHECK(eq.minority.reservation_value <= eq.majority.reservation_value + 1e-10);
        if (eq.segregation_defined) {
            CHECK(eq.segregation_share >= 1.0 - m.p - 1e-12);
            CHECK(eq.segregation_share <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("all-rejection configurations are flagged, not errors") {
    ModelParams m;
    m.b = 2.0;  // offers live on [0,1]: nothing beats unemployment
    const Equilibrium eq = solve_equilibrium(m, Dist::uniform(0.0, 1.0), kExpOutside);
    CHECK(eq.minority.reservation_value == m.b);
    CHECK(eq.minority.unemployment_rate == 1.0);
    CHECK(eq.minority.acceptance_probability == 0.0);
    CHECK_FALSE(eq.segregation_defined);
    CHECK_THROWS_AS(mean_accepted_wage(WorkerGroup::Minority, eq), std::domain_error);
}

TEST_CASE("bargained wages start at the reservation value and reject bad matches") {
    const Equilibrium eq = solve_equilibrium(exp_params(), kExpOffer, kExpOutside);
    for (FirmType f : {FirmType::Unprejudiced, FirmType::Prejudiced}) {
        const double th = acceptance_threshold(WorkerGroup::Minority, f, eq);
        CHECK(wage(th, WorkerGroup::Minority, f, eq) ==
              doctest::Approx(eq.minority.reservation_value).epsilon(1e-12));
        CHECK(wage(th + 1.0, WorkerGroup::Minority, f, eq) >
              wage(th + 0.5, WorkerGroup::Minority, f, eq));
        CHECK_THROWS_AS(wage(th - 1e-6, WorkerGroup::Minority, f, eq), std::domain_error);
    }
    // prejudiced-firm thresholds sit d above unprejudiced ones for the minority
    CHECK(acceptance_threshold(WorkerGroup::Minority, FirmType::Prejudiced, eq) ==
          doctest::Approx(acceptance_threshold(WorkerGroup::Minority, FirmType::Unprejudiced, eq) +
                          eq.params.d));
    CHECK(acceptance_threshold(WorkerGroup::Majority, FirmType::Prejudiced, eq) ==
          acceptance_threshold(WorkerGroup::Majority, FirmType::Unprejudiced, eq));
}

TEST_CASE("present values are consistent at the participation and acceptance margins") {
    const Equilibrium eq = solve_equilibrium(exp_params(), kExpOffer, kExpOutside);
    const double v = eq.minority.reservation_value;
    // indifference: working at the reservation wage equals staying unemployed
    CHECK(employed_value(v, eq, WorkerGroup::Minority) ==
          doctest::Approx(unemployed_value(eq, WorkerGroup::Minority)).epsilon(1e-12));
    CHECK(unemployed_value(eq, WorkerGroup::Minority) == doctest::Approx(v / eq.params.rho));
    CHECK(nonparticipant_value(v, eq.params) ==
          doctest::Approx(unemployed_value(eq, WorkerGroup::Minority)).epsilon(1e-12));
    CHECK(employed_value(v + 1.0, eq, WorkerGroup::Minority) >
          unemployed_value(eq, WorkerGroup::Minority));
}

TEST_CASE("comparative statics sweep orders the grid and rejects duplicates") {
    const std::vector<double> fwd = {0.0, 0.25, 0.5, 0.75, 1.0};
    const std::vector<double> rev = {1.0, 0.75, 0.5, 0.25, 0.0};
    const SweepResult a = comparative_statics_sweep(exp_params(), kExpOffer, kExpOutside,
                                                    SweepParameter::Disutility, fwd);
    const SweepResult b = comparative_statics_sweep(exp_params(), kExpOffer, kExpOutside,
                                                    SweepParameter::Disutility, rev);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].value == b.points[i].value);
        CHECK(a.points[i].eq.minority.reservation_value ==
              b.points[i].eq.minority.reservation_value);
    }
    REQUIRE(a.verdicts.size() == b.verdicts.size());
    for (std::size_t i = 0; i < a.verdicts.size(); ++i) {
        CHECK(a.verdicts[i].observed == b.verdicts[i].observed);
        CHECK(a.verdicts[i].matches_expected == b.verdicts[i].matches_expected);
    }
    CHECK_THROWS_AS(comparative_statics_sweep(exp_params(), kExpOffer, kExpOutside,
                                              SweepParameter::Disutility, {0.1, 0.1, 0.2}),
                    std::invalid_argument);
    CHECK_THROWS_AS(comparative_statics_sweep(exp_params(), kExpOffer, kExpOutside,
                                              SweepParameter::Disutility, {}),
                    std::invalid_argument);
}

TEST_CASE("sweep results do not depend on the worker count") {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(0.1 * i);
    const SweepResult s1 = comparative_statics_sweep(exp_params(), kExpOffer, kExpOutside,
                                                     SweepParameter::Disutility, grid, {}, 1);
    const SweepResult s3 = comparative_statics_sweep(exp_params(), kExpOffer, kExpOutside,
                                                     SweepParameter::Disutility, grid, {}, 3);
    REQUIRE(s1.points.size() == s3.points.size());
    for (std::size_t i = 0; i < s1.points.size(); ++i) {
        CHECK(s1.points[i].eq.minority.reservation_value ==
              s3.points[i].eq.minority.reservation_value);
        CHECK(s1.points[i].mean_wage_minority == s3.points[i].mean_wage_minority);
    }
}

TEST_CASE("prejudice sweep moves every minority outcome in the predicted direction") {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(0.1 * i);
    const SweepResult sw = comparative_statics_sweep(exp_params(), kExpOffer, kExpOutside,
                                                     SweepParameter::Disutility, grid);
    CHECK(sw.all_converged);
    REQUIRE(sw.verdicts.size() == 4);
    for (const MonotonicityVerdict& v : sw.verdicts) {
        INFO(v.quantity, " expected ", v.expected, " observed ", v.observed);
        CHECK(v.matches_expected);
    }
}

TEST_CASE("meeting-rate sweep matches predictions, with the firm split only reported") {
    std::vector<double> grid;
    for (int i = 0; i <= 9; ++i) grid.push_back(0.2 + 0.2 * i);
    const SweepResult sw = comparative_statics_sweep(exp_params(), kExpOffer, kExpOutside,
                                                     SweepParameter::ArrivalMinority, grid);
    CHECK(sw.all_converged);
    REQUIRE(sw.verdicts.size() == 4);
    for (const MonotonicityVerdict& v : sw.verdicts) {
        INFO(v.quantity, " expected ", v.expected, " observed ", v.observed);
        CHECK(v.matches_expected);  // "none" rows are vacuously true
        if (v.quantity == "segregation") CHECK(v.expected == "none");
    }
}

TEST_CASE("iteration starvation yields flagged partial sweeps") {
    SolveOptions opts;
    opts.max_iterations = 3;
    const SweepResult sw = comparative_statics_sweep(exp_params(), kExpOffer, kExpOutside,
                                                     SweepParameter::Disutility,
                                                     {0.0, 0.5, 1.0}, opts);
    CHECK_FALSE(sw.all_converged);
    for (const SweepPoint& p : sw.points) CHECK_FALSE(p.converged);
}

TEST_CASE("solver reports iterations and a tiny residual") {
    const Equilibrium eq = solve_equilibrium(exp_params(), kExpOffer, kExpOutside);
    CHECK(eq.minority.iterations > 0);
    CHECK(eq.minority.residual <= 1e-10);
    CHECK(eq.majority.residual <= 1e-10);
}
