#include "searchdid/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "searchdid/mathutil.hpp"
#include "searchdid/parallel.hpp"

namespace searchdid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double draw_normal(Rng& rng) {
    // Inverse-cdf on (0,1): the half-bit offset keeps the argument off 0 and 1.
    const double u = (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
    return norm_quantile(u);
}

struct AgentAccum {
    bool participant = false;
    double tu = 0.0;   // unemployed time in the window
    double te = 0.0;   // employed time
    double teN = 0.0;  // employed time at unprejudiced firms
    double wage_sum = 0.0, wage_sumsq = 0.0;
    double wage_sum_N = 0.0, wage_sumsq_N = 0.0;
    double wage_sum_P = 0.0, wage_sumsq_P = 0.0;
    long wages = 0, wages_N = 0, wages_P = 0;
    double wage_min = kInf;
    long matches = 0, seps = 0;
};

void run_agent(const Equilibrium& eq, WorkerGroup worker, Rng rng, double horizon, double burn_in,
               AgentAccum& acc) {
    const double v = eq.group(worker).reservation_value;
    const double z = eq.outside_dist.sample(rng);
    if (z >= v) return;  // never participates
    acc.participant = true;

    const double lam = eq.params.lambda(worker);
    const double eta = eq.params.eta;
    const double p = eq.params.p;
    const double th_n = acceptance_threshold(worker, FirmType::Unprejudiced, eq);
    const double th_p = acceptance_threshold(worker, FirmType::Prejudiced, eq);

    double t = 0.0;
    bool employed = false;
    bool at_unprejudiced = false;
    while (t < horizon) {
        const double dt = rng.exponential(employed ? eta : lam);
        const double t_next = t + dt;
        const double overlap = std::max(0.0, std::min(t_next, horizon) - std::max(t, burn_in));
        if (employed) {
            acc.te += overlap;
            if (at_unprejudiced) acc.teN += overlap;
        } else {
            acc.tu += overlap;
        }
        if (t_next >= horizon) break;

        if (employed) {
            employed = false;
            if (t_next >= burn_in) ++acc.seps;
        } else {
            const bool prejudiced = rng.bernoulli(p);
            const double x = eq.offer_dist.sample(rng);
            const double threshold = prejudiced ? th_p : th_n;
            if (x >= threshold) {
                employed = true;
                at_unprejudiced = !prejudiced;
                const double w = wage(x, worker,
                                      prejudiced ? FirmType::Prejudiced : FirmType::Unprejudiced, eq);
                if (t_next >= burn_in) {
                    ++acc.matches;
                    ++acc.wages;
                    acc.wage_sum += w;
                    acc.wage_sumsq += w * w;
                    acc.wage_min = std::min(acc.wage_min, w);
                    if (prejudiced) {
                        ++acc.wages_P;
                        acc.wage_sum_P += w;
                        acc.wage_sumsq_P += w * w;
                    } else {
                        ++acc.wages_N;
                        acc.wage_sum_N += w;
                        acc.wage_sumsq_N += w * w;
                    }
                }
            }
        }
        t = t_next;
    }
}

Estimate mean_from_sums(double sum, double sumsq, long n) {
    Estimate e;
    if (n <= 0) {
        e.value = std::nan("");
        e.se = std::nan("");
        return e;
    }
    e.value = sum / static_cast<double>(n);
    if (n == 1) {
        e.se = std::nan("");
        return e;
    }
    const double var = std::max(0.0, (sumsq - static_cast<double>(n) * e.value * e.value)
                                         / static_cast<double>(n - 1));
    e.se = std::sqrt(var / static_cast<double>(n));
    return e;
}

GroupSimStats reduce_group(const std::vector<AgentAccum>& agents, double window) {
    GroupSimStats g;
    g.n_agents = static_cast<int>(agents.size());

    double frac_sum = 0.0, frac_sumsq = 0.0;
    double wage_sum = 0.0, wage_sumsq = 0.0;
    double wage_sum_N = 0.0, wage_sumsq_N = 0.0, wage_sum_P = 0.0, wage_sumsq_P = 0.0;
    long wages = 0, wages_N = 0, wages_P = 0;
    double wage_min = kInf;
    for (const AgentAccum& a : agents) {
        if (!a.participant) continue;
        ++g.participants;
        const double f = a.tu / window;
        frac_sum += f;
        frac_sumsq += f * f;
        g.time_unemployed += a.tu;
        g.time_employed += a.te;
        g.matches_formed += a.matches;
        g.separations += a.seps;
        wage_sum += a.wage_sum;
        wage_sumsq += a.wage_sumsq;
        wage_sum_N += a.wage_sum_N;
        wage_sumsq_N += a.wage_sumsq_N;
        wage_sum_P += a.wage_sum_P;
        wage_sumsq_P += a.wage_sumsq_P;
        wages += a.wages;
        wages_N += a.wages_N;
        wages_P += a.wages_P;
        wage_min = std::min(wage_min, a.wage_min);
    }
    g.min_wage = wages > 0 ? wage_min : std::nan("");
    g.unemployment_rate = mean_from_sums(frac_sum, frac_sumsq, g.participants);
    const double l = static_cast<double>(g.participants) / static_cast<double>(g.n_agents);
    g.participation_rate.value = l;
    g.participation_rate.se = std::sqrt(l * (1.0 - l) / static_cast<double>(g.n_agents));
    g.mean_wage = mean_from_sums(wage_sum, wage_sumsq, wages);
    g.mean_wage_unprejudiced = mean_from_sums(wage_sum_N, wage_sumsq_N, wages_N);
    g.mean_wage_prejudiced = mean_from_sums(wage_sum_P, wage_sumsq_P, wages_P);
    return g;
}

}  // namespace

SimStats simulate_steady_state(const Equilibrium& eq, int n_agents, double horizon, double burn_in,
                               std::uint64_t seed, int jobs) {
    if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
    if (!(burn_in >= 0.0) || !(horizon > burn_in))
        throw std::invalid_argument("need horizon > burn_in >= 0");

    const double window = horizon - burn_in;
    std::vector<AgentAccum> minority(static_cast<std::size_t>(n_agents));
    std::vector<AgentAccum> majority(static_cast<std::size_t>(n_agents));

    parallel_for(static_cast<std::size_t>(n_agents) * 2, jobs, [&](std::size_t i) {
        const bool is_minority = i < static_cast<std::size_t>(n_agents);
        const std::size_t slot = is_minority ? i : i - static_cast<std::size_t>(n_agents);
        AgentAccum& acc = is_minority ? minority[slot] : majority[slot];
        run_agent(eq, is_minority ? WorkerGroup::Minority : WorkerGroup::Majority,
                  Rng::stream(seed, static_cast<std::uint64_t>(i)), horizon, burn_in, acc);
    });

    SimStats stats;
    stats.seed = seed;
    stats.window = window;
    stats.minority = reduce_group(minority, window);
    stats.majority = reduce_group(majority, window);
    stats.total_agent_time =
        static_cast<double>(stats.minority.participants + stats.majority.participants) * window;

    // Pooled ratio over minority agents: employed-time share at unprejudiced firms.
    double num = 0.0, den = 0.0;
    for (const AgentAccum& a : minority) {
        num += a.teN;
        den += a.te;
    }
    if (den > 0.0) {
        stats.segregation_share.value = num / den;
        double ss = 0.0;
        long n_p = 0;
        for (const AgentAccum& a : minority) {
            if (!a.participant) continue;
            ++n_p;
            const double dev = a.teN - stats.segregation_share.value * a.te;
            ss += dev * dev;
        }
        stats.segregation_share.se =
            n_p > 1 ? std::sqrt(ss * static_cast<double>(n_p) / static_cast<double>(n_p - 1)) / den
                    : std::nan("");
    } else {
        stats.segregation_share.value = std::nan("");
        stats.segregation_share.se = std::nan("");
    }
    return stats;
}

void PanelScenario::validate() const {
    const auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (n_states < 1) fail("n_states must be >= 1");
    if (n_years < 1) fail("n_years must be >= 1");
    if (couples_per_cell < 1) fail("couples_per_cell must be >= 1");
    if (opposite_couples_per_cell < 0) fail("opposite_couples_per_cell must be >= 0");
    if (treatment_year.size() != static_cast<std::size_t>(n_states))
        fail("treatment_year must list one entry per state");
    for (std::size_t s = 0; s < treatment_year.size(); ++s) {
        if (!treatment_year[s]) continue;
        if (*treatment_year[s] < first_year || *treatment_year[s] > last_year()) {
            std::ostringstream os;
            os << "treatment_year[" << s << "]=" << *treatment_year[s] << " outside ["
               << first_year << ", " << last_year() << "]";
            fail(os.str());
        }
    }
    pre_params.validate();
    post_params.validate();
    if (pre_params.lambda_majority != post_params.lambda_majority ||
        pre_params.eta != post_params.eta || pre_params.rho != post_params.rho ||
        pre_params.b != post_params.b || pre_params.alpha != post_params.alpha ||
        pre_params.p != post_params.p)
        fail("pre and post parameters may differ only in d and lambda_minority");
    offer_dist.validate();
    outside_dist.validate();
    if (!trends.empty() && trends.size() != static_cast<std::size_t>(n_states))
        fail("trends must be empty or list one entry per state");
    if (couple_noise_sd < 0 || cell_shock_sd < 0 || year_shock_sd < 0 || hours_noise_sd < 0)
        fail("noise standard deviations must be >= 0");
    if (clamp_budget < 0.0 || clamp_budget > 1.0) fail("clamp_budget must lie in [0,1]");
    if (hours_per_worker < 0.0) fail("hours_per_worker must be >= 0");
    if (marriage_rate_treated < 0.0 || marriage_rate_treated > 1.0 ||
        marriage_rate_opposite < 0.0 || marriage_rate_opposite > 1.0)
        fail("marriage rates must lie in [0,1]");
}

std::vector<std::optional<int>> PanelScenario::staggered_years(int n_states, int first_adoption,
                                                               int last_adoption, int never_every) {
    if (last_adoption < first_adoption)
        throw std::invalid_argument("staggered_years requires first_adoption <= last_adoption");
    const int span = last_adoption - first_adoption + 1;
    std::vector<std::optional<int>> years(static_cast<std::size_t>(n_states));
    int treated_rank = 0;
    for (int s = 0; s < n_states; ++s) {
        if (never_every > 0 && (s + 1) % never_every == 0) continue;  // stays nullopt
        years[static_cast<std::size_t>(s)] = first_adoption + treated_rank % span;
        ++treated_rank;
    }
    return years;
}

PanelEffects panel_effects(const PanelScenario& scenario, const SolveOptions& opts) {
    const Equilibrium pre =
        solve_equilibrium(scenario.pre_params, scenario.offer_dist, scenario.outside_dist, opts);
    const Equilibrium post =
        solve_equilibrium(scenario.post_params, scenario.offer_dist, scenario.outside_dist, opts);
    PanelEffects fx;
    fx.e_pre = pre.minority.employment_share;
    fx.e_post = post.minority.employment_share;
    fx.e_opposite = pre.majority.employment_share;
    fx.both_pre = fx.e_pre * fx.e_pre;
    fx.both_post = fx.e_post * fx.e_post;
    fx.effect_both = fx.both_post - fx.both_pre;
    return fx;
}

DataTable generate_panel(const PanelScenario& sc) {
    sc.validate();
    const PanelEffects fx = panel_effects(sc);

    const int S = sc.n_states, T = sc.n_years;
    // Year shocks (stream 0), then one stream per state-year cell for the shared
    // shock, then one stream per (cell, couple group) for the couple draws.
    std::vector<double> year_shock(static_cast<std::size_t>(T), 0.0);
    if (sc.year_shock_sd > 0.0) {
        Rng rng = Rng::stream(sc.seed, 0);
        for (double& v : year_shock) v = sc.year_shock_sd * draw_normal(rng);
    }

    const std::size_t n_rows = static_cast<std::size_t>(S) * static_cast<std::size_t>(T) *
                               (static_cast<std::size_t>(sc.couples_per_cell) +
                                static_cast<std::size_t>(sc.opposite_couples_per_cell));
    std::vector<double> col_hh, col_state, col_year, col_ssm, col_both, col_hours, col_married;
    std::vector<std::string> col_group;
    col_hh.reserve(n_rows);
    col_state.reserve(n_rows);
    col_year.reserve(n_rows);
    col_ssm.reserve(n_rows);
    col_both.reserve(n_rows);
    col_hours.reserve(n_rows);
    col_married.reserve(n_rows);
    col_group.reserve(n_rows);

    long clamped = 0;
    long latent_draws = 0;
    long long hh = 0;

    for (int s = 0; s < S; ++s) {
        for (int t_idx = 0; t_idx < T; ++t_idx) {
            const int year = sc.first_year + t_idx;
            const auto& g_year = sc.treatment_year[static_cast<std::size_t>(s)];
            const bool ssm = g_year && year >= *g_year;

            double cell_shift = year_shock[static_cast<std::size_t>(t_idx)];
            if (!sc.trends.empty()) {
                const StateTrend& tr = sc.trends[static_cast<std::size_t>(s)];
                cell_shift += tr.linear * t_idx + tr.quadratic * t_idx * t_idx;
            }
            if (sc.cell_shock_sd > 0.0) {
                Rng cell_rng = Rng::stream(sc.seed, 1 + static_cast<std::uint64_t>(s) * T + t_idx);
                cell_shift += sc.cell_shock_sd * draw_normal(cell_rng);
            }

            for (int grp = 0; grp < 2; ++grp) {
                const int couples = grp == 0 ? sc.couples_per_cell : sc.opposite_couples_per_cell;
                if (couples == 0) continue;
                const double base = grp == 0 ? (ssm ? fx.e_post : fx.e_pre) : fx.e_opposite;
                const std::uint64_t stream_id =
                    1 + static_cast<std::uint64_t>(S) * T +
                    (static_cast<std::uint64_t>(s) * T + t_idx) * 2 + static_cast<std::uint64_t>(grp);
                Rng rng = Rng::stream(sc.seed, stream_id);

                for (int c = 0; c < couples; ++c) {
                    double latent = base + cell_shift;
                    if (sc.couple_noise_sd > 0.0) latent += sc.couple_noise_sd * draw_normal(rng);
                    ++latent_draws;
                    const double prob = std::clamp(latent, 0.0, 1.0);
                    if (prob != latent) ++clamped;

                    const bool work1 = rng.uniform01() < prob;
                    const bool work2 = rng.uniform01() < prob;
                    const int workers = static_cast<int>(work1) + static_cast<int>(work2);
                    double hours = sc.hours_per_worker * workers;
                    if (sc.hours_noise_sd > 0.0) {
                        const double noise = sc.hours_noise_sd * draw_normal(rng);
                        hours = workers > 0 ? std::max(0.0, hours + noise) : 0.0;
                    }
                    const double mar_rate = grp == 0 ? (ssm ? sc.marriage_rate_treated : 0.0)
                                                     : sc.marriage_rate_opposite;
                    const bool married = rng.uniform01() < mar_rate;

                    col_hh.push_back(static_cast<double>(++hh));
                    col_state.push_back(static_cast<double>(s));
                    col_year.push_back(static_cast<double>(year));
                    col_group.push_back(grp == 0 ? "same_sex" : "opposite_sex");
                    col_ssm.push_back(ssm ? 1.0 : 0.0);
                    col_both.push_back(workers == 2 ? 1.0 : 0.0);
                    col_hours.push_back(hours);
                    col_married.push_back(married ? 1.0 : 0.0);
                }
            }
        }
    }

    if (latent_draws > 0) {
        const double share = static_cast<double>(clamped) / static_cast<double>(latent_draws);
        if (share > sc.clamp_budget) {
            std::ostringstream os;
            os << "latent probability clamped on " << clamped << " of " << latent_draws
               << " draws (share " << share << " > budget " << sc.clamp_budget
               << "); trends or noise push probabilities outside [0,1]";
            throw DataError(os.str());
        }
    }

    DataTable out;
    out.add_numeric("household_id", std::move(col_hh));
    out.add_numeric("state_id", std::move(col_state));
    out.add_numeric("year", std::move(col_year));
    out.add_text("group", std::move(col_group));
    out.add_numeric("ssm", std::move(col_ssm));
    out.add_numeric("both_working", std::move(col_both));
    out.add_numeric("hours_total", std::move(col_hours));
    out.add_numeric("married", std::move(col_married));
    return out;
}

namespace {

double both_working_outcome(ModelParams params, const Dist& offer, const Dist& outside,
                            const SolveOptions& opts) {
    const Equilibrium eq = solve_equilibrium(params, offer, outside, opts);
    const double e = eq.minority.employment_share;
    return e * e;
}

ModelParams with_knob(ModelParams params, ShockKnob knob, double value) {
    if (knob == ShockKnob::Disutility) params.d = value;
    else params.lambda_minority = value;
    return params;
}

}  // namespace

CalibrationResult calibrate_shock(const ModelParams& base, const Dist& offer, const Dist& outside,
                                  double target_effect, ShockKnob knob, const SolveOptions& opts) {
    base.validate();
    CalibrationResult res;
    res.target_effect = target_effect;
    res.pre_outcome = both_working_outcome(base, offer, outside, opts);

    const double base_knob = knob == ShockKnob::Disutility ? base.d : base.lambda_minority;
    if (target_effect == 0.0) {
        res.post_params = base;
        res.knob_value = base_knob;
        res.post_outcome = res.pre_outcome;
        res.achieved_effect = 0.0;
        return res;
    }

    const auto effect_at = [&](double k) {
        return both_working_outcome(with_knob(base, knob, k), offer, outside, opts) - res.pre_outcome;
    };

    // Orient the bracket so that moving from lo to hi moves the effect from a
    // value past the target back toward zero (effect_at(base_knob) == 0).
    double lo, hi;  // invariant: effect_at(lo) >= target >= effect_at(hi) after orientation
    const bool d_knob = knob == ShockKnob::Disutility;
    const bool helpful = target_effect > 0.0;  // direction the policy shock is meant to move
    double extreme_knob;
    if (d_knob == helpful) {
        // helpful d-shock pushes d toward 0; harmful lambda-shock pushes lambda toward 0
        extreme_knob = 0.0;
    } else {
        // expand away from the baseline until the target is covered or hopeless
        extreme_knob = std::max(1.0, base_knob);
        const double cap = 1e6 * std::max(1.0, base_knob);
        while (extreme_knob < cap) {
            const double fx = effect_at(extreme_knob);
            if ((helpful && fx >= target_effect) || (!helpful && fx <= target_effect)) break;
            extreme_knob *= 2.0;
        }
    }
    const double extreme_effect = effect_at(extreme_knob);
    if ((helpful && extreme_effect < target_effect) || (!helpful && extreme_effect > target_effect)) {
        std::ostringstream os;
        os << "target effect " << target_effect << " unreachable; attainable range ["
           << std::min(0.0, extreme_effect) << ", " << std::max(0.0, extreme_effect) << "]";
        throw std::domain_error(os.str());
    }
    if (extreme_effect == target_effect) {  // boundary hit (e.g. target equals the d->0 gain)
        res.post_params = with_knob(base, knob, extreme_knob);
        res.knob_value = extreme_knob;
        res.post_outcome = res.pre_outcome + extreme_effect;
        res.achieved_effect = extreme_effect;
        return res;
    }
    lo = extreme_knob;
    hi = base_knob;

    // Bisection: g(k) = effect_at(k) - target has g(lo) and g(hi) on opposite sides.
    double g_lo = extreme_effect - target_effect;
    double best_k = lo, best_g = g_lo;
    int it = 0;
    while (std::abs(hi - lo) > 1e-12 * std::max(1.0, std::abs(base_knob)) && it < 200) {
        ++it;
        const double mid = 0.5 * (lo + hi);
        const double g_mid = effect_at(mid) - target_effect;
        if (std::abs(g_mid) < std::abs(best_g)) {
            best_k = mid;
            best_g = g_mid;
        }
        if ((g_mid >= 0.0) == (g_lo >= 0.0)) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
        if (g_mid == 0.0) break;
    }

    res.post_params = with_knob(base, knob, best_k);
    res.knob_value = best_k;
    res.post_outcome = res.pre_outcome + best_g + target_effect;
    res.achieved_effect = res.post_outcome - res.pre_outcome;
    res.iterations = it;
    return res;
}

}  // namespace searchdid
