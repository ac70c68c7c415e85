#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "searchdid/model.hpp"
#include "searchdid/table.hpp"

namespace searchdid {

// Point estimate with a Monte Carlo standard error.
struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct GroupSimStats {
    Estimate unemployment_rate;   // time share unemployed, among participants
    Estimate participation_rate;  // share of agents whose outside draw is below v
    Estimate mean_wage;           // over matches formed inside the window
    Estimate mean_wage_unprejudiced;
    Estimate mean_wage_prejudiced;
    double min_wage = 0.0;        // smallest accepted wage (valid when matches_formed > 0)
    int n_agents = 0;
    int participants = 0;
    long matches_formed = 0;      // unemployed -> employed transitions in the window
    long separations = 0;         // employed -> unemployed transitions in the window
    double time_unemployed = 0.0;
    double time_employed = 0.0;
};

struct SimStats {
    GroupSimStats minority;
    GroupSimStats majority;
    Estimate segregation_share;   // employed-minority time share at unprejudiced firms
    double total_agent_time = 0.0;
    double window = 0.0;          // horizon - burn_in
    std::uint64_t seed = 0;

    const GroupSimStats& group(WorkerGroup g) const {
        return g == WorkerGroup::Minority ? minority : majority;
    }
};

// Event-driven continuous-time simulation of n_agents workers per group:
// exponential meeting clocks at rate lambda while unemployed, destruction
// clocks at rate eta while employed, firm type Bernoulli(p), offers from the
// offer law, acceptance at the equilibrium thresholds. Statistics accumulate
// over [burn_in, horizon]. Per-agent RNG streams split from the seed make the
// result independent of the jobs count.
SimStats simulate_steady_state(const Equilibrium& eq, int n_agents, double horizon, double burn_in,
                               std::uint64_t seed, int jobs = 1);

struct StateTrend {
    double linear = 0.0;     // added to the latent probability per year since the panel start
    double quadratic = 0.0;  // likewise, times (years since start)^2
};

// Staggered-adoption panel of couples. Same-sex couples are two minority
// workers, opposite-sex couples two majority workers; each partner works with
// the regime's employment share e = l*(1-u), so a policy that moves d or
// lambda_minority shifts same-sex couples only.
struct PanelScenario {
    int n_states = 51;
    int first_year = 2004;
    int n_years = 9;
    // One entry per state: adoption year, or nullopt for never-treated.
    std::vector<std::optional<int>> treatment_year;
    ModelParams pre_params;
    ModelParams post_params;  // may differ from pre only in d and/or lambda_minority
    Dist offer_dist = Dist::lognormal(0.0, 0.5);
    Dist outside_dist = Dist::uniform(0.0, 1.0);
    int couples_per_cell = 1000;        // same-sex couples per state-year
    int opposite_couples_per_cell = 0;  // opposite-sex couples per state-year
    double couple_noise_sd = 0.0;       // idiosyncratic couple-level shift of the latent probability
    double cell_shock_sd = 0.0;         // state-year shift shared by all couples in the cell
    double year_shock_sd = 0.0;         // common year shift (absorbed by year effects)
    std::vector<StateTrend> trends;     // per-state latent trends; empty = none
    double clamp_budget = 0.01;         // max tolerated share of latent values clamped to [0,1]
    double hours_per_worker = 40.0;
    double hours_noise_sd = 2.0;
    double marriage_rate_treated = 0.5;   // same-sex couples can marry only once the policy is in force
    double marriage_rate_opposite = 0.8;
    std::uint64_t seed = 1;

    void validate() const;  // throws std::invalid_argument with the offending field
    int last_year() const { return first_year + n_years - 1; }

    // Convenience pattern: states cycle through adoption years in
    // [first_adoption, last_adoption]; every never_every-th state never adopts.
    static std::vector<std::optional<int>> staggered_years(int n_states, int first_adoption,
                                                           int last_adoption, int never_every);
};

// Columns: household_id, state_id, year, group, ssm, both_working, hours_total,
// married. Deterministic for a fixed scenario (seed included).
DataTable generate_panel(const PanelScenario& scenario);

// Analytic cell probabilities behind the generator, for tests and reporting.
struct PanelEffects {
    double e_pre = 0.0;        // per-partner employment share, minority, pre
    double e_post = 0.0;       // post
    double e_opposite = 0.0;   // majority (regime-invariant)
    double both_pre = 0.0;     // e_pre^2
    double both_post = 0.0;
    double effect_both = 0.0;  // both_post - both_pre
};
PanelEffects panel_effects(const PanelScenario& scenario, const SolveOptions& opts = {});

enum class ShockKnob { Disutility, ArrivalMinority };

struct CalibrationResult {
    ModelParams post_params;
    double knob_value = 0.0;
    double target_effect = 0.0;
    double achieved_effect = 0.0;  // both-working probability, post minus pre
    double pre_outcome = 0.0;
    double post_outcome = 0.0;
    int iterations = 0;
};

// Root-solve the chosen knob (d down, or lambda_minority up) so the
// both-partners-working probability e^2 moves by target_effect. Throws
// std::domain_error reporting the attainable range when the target is out of
// reach.
CalibrationResult calibrate_shock(const ModelParams& base, const Dist& offer, const Dist& outside,
                                  double target_effect, ShockKnob knob, const SolveOptions& opts = {});

}  // namespace searchdid
