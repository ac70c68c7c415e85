#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "searchdid/econometrics.hpp"
#include "searchdid/model.hpp"
#include "searchdid/simulate.hpp"

namespace searchdid {

inline constexpr const char* kToolVersion = "searchdid 1.0.0";

// Malformed or out-of-contract configuration (unknown keys, wrong types,
// invalid values). Messages carry the JSON path, e.g. "$.model.eta: ...".
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fully parsed run configuration. Every section is optional in the JSON; the
// defaults below are the documented baseline. Unknown keys are rejected.
struct AppConfig {
    ModelParams model;
    Dist offer_dist = Dist::lognormal(0.0, 0.5);
    bool outside_is_default = true;            // "default": uniform [0, 3*v_majority]
    Dist outside_dist = Dist::uniform(0.0, 1.0);  // used when outside_is_default == false
    SolveOptions solver;

    // sweep
    SweepParameter sweep_parameter = SweepParameter::Disutility;
    std::vector<double> sweep_grid;  // empty = command-specific default grid

    // simulate
    int n_agents = 10000;
    double horizon = 200.0;
    double burn_in = 50.0;

    // scenario (panel generator); post_* override the model parameters after adoption
    bool has_scenario = false;
    int n_states = 51;
    int first_year = 2004;
    int n_years = 9;
    bool adoption_explicit = false;
    std::vector<std::optional<int>> adoption_years;  // explicit per-state adoption
    int first_adoption = 2006;
    int last_adoption = 2011;
    int never_every = 5;
    std::optional<double> post_d;
    std::optional<double> post_lambda_minority;
    int couples_per_cell = 1000;
    int opposite_couples_per_cell = 0;
    double couple_noise_sd = 0.0;
    double cell_shock_sd = 0.0;
    double year_shock_sd = 0.0;
    std::vector<StateTrend> trends;
    double clamp_budget = 0.01;
    double hours_per_worker = 40.0;
    double hours_noise_sd = 2.0;
    double marriage_rate_treated = 0.5;
    double marriage_rate_opposite = 0.8;

    // regression (defaults match the generated panel schema)
    RegressionSpec regression;

    // placebo
    bool has_placebo = false;
    int placebo_reps = 500;
    double placebo_level = 0.05;

    // pipeline
    double target_effect = 0.024;
    ShockKnob knob = ShockKnob::Disutility;

    std::uint64_t seed = 1;
    int jobs = 1;
};

AppConfig parse_config(const std::string& json_text);  // throws ConfigError
AppConfig load_config(const std::string& path);        // throws ConfigError

// The outside-option law, solving the baseline when the config says "default".
Dist resolved_outside(const AppConfig& cfg);

// Concrete panel scenario: pre = model parameters, post = model with the
// post_* overrides applied, adoption years materialized.
PanelScenario resolved_scenario(const AppConfig& cfg);

// ---- result serialization (JSON objects; no timestamps anywhere) ----

nlohmann::ordered_json dist_json(const Dist& d);
nlohmann::ordered_json config_json(const AppConfig& cfg);
nlohmann::ordered_json equilibrium_json(const Equilibrium& eq);
nlohmann::ordered_json sweep_json(const SweepResult& sweep);
nlohmann::ordered_json simstats_json(const SimStats& sim);
nlohmann::ordered_json regression_json(const RegressionResult& res);
nlohmann::ordered_json placebo_json(const PlaceboReport& rep);
nlohmann::ordered_json calibration_json(const CalibrationResult& cal);

void write_json_file(const nlohmann::ordered_json& j, const std::string& path);

// Long-format CSV of sweep points (one row per grid value).
void write_sweep_csv(const SweepResult& sweep, const std::string& path);
// One row per reported coefficient.
void write_coefficients_csv(const RegressionResult& res, const std::string& path);

// manifest.json: tool version, command line, and the full resolved config.
void write_manifest(const AppConfig& cfg, const std::string& command, const std::string& out_dir);

}  // namespace searchdid
