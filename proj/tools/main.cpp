// Command-line driver: solve/sweep/verify the search equilibrium, simulate it,
// generate staggered-adoption panels, and run the policy regressions.
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "searchdid/config.hpp"
#include "searchdid/econometrics.hpp"
#include "searchdid/model.hpp"
#include "searchdid/simulate.hpp"
#include "searchdid/table.hpp"

namespace {

using namespace searchdid;
using nlohmann::ordered_json;

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return g;
}

const char* direction_name(SweepParameter p) {
    return p == SweepParameter::Disutility ? "d" : "lambda_minority";
}

// ---------------------------------------------------------------- solve

int cmd_solve(const AppConfig& cfg, const std::string& out) {
    const Dist outside = resolved_outside(cfg);
    const Equilibrium eq = solve_equilibrium(cfg.model, cfg.offer_dist, outside, cfg.solver);

    ordered_json j = equilibrium_json(eq);
    write_json_file(j, out + "/equilibrium.json");
    write_manifest(cfg, "solve", out);

    std::printf("reservation value   minority %.9f   majority %.9f\n",
                eq.minority.reservation_value, eq.majority.reservation_value);
    std::printf("unemployment rate   minority %.6f   majority %.6f\n",
                eq.minority.unemployment_rate, eq.majority.unemployment_rate);
    std::printf("participation rate  minority %.6f   majority %.6f\n",
                eq.minority.participation_rate, eq.majority.participation_rate);
    if (eq.segregation_defined)
        std::printf("employed minority share at unprejudiced firms: %.6f\n", eq.segregation_share);
    else
        std::printf("employed minority share at unprejudiced firms: undefined\n");
    std::printf("wrote %s/equilibrium.json\n", out.c_str());
    return 0;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(const AppConfig& cfg, const std::string& out) {
    std::vector<double> grid = cfg.sweep_grid;
    if (grid.empty())
        grid = cfg.sweep_parameter == SweepParameter::Disutility ? linspace(0.0, 1.0, 21)
                                                                 : linspace(0.2, 2.0, 21);
    const Dist outside = resolved_outside(cfg);
    const SweepResult sw = comparative_statics_sweep(cfg.model, cfg.offer_dist, outside,
                                                     cfg.sweep_parameter, grid, cfg.solver, cfg.jobs);
    write_json_file(sweep_json(sw), out + "/sweep.json");
    write_sweep_csv(sw, out + "/sweep.csv");
    write_manifest(cfg, "sweep", out);

    std::printf("sweep over %s: %zu points, tie band %.3g\n", direction_name(sw.parameter),
                sw.points.size(), sw.tie_band);
    for (const MonotonicityVerdict& v : sw.verdicts)
        std::printf("  %-14s expected %-13s observed %-13s %s\n", v.quantity.c_str(),
                    v.expected.c_str(), v.observed.c_str(),
                    v.expected == "none" ? "(reported only)" : (v.matches_expected ? "ok" : "VIOLATION"));
    std::printf("wrote %s/sweep.json, %s/sweep.csv\n", out.c_str(), out.c_str());
    if (!sw.all_converged) {
        std::fprintf(stderr, "sweep: some grid points did not converge\n");
        return 2;
    }
    return 0;
}

// ---------------------------------------------------------------- verify

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

int cmd_verify(const AppConfig& cfg, const std::string& out) {
    const Dist outside = resolved_outside(cfg);
    std::vector<Check> checks;
    const auto add = [&](const std::string& name, bool pass, const std::string& detail) {
        checks.push_back({name, pass, detail});
    };

    const SweepResult dsw =
        comparative_statics_sweep(cfg.model, cfg.offer_dist, outside, SweepParameter::Disutility,
                                  linspace(0.0, 1.0, 21), cfg.solver, cfg.jobs);
    const SweepResult lsw =
        comparative_statics_sweep(cfg.model, cfg.offer_dist, outside, SweepParameter::ArrivalMinority,
                                  linspace(0.2, 2.0, 21), cfg.solver, cfg.jobs);

    char buf[160];
    add("d sweep converged", dsw.all_converged, "");
    for (const MonotonicityVerdict& v : dsw.verdicts) {
        if (v.expected == "none") continue;
        std::snprintf(buf, sizeof buf, "expected %s, observed %s (worst violation %.3g)",
                      v.expected.c_str(), v.observed.c_str(), v.worst_violation);
        add("d sweep: minority " + v.quantity + " " + v.expected, v.matches_expected, buf);
    }
    add("lambda sweep converged", lsw.all_converged, "");
    for (const MonotonicityVerdict& v : lsw.verdicts) {
        if (v.expected == "none") continue;
        std::snprintf(buf, sizeof buf, "expected %s, observed %s (worst violation %.3g)",
                      v.expected.c_str(), v.observed.c_str(), v.worst_violation);
        add("lambda sweep: minority " + v.quantity + " " + v.expected, v.matches_expected, buf);
    }

    // At d = 0 the employed-minority share at unprejudiced firms equals their
    // population share 1-p, and it can never fall below it.
    {
        ModelParams m0 = cfg.model;
        m0.d = 0.0;
        const Equilibrium eq0 = solve_equilibrium(m0, cfg.offer_dist, outside, cfg.solver);
        const double gap = std::abs(eq0.segregation_share - (1.0 - m0.p));
        std::snprintf(buf, sizeof buf, "share %.12f vs 1-p %.12f", eq0.segregation_share, 1.0 - m0.p);
        add("segregation share equals 1-p at d=0", eq0.segregation_defined && gap <= 1e-8, buf);
    }
    {
        double worst = 0.0;
        bool all_defined_ok = true;
        for (const SweepPoint& p : dsw.points) {
            if (!p.converged || !p.eq.segregation_defined) continue;
            worst = std::min(worst, p.eq.segregation_share - (1.0 - cfg.model.p));
            all_defined_ok = all_defined_ok && p.eq.segregation_share >= 1.0 - cfg.model.p - 1e-10;
        }
        std::snprintf(buf, sizeof buf, "smallest margin above 1-p: %.3g", worst);
        add("segregation share >= 1-p along d grid", all_defined_ok, buf);
    }

    if (cfg.model.lambda_minority == cfg.model.lambda_majority) {
        bool u_ok = true, w_ok = true, v_ok = true;
        for (const SweepPoint& p : dsw.points) {
            if (!p.converged) continue;
            v_ok = v_ok && p.eq.minority.reservation_value <=
                               p.eq.majority.reservation_value + 1e-10;
            u_ok = u_ok && p.eq.minority.unemployment_rate >=
                               p.eq.majority.unemployment_rate - 1e-10;
            if (!p.degenerate) {
                double wmaj = 0.0;
                try {
                    wmaj = mean_accepted_wage(WorkerGroup::Majority, p.eq);
                    w_ok = w_ok && p.mean_wage_minority <= wmaj + 1e-10;
                } catch (const std::domain_error&) {
                }
            }
        }
        add("minority reservation value <= majority along d grid", v_ok, "");
        add("minority unemployment >= majority along d grid", u_ok, "");
        add("minority mean wage <= majority along d grid", w_ok, "");
    }

    bool all_pass = true;
    ordered_json cj = ordered_json::array();
    for (const Check& c : checks) {
        all_pass = all_pass && c.pass;
        std::printf("%s  %s%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.empty() ? "" : "  -- ", c.detail.c_str());
        cj.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    }
    ordered_json j;
    j["checks"] = cj;
    j["all_pass"] = all_pass;
    j["d_sweep"] = sweep_json(dsw);
    j["lambda_sweep"] = sweep_json(lsw);
    write_json_file(j, out + "/verify.json");
    write_manifest(cfg, "verify", out);
    std::printf("%s (%zu checks)\n", all_pass ? "all checks passed" : "CHECKS FAILED", checks.size());
    return all_pass ? 0 : 2;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const AppConfig& cfg, const std::string& out) {
    const Dist outside = resolved_outside(cfg);
    const Equilibrium eq = solve_equilibrium(cfg.model, cfg.offer_dist, outside, cfg.solver);
    const SimStats sim =
        simulate_steady_state(eq, cfg.n_agents, cfg.horizon, cfg.burn_in, cfg.seed, cfg.jobs);

    const auto z = [](double simv, double se, double ana) {
        return se > 0.0 ? (simv - ana) / se : std::nan("");
    };
    struct Row {
        const char* name;
        double analytic;
        Estimate sim;
    };
    const Row rows[] = {
        {"unemployment minority", eq.minority.unemployment_rate, sim.minority.unemployment_rate},
        {"unemployment majority", eq.majority.unemployment_rate, sim.majority.unemployment_rate},
        {"participation minority", eq.minority.participation_rate, sim.minority.participation_rate},
        {"participation majority", eq.majority.participation_rate, sim.majority.participation_rate},
        {"segregation share", eq.segregation_share, sim.segregation_share},
    };
    std::printf("%-24s %12s %12s %10s %8s\n", "quantity", "analytic", "simulated", "se", "z");
    ordered_json zrows = ordered_json::array();
    for (const Row& r : rows) {
        const double zz = z(r.sim.value, r.sim.se, r.analytic);
        std::printf("%-24s %12.6f %12.6f %10.6f %8.2f\n", r.name, r.analytic, r.sim.value, r.sim.se,
                    zz);
        zrows.push_back({{"quantity", r.name},
                         {"analytic", r.analytic},
                         {"simulated", r.sim.value},
                         {"se", r.sim.se},
                         {"z", std::isnan(zz) ? ordered_json(nullptr) : ordered_json(zz)}});
    }

    ordered_json j;
    j["analytic"] = equilibrium_json(eq);
    j["simulated"] = simstats_json(sim);
    j["comparison"] = zrows;
    write_json_file(j, out + "/simulation.json");
    write_manifest(cfg, "simulate", out);
    std::printf("wrote %s/simulation.json\n", out.c_str());
    return 0;
}

// ---------------------------------------------------------------- gen-panel

int cmd_gen_panel(const AppConfig& cfg, const std::string& out) {
    const PanelScenario sc = resolved_scenario(cfg);
    const DataTable panel = generate_panel(sc);
    write_csv(panel, out + "/panel.csv");

    const PanelEffects fx = panel_effects(sc, cfg.solver);
    int treated = 0;
    for (const auto& y : sc.treatment_year)
        if (y) ++treated;
    ordered_json j;
    j["rows"] = panel.n_rows;
    j["states"] = sc.n_states;
    j["years"] = sc.n_years;
    j["treated_states"] = treated;
    j["never_treated_states"] = sc.n_states - treated;
    j["analytic"] = {{"employment_pre", fx.e_pre},
                     {"employment_post", fx.e_post},
                     {"employment_opposite", fx.e_opposite},
                     {"both_working_pre", fx.both_pre},
                     {"both_working_post", fx.both_post},
                     {"effect_both_working", fx.effect_both}};
    write_json_file(j, out + "/panel_summary.json");
    write_manifest(cfg, "gen-panel", out);

    std::printf("panel: %zu rows (%d states x %d years, %d treated)\n", panel.n_rows, sc.n_states,
                sc.n_years, treated);
    std::printf("analytic both-working probability: pre %.6f post %.6f (shift %+.6f)\n", fx.both_pre,
                fx.both_post, fx.effect_both);
    std::printf("wrote %s/panel.csv, %s/panel_summary.json\n", out.c_str(), out.c_str());
    return 0;
}

// ---------------------------------------------------------------- estimate

bool is_interest(const RegressionSpec& spec, const std::string& name) {
    if (name == spec.treatment || name.rfind("lead_", 0) == 0 || name.rfind("effect_", 0) == 0 ||
        name.rfind("lag_", 0) == 0)
        return true;
    return !spec.group_treated_level.empty() &&
           name == spec.treatment + "_x_" + spec.group_treated_level;
}

void print_interest(const RegressionSpec& spec, const RegressionResult& res) {
    std::printf("%-14s %12s %12s %8s\n", "coefficient", "estimate", "se", "t");
    for (const Coefficient& c : res.coefficients)
        if (is_interest(spec, c.name))
            std::printf("%-14s %12.6f %12.6f %8.2f\n", c.name.c_str(), c.estimate, c.se, c.t);
    std::printf("n=%ld clusters=%d params=%d engine=%s r2=%.4f\n", res.n_obs, res.n_clusters,
                res.n_params, res.engine_used.c_str(), res.r2);
}

int cmd_estimate(const AppConfig& cfg, const std::string& out, const std::string& data_path) {
    const DataTable panel = read_csv(data_path);
    const RegressionSpec& spec = cfg.regression;
    RegressionResult res;
    const char* kind;
    if (spec.leads > 0 || spec.lags > 0) {
        res = estimate_event_study(panel, spec);
        kind = "event_study";
    } else if (!spec.group_column.empty()) {
        res = estimate_ddd(panel, spec);
        kind = "triple_difference";
    } else {
        res = estimate_did(panel, spec);
        kind = "difference_in_differences";
    }

    ordered_json j;
    j["design"] = kind;
    j["data"] = data_path;
    j["result"] = regression_json(res);
    write_json_file(j, out + "/estimates.json");
    write_coefficients_csv(res, out + "/coefficients.csv");
    write_manifest(cfg, "estimate", out);

    std::printf("%s on %s\n", kind, data_path.c_str());
    print_interest(spec, res);
    std::printf("wrote %s/estimates.json, %s/coefficients.csv\n", out.c_str(), out.c_str());
    return 0;
}

// ---------------------------------------------------------------- placebo

int cmd_placebo(const AppConfig& cfg, const std::string& out) {
    PanelScenario sc = resolved_scenario(cfg);
    if (cfg.post_d || cfg.post_lambda_minority) {
        std::printf("note: placebo ignores $.scenario.post (the design is zero-effect)\n");
        sc.post_params = sc.pre_params;
    }
    sc.opposite_couples_per_cell = 0;  // the policy regression only uses the exposed group
    RegressionSpec spec = cfg.regression;
    spec.leads = spec.lags = 0;
    spec.group_column.clear();
    spec.group_treated_level.clear();

    const PlaceboReport rep =
        placebo_suite(sc, spec, cfg.placebo_reps, cfg.placebo_level, cfg.jobs);
    write_json_file(placebo_json(rep), out + "/placebo.json");
    write_manifest(cfg, "placebo", out);

    std::printf("placebo: %d reps at level %.3f -> rejection rate %.4f (MC 95%% CI [%.4f, %.4f])\n",
                rep.n_reps, rep.level, rep.rejection_rate, rep.rate_ci_lo, rep.rate_ci_hi);
    std::printf("mean estimate %.6f, sd %.6f, mean clustered se %.6f\n", rep.mean_estimate,
                rep.sd_estimate, rep.mean_se);
    std::printf("wrote %s/placebo.json\n", out.c_str());
    return 0;
}

// ---------------------------------------------------------------- pipeline

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const SolveError& e) {
        throw SolveError(std::string("pipeline stage '") + name + "': " + e.what(), e.residual);
    } catch (const DataError& e) {
        throw DataError(std::string("pipeline stage '") + name + "': " + e.what());
    } catch (const std::domain_error& e) {
        throw std::domain_error(std::string("pipeline stage '") + name + "': " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("pipeline stage '") + name + "': " + e.what());
    }
}

int cmd_pipeline(const AppConfig& cfg, const std::string& out) {
    const Dist outside = resolved_outside(cfg);

    const CalibrationResult cal = stage("calibrate", [&] {
        return calibrate_shock(cfg.model, cfg.offer_dist, outside, cfg.target_effect, cfg.knob,
                               cfg.solver);
    });
    std::printf("calibrated %s = %.9f  (both-working shift %.6f, target %.6f)\n",
                cfg.knob == ShockKnob::Disutility ? "post d" : "post lambda_minority",
                cal.knob_value, cal.achieved_effect, cal.target_effect);

    PanelScenario sc = resolved_scenario(cfg);
    sc.post_params = cal.post_params;
    const DataTable panel = stage("generate", [&] { return generate_panel(sc); });
    write_csv(panel, out + "/panel.csv");
    std::printf("panel: %zu rows -> %s/panel.csv\n", panel.n_rows, out.c_str());

    RegressionSpec base = cfg.regression;
    base.leads = base.lags = 0;
    base.group_column.clear();
    base.group_treated_level.clear();

    // The policy only moves same-sex couples; the two-group panel is for the
    // triple difference, so the plain policy regressions use the exposed group.
    const DataTable& did_panel =
        sc.opposite_couples_per_cell > 0 ? subset_by_text(panel, "group", "same_sex") : panel;

    const RegressionResult did = stage("difference-in-differences", [&] {
        return estimate_did(did_panel, base);
    });
    write_coefficients_csv(did, out + "/coefficients_did.csv");
    const Coefficient& beta = did.coefficient(base.treatment);
    std::printf("did: %s = %.6f (se %.6f), analytic shift %.6f\n", base.treatment.c_str(),
                beta.estimate, beta.se, cal.achieved_effect);

    RegressionSpec es = base;
    es.leads = cfg.regression.leads > 0 ? cfg.regression.leads : 3;
    es.lags = cfg.regression.lags > 0 ? cfg.regression.lags : 3;
    const RegressionResult event = stage("event-study", [&] {
        return estimate_event_study(did_panel, es);
    });
    write_coefficients_csv(event, out + "/coefficients_event.csv");
    print_interest(es, event);

    ordered_json j;
    j["calibration"] = calibration_json(cal);
    j["did"] = regression_json(did);
    j["did_bias"] = beta.estimate - cal.achieved_effect;
    j["event_study"] = regression_json(event);

    if (sc.opposite_couples_per_cell > 0) {
        RegressionSpec dd = base;
        dd.group_column = cfg.regression.group_column.empty() ? "group" : cfg.regression.group_column;
        dd.group_treated_level = cfg.regression.group_treated_level.empty()
                                     ? "same_sex"
                                     : cfg.regression.group_treated_level;
        const RegressionResult ddd = stage("triple-difference", [&] {
            return estimate_ddd(panel, dd);
        });
        write_coefficients_csv(ddd, out + "/coefficients_ddd.csv");
        const Coefficient& tb = ddd.coefficient(dd.treatment + "_x_" + dd.group_treated_level);
        std::printf("ddd: %s = %.6f (se %.6f)\n", tb.name.c_str(), tb.estimate, tb.se);
        j["triple_difference"] = regression_json(ddd);
    }

    if (cfg.has_placebo) {
        PanelScenario nullsc = sc;
        nullsc.post_params = nullsc.pre_params;
        nullsc.opposite_couples_per_cell = 0;
        const PlaceboReport rep = stage("placebo", [&] {
            return placebo_suite(nullsc, base, cfg.placebo_reps, cfg.placebo_level, cfg.jobs);
        });
        std::printf("placebo: rejection rate %.4f over %d reps at level %.3f\n", rep.rejection_rate,
                    rep.n_reps, rep.level);
        j["placebo"] = placebo_json(rep);
    }

    write_json_file(j, out + "/pipeline.json");
    write_manifest(cfg, "pipeline", out);
    std::printf("wrote %s/pipeline.json\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-group search equilibrium, panel simulation, and policy estimation"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> jobs_flag;
    std::optional<double> tol_flag;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_dir, "output directory (created if missing)");
    app.add_option("--seed", seed_flag, "override the configured seed");
    app.add_option("--jobs", jobs_flag, "override the configured worker count");
    app.add_option("--tolerance", tol_flag, "override the solver tolerance");

    CLI::App* c_solve = app.add_subcommand("solve", "solve the steady-state equilibrium");
    CLI::App* c_sweep = app.add_subcommand("sweep", "comparative statics along a parameter grid");
    CLI::App* c_verify =
        app.add_subcommand("verify", "check the comparative-statics predictions numerically");
    CLI::App* c_sim = app.add_subcommand("simulate", "event-driven simulation vs analytic rates");
    CLI::App* c_gen = app.add_subcommand("gen-panel", "generate a staggered-adoption couples panel");
    CLI::App* c_est = app.add_subcommand("estimate", "fit the policy regression on a panel CSV");
    std::string data_path;
    c_est->add_option("data", data_path, "panel CSV file")->required();
    CLI::App* c_pipe = app.add_subcommand(
        "pipeline", "calibrate, generate, and estimate in one run");
    CLI::App* c_plac = app.add_subcommand("placebo", "rejection rate under a zero-effect design");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        AppConfig cfg = config_path.empty() ? AppConfig{} : [&] {
            AppConfig c = load_config(config_path);
            return c;
        }();
        if (config_path.empty()) {
            // same panel-schema defaults parse_config installs
            cfg.regression.outcome = "both_working";
            cfg.regression.treatment = "ssm";
            cfg.regression.unit_fe = "state_id";
            cfg.regression.time_fe = "year";
            cfg.regression.cluster = "state_id";
        }
        if (seed_flag) cfg.seed = *seed_flag;
        if (jobs_flag) {
            if (*jobs_flag < 1) throw ConfigError("--jobs: must be at least 1");
            cfg.jobs = *jobs_flag;
        }
        if (tol_flag) {
            if (!(*tol_flag > 0.0)) throw ConfigError("--tolerance: must be positive");
            cfg.solver.tolerance = *tol_flag;
        }
        std::filesystem::create_directories(out_dir);

        if (c_solve->parsed()) return cmd_solve(cfg, out_dir);
        if (c_sweep->parsed()) return cmd_sweep(cfg, out_dir);
        if (c_verify->parsed()) return cmd_verify(cfg, out_dir);
        if (c_sim->parsed()) return cmd_simulate(cfg, out_dir);
        if (c_gen->parsed()) return cmd_gen_panel(cfg, out_dir);
        if (c_est->parsed()) return cmd_estimate(cfg, out_dir, data_path);
        if (c_pipe->parsed()) return cmd_pipeline(cfg, out_dir);
        if (c_plac->parsed()) return cmd_placebo(cfg, out_dir);
        std::fprintf(stderr, "no command given\n");
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const SolveError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
