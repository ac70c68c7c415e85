#include "searchdid/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "searchdid/table.hpp"

namespace searchdid {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void cfg_fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
}

// Strict object reader: every key must be consumed, leftovers are errors.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) cfg_fail(path_, "expected an object");
    }

    const std::string& path() const { return path_; }

    bool has(const char* key) const { return j_.contains(key); }

    const json* take(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    double num(const char* key, double fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_number()) cfg_fail(path_ + "." + key, "expected a number");
        return v->get<double>();
    }

    double num_req(const char* key) {
        const json* v = take(key);
        if (!v) cfg_fail(path_ + "." + key, "required key is missing");
        if (!v->is_number()) cfg_fail(path_ + "." + key, "expected a number");
        return v->get<double>();
    }

    int integer(const char* key, int fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) cfg_fail(path_ + "." + key, "expected an integer");
        return v->get<int>();
    }

    std::uint64_t uinteger(const char* key, std::uint64_t fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
            cfg_fail(path_ + "." + key, "expected a nonnegative integer");
        return v->get<std::uint64_t>();
    }

    std::string str(const char* key, const std::string& fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_string()) cfg_fail(path_ + "." + key, "expected a string");
        return v->get<std::string>();
    }

    std::string str_req(const char* key) {
        const json* v = take(key);
        if (!v) cfg_fail(path_ + "." + key, "required key is missing");
        if (!v->is_string()) cfg_fail(path_ + "." + key, "expected a string");
        return v->get<std::string>();
    }

    void finish() {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key()))
                cfg_fail(path_ + "." + item.key(), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Dist parse_dist(const json& j, const std::string& path) {
    Section s(j, path);
    const std::string kind = s.str_req("kind");
    Dist d;
    if (kind == "exponential") {
        d = Dist::exponential(s.num_req("rate"));
    } else if (kind == "uniform") {
        d = Dist::uniform(s.num_req("lo"), s.num_req("hi"));
    } else if (kind == "lognormal") {
        d = Dist::lognormal(s.num_req("log_mean"), s.num_req("log_sd"));
    } else if (kind == "truncated_normal") {
        d = Dist::truncated_normal(s.num_req("mean"), s.num_req("sd"));
    } else {
        cfg_fail(path + ".kind", "unknown distribution kind '" + kind +
                                     "' (expected exponential, uniform, lognormal, truncated_normal)");
    }
    s.finish();
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        cfg_fail(path, e.what());
    }
    return d;
}

void parse_model(const json& j, const std::string& path, ModelParams& m) {
    Section s(j, path);
    m.lambda_minority = s.num("lambda_minority", m.lambda_minority);
    m.lambda_majority = s.num("lambda_majority", m.lambda_majority);
    m.eta = s.num("eta", m.eta);
    m.rho = s.num("rho", m.rho);
    m.b = s.num("b", m.b);
    m.alpha = s.num("alpha", m.alpha);
    m.d = s.num("d", m.d);
    m.p = s.num("p", m.p);
    s.finish();
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        cfg_fail(path, e.what());
    }
}

void parse_solver(const json& j, const std::string& path, SolveOptions& o) {
    Section s(j, path);
    o.tolerance = s.num("tolerance", o.tolerance);
    o.max_iterations = s.integer("max_iterations", o.max_iterations);
    s.finish();
    if (!(o.tolerance > 0.0)) cfg_fail(path + ".tolerance", "must be positive");
    if (o.max_iterations < 1) cfg_fail(path + ".max_iterations", "must be at least 1");
}

void parse_sweep(const json& j, const std::string& path, AppConfig& cfg) {
    Section s(j, path);
    const std::string par = s.str("parameter", "d");
    if (par == "d")
        cfg.sweep_parameter = SweepParameter::Disutility;
    else if (par == "lambda_minority")
        cfg.sweep_parameter = SweepParameter::ArrivalMinority;
    else
        cfg_fail(path + ".parameter", "expected \"d\" or \"lambda_minority\", got \"" + par + "\"");
    if (const json* g = s.take("grid")) {
        if (!g->is_array() || g->empty()) cfg_fail(path + ".grid", "expected a nonempty array");
        cfg.sweep_grid.clear();
        for (std::size_t i = 0; i < g->size(); ++i) {
            const json& v = (*g)[i];
            if (!v.is_number())
                cfg_fail(path + ".grid[" + std::to_string(i) + "]", "expected a number");
            cfg.sweep_grid.push_back(v.get<double>());
        }
    }
    s.finish();
}

void parse_simulate(const json& j, const std::string& path, AppConfig& cfg) {
    Section s(j, path);
    cfg.n_agents = s.integer("n_agents", cfg.n_agents);
    cfg.horizon = s.num("horizon", cfg.horizon);
    cfg.burn_in = s.num("burn_in", cfg.burn_in);
    s.finish();
    if (cfg.n_agents < 1) cfg_fail(path + ".n_agents", "must be at least 1");
    if (!(cfg.horizon > 0.0)) cfg_fail(path + ".horizon", "must be positive");
    if (cfg.burn_in < 0.0 || cfg.burn_in >= cfg.horizon)
        cfg_fail(path + ".burn_in", "must lie in [0, horizon)");
}

void parse_adoption(const json& j, const std::string& path, AppConfig& cfg) {
    Section s(j, path);
    const std::string pattern = s.str("pattern", "staggered");
    if (pattern == "staggered") {
        cfg.adoption_explicit = false;
        cfg.first_adoption = s.integer("first_adoption", cfg.first_adoption);
        cfg.last_adoption = s.integer("last_adoption", cfg.last_adoption);
        cfg.never_every = s.integer("never_every", cfg.never_every);
    } else if (pattern == "explicit") {
        cfg.adoption_explicit = true;
        const json* years = s.take("years");
        if (!years || !years->is_array()) cfg_fail(path + ".years", "expected an array");
        cfg.adoption_years.clear();
        for (std::size_t i = 0; i < years->size(); ++i) {
            const json& v = (*years)[i];
            if (v.is_null())
                cfg.adoption_years.push_back(std::nullopt);
            else if (v.is_number_integer())
                cfg.adoption_years.push_back(v.get<int>());
            else
                cfg_fail(path + ".years[" + std::to_string(i) + "]",
                         "expected an integer year or null (never treated)");
        }
    } else {
        cfg_fail(path + ".pattern", "expected \"staggered\" or \"explicit\"");
    }
    s.finish();
}

void parse_scenario(const json& j, const std::string& path, AppConfig& cfg) {
    Section s(j, path);
    cfg.has_scenario = true;
    cfg.n_states = s.integer("n_states", cfg.n_states);
    cfg.first_year = s.integer("first_year", cfg.first_year);
    cfg.n_years = s.integer("n_years", cfg.n_years);
    if (const json* a = s.take("adoption")) parse_adoption(*a, path + ".adoption", cfg);
    if (const json* post = s.take("post")) {
        Section ps(*post, path + ".post");
        if (ps.has("d")) cfg.post_d = ps.num_req("d");
        if (ps.has("lambda_minority")) cfg.post_lambda_minority = ps.num_req("lambda_minority");
        ps.finish();
    }
    cfg.couples_per_cell = s.integer("couples_per_cell", cfg.couples_per_cell);
    cfg.opposite_couples_per_cell =
        s.integer("opposite_couples_per_cell", cfg.opposite_couples_per_cell);
    cfg.couple_noise_sd = s.num("couple_noise_sd", cfg.couple_noise_sd);
    cfg.cell_shock_sd = s.num("cell_shock_sd", cfg.cell_shock_sd);
    cfg.year_shock_sd = s.num("year_shock_sd", cfg.year_shock_sd);
    if (const json* tr = s.take("trends")) {
        if (!tr->is_array()) cfg_fail(path + ".trends", "expected an array of objects");
        cfg.trends.clear();
        for (std::size_t i = 0; i < tr->size(); ++i) {
            Section ts((*tr)[i], path + ".trends[" + std::to_string(i) + "]");
            StateTrend t;
            t.linear = ts.num("linear", 0.0);
            t.quadratic = ts.num("quadratic", 0.0);
            ts.finish();
            cfg.trends.push_back(t);
        }
    }
    cfg.clamp_budget = s.num("clamp_budget", cfg.clamp_budget);
    cfg.hours_per_worker = s.num("hours_per_worker", cfg.hours_per_worker);
    cfg.hours_noise_sd = s.num("hours_noise_sd", cfg.hours_noise_sd);
    cfg.marriage_rate_treated = s.num("marriage_rate_treated", cfg.marriage_rate_treated);
    cfg.marriage_rate_opposite = s.num("marriage_rate_opposite", cfg.marriage_rate_opposite);
    s.finish();
}

void parse_regression(const json& j, const std::string& path, RegressionSpec& r) {
    Section s(j, path);
    r.outcome = s.str("outcome", r.outcome);
    r.treatment = s.str("treatment", r.treatment);
    r.unit_fe = s.str("unit_fe", r.unit_fe);
    r.time_fe = s.str("time_fe", r.time_fe);
    r.trend_order = s.integer("trend_order", r.trend_order);
    r.leads = s.integer("leads", r.leads);
    r.lags = s.integer("lags", r.lags);
    r.group_column = s.str("group_column", r.group_column);
    r.group_treated_level = s.str("group_treated_level", r.group_treated_level);
    if (const json* cov = s.take("covariates")) {
        if (!cov->is_array()) cfg_fail(path + ".covariates", "expected an array of column names");
        r.covariates.clear();
        for (std::size_t i = 0; i < cov->size(); ++i) {
            const json& v = (*cov)[i];
            if (!v.is_string())
                cfg_fail(path + ".covariates[" + std::to_string(i) + "]", "expected a string");
            r.covariates.push_back(v.get<std::string>());
        }
    }
    r.cluster = s.str("cluster", r.cluster);
    r.weight = s.str("weight", r.weight);
    r.unit_reference = s.str("unit_reference", r.unit_reference);
    r.time_reference = s.str("time_reference", r.time_reference);
    const std::string engine = s.str("engine", "auto");
    if (engine == "auto")
        r.engine = FeEngine::Auto;
    else if (engine == "explicit")
        r.engine = FeEngine::Explicit;
    else if (engine == "within")
        r.engine = FeEngine::Within;
    else
        cfg_fail(path + ".engine", "expected \"auto\", \"explicit\", or \"within\"");
    const std::string adj = s.str("adjustment", "CR1");
    if (adj == "CR0")
        r.adjustment = ClusterAdjustment::CR0;
    else if (adj == "CR1")
        r.adjustment = ClusterAdjustment::CR1;
    else
        cfg_fail(path + ".adjustment", "expected \"CR0\" or \"CR1\"");
    s.finish();
}

void parse_placebo(const json& j, const std::string& path, AppConfig& cfg) {
    Section s(j, path);
    cfg.has_placebo = true;
    cfg.placebo_reps = s.integer("n_reps", cfg.placebo_reps);
    cfg.placebo_level = s.num("level", cfg.placebo_level);
    s.finish();
    if (cfg.placebo_reps < 100) cfg_fail(path + ".n_reps", "must be at least 100");
    if (!(cfg.placebo_level >= 0.0 && cfg.placebo_level <= 1.0))
        cfg_fail(path + ".level", "must lie in [0, 1]");
}

void parse_pipeline(const json& j, const std::string& path, AppConfig& cfg) {
    Section s(j, path);
    cfg.target_effect = s.num("target_effect", cfg.target_effect);
    const std::string knob = s.str("knob", "d");
    if (knob == "d")
        cfg.knob = ShockKnob::Disutility;
    else if (knob == "lambda_minority")
        cfg.knob = ShockKnob::ArrivalMinority;
    else
        cfg_fail(path + ".knob", "expected \"d\" or \"lambda_minority\", got \"" + knob + "\"");
    s.finish();
}

}  // namespace

AppConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    AppConfig cfg;
    // defaults tied to the generated panel schema
    cfg.regression.outcome = "both_working";
    cfg.regression.treatment = "ssm";
    cfg.regression.unit_fe = "state_id";
    cfg.regression.time_fe = "year";
    cfg.regression.cluster = "state_id";

    Section s(root, "$");
    if (const json* j = s.take("model")) parse_model(*j, "$.model", cfg.model);
    if (const json* j = s.take("offer_dist")) cfg.offer_dist = parse_dist(*j, "$.offer_dist");
    if (const json* j = s.take("outside_dist")) {
        if (j->is_string()) {
            if (j->get<std::string>() != "default")
                cfg_fail("$.outside_dist", "the only string form is \"default\"");
            cfg.outside_is_default = true;
        } else {
            cfg.outside_is_default = false;
            cfg.outside_dist = parse_dist(*j, "$.outside_dist");
        }
    }
    if (const json* j = s.take("solver")) parse_solver(*j, "$.solver", cfg.solver);
    if (const json* j = s.take("sweep")) parse_sweep(*j, "$.sweep", cfg);
    if (const json* j = s.take("simulate")) parse_simulate(*j, "$.simulate", cfg);
    if (const json* j = s.take("scenario")) parse_scenario(*j, "$.scenario", cfg);
    if (const json* j = s.take("regression")) parse_regression(*j, "$.regression", cfg.regression);
    if (const json* j = s.take("placebo")) parse_placebo(*j, "$.placebo", cfg);
    if (const json* j = s.take("pipeline")) parse_pipeline(*j, "$.pipeline", cfg);
    cfg.seed = s.uinteger("seed", cfg.seed);
    cfg.jobs = s.integer("jobs", cfg.jobs);
    s.finish();

    if (cfg.jobs < 1) cfg_fail("$.jobs", "must be at least 1");
    return cfg;
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

Dist resolved_outside(const AppConfig& cfg) {
    if (!cfg.outside_is_default) return cfg.outside_dist;
    return default_outside_dist(cfg.model, cfg.offer_dist, cfg.solver);
}

PanelScenario resolved_scenario(const AppConfig& cfg) {
    PanelScenario sc;
    sc.n_states = cfg.n_states;
    sc.first_year = cfg.first_year;
    sc.n_years = cfg.n_years;
    if (cfg.adoption_explicit) {
        sc.treatment_year = cfg.adoption_years;
    } else {
        sc.treatment_year = PanelScenario::staggered_years(cfg.n_states, cfg.first_adoption,
                                                           cfg.last_adoption, cfg.never_every);
    }
    sc.pre_params = cfg.model;
    sc.post_params = cfg.model;
    if (cfg.post_d) sc.post_params.d = *cfg.post_d;
    if (cfg.post_lambda_minority) sc.post_params.lambda_minority = *cfg.post_lambda_minority;
    sc.offer_dist = cfg.offer_dist;
    sc.outside_dist = resolved_outside(cfg);
    sc.couples_per_cell = cfg.couples_per_cell;
    sc.opposite_couples_per_cell = cfg.opposite_couples_per_cell;
    sc.couple_noise_sd = cfg.couple_noise_sd;
    sc.cell_shock_sd = cfg.cell_shock_sd;
    sc.year_shock_sd = cfg.year_shock_sd;
    sc.trends = cfg.trends;
    sc.clamp_budget = cfg.clamp_budget;
    sc.hours_per_worker = cfg.hours_per_worker;
    sc.hours_noise_sd = cfg.hours_noise_sd;
    sc.marriage_rate_treated = cfg.marriage_rate_treated;
    sc.marriage_rate_opposite = cfg.marriage_rate_opposite;
    sc.seed = cfg.seed;
    return sc;
}

// ------------------------------ serialization ------------------------------

ordered_json dist_json(const Dist& d) {
    ordered_json j;
    switch (d.kind) {
        case DistKind::Exponential:
            j["kind"] = "exponential";
            j["rate"] = d.a;
            break;
        case DistKind::Uniform:
            j["kind"] = "uniform";
            j["lo"] = d.a;
            j["hi"] = d.b;
            break;
        case DistKind::Lognormal:
            j["kind"] = "lognormal";
            j["log_mean"] = d.a;
            j["log_sd"] = d.b;
            break;
        case DistKind::TruncatedNormal:
            j["kind"] = "truncated_normal";
            j["mean"] = d.a;
            j["sd"] = d.b;
            break;
    }
    return j;
}

namespace {

ordered_json params_json(const ModelParams& m) {
    ordered_json j;
    j["lambda_minority"] = m.lambda_minority;
    j["lambda_majority"] = m.lambda_majority;
    j["eta"] = m.eta;
    j["rho"] = m.rho;
    j["b"] = m.b;
    j["alpha"] = m.alpha;
    j["d"] = m.d;
    j["p"] = m.p;
    return j;
}

ordered_json estimate_json(const Estimate& e) {
    ordered_json j;
    j["value"] = e.value;
    j["se"] = e.se;
    return j;
}

ordered_json group_eq_json(const GroupEquilibrium& g) {
    ordered_json j;
    j["reservation_value"] = g.reservation_value;
    j["unemployment_rate"] = g.unemployment_rate;
    j["participation_rate"] = g.participation_rate;
    j["employment_share"] = g.employment_share;
    j["acceptance_probability"] = g.acceptance_probability;
    j["iterations"] = g.iterations;
    j["residual"] = g.residual;
    return j;
}

ordered_json group_sim_json(const GroupSimStats& g) {
    ordered_json j;
    j["unemployment_rate"] = estimate_json(g.unemployment_rate);
    j["participation_rate"] = estimate_json(g.participation_rate);
    j["mean_wage"] = estimate_json(g.mean_wage);
    j["mean_wage_unprejudiced"] = estimate_json(g.mean_wage_unprejudiced);
    j["mean_wage_prejudiced"] = estimate_json(g.mean_wage_prejudiced);
    j["min_wage"] = g.min_wage;
    j["n_agents"] = g.n_agents;
    j["participants"] = g.participants;
    j["matches_formed"] = g.matches_formed;
    j["separations"] = g.separations;
    j["time_unemployed"] = g.time_unemployed;
    j["time_employed"] = g.time_employed;
    return j;
}

}  // namespace

ordered_json config_json(const AppConfig& cfg) {
    ordered_json j;
    j["model"] = params_json(cfg.model);
    j["offer_dist"] = dist_json(cfg.offer_dist);
    if (cfg.outside_is_default)
        j["outside_dist"] = "default";
    else
        j["outside_dist"] = dist_json(cfg.outside_dist);
    j["solver"] = {{"tolerance", cfg.solver.tolerance}, {"max_iterations", cfg.solver.max_iterations}};
    j["sweep"] = {
        {"parameter", cfg.sweep_parameter == SweepParameter::Disutility ? "d" : "lambda_minority"},
        {"grid", cfg.sweep_grid}};
    j["simulate"] = {{"n_agents", cfg.n_agents}, {"horizon", cfg.horizon}, {"burn_in", cfg.burn_in}};
    if (cfg.has_scenario) {
        ordered_json sc;
        sc["n_states"] = cfg.n_states;
        sc["first_year"] = cfg.first_year;
        sc["n_years"] = cfg.n_years;
        if (cfg.adoption_explicit) {
            ordered_json years = ordered_json::array();
            for (const auto& y : cfg.adoption_years)
                years.push_back(y ? ordered_json(*y) : ordered_json(nullptr));
            sc["adoption"] = {{"pattern", "explicit"}, {"years", years}};
        } else {
            sc["adoption"] = {{"pattern", "staggered"},
                              {"first_adoption", cfg.first_adoption},
                              {"last_adoption", cfg.last_adoption},
                              {"never_every", cfg.never_every}};
        }
        ordered_json post = ordered_json::object();
        if (cfg.post_d) post["d"] = *cfg.post_d;
        if (cfg.post_lambda_minority) post["lambda_minority"] = *cfg.post_lambda_minority;
        sc["post"] = post;
        sc["couples_per_cell"] = cfg.couples_per_cell;
        sc["opposite_couples_per_cell"] = cfg.opposite_couples_per_cell;
        sc["couple_noise_sd"] = cfg.couple_noise_sd;
        sc["cell_shock_sd"] = cfg.cell_shock_sd;
        sc["year_shock_sd"] = cfg.year_shock_sd;
        ordered_json trends = ordered_json::array();
        for (const StateTrend& t : cfg.trends)
            trends.push_back({{"linear", t.linear}, {"quadratic", t.quadratic}});
        sc["trends"] = trends;
        sc["clamp_budget"] = cfg.clamp_budget;
        sc["hours_per_worker"] = cfg.hours_per_worker;
        sc["hours_noise_sd"] = cfg.hours_noise_sd;
        sc["marriage_rate_treated"] = cfg.marriage_rate_treated;
        sc["marriage_rate_opposite"] = cfg.marriage_rate_opposite;
        j["scenario"] = sc;
    }
    {
        const RegressionSpec& r = cfg.regression;
        ordered_json rj;
        rj["outcome"] = r.outcome;
        rj["treatment"] = r.treatment;
        rj["unit_fe"] = r.unit_fe;
        rj["time_fe"] = r.time_fe;
        rj["trend_order"] = r.trend_order;
        rj["leads"] = r.leads;
        rj["lags"] = r.lags;
        rj["group_column"] = r.group_column;
        rj["group_treated_level"] = r.group_treated_level;
        rj["covariates"] = r.covariates;
        rj["cluster"] = r.cluster;
        rj["weight"] = r.weight;
        rj["unit_reference"] = r.unit_reference;
        rj["time_reference"] = r.time_reference;
        rj["engine"] = r.engine == FeEngine::Auto       ? "auto"
                       : r.engine == FeEngine::Explicit ? "explicit"
                                                        : "within";
        rj["adjustment"] = r.adjustment == ClusterAdjustment::CR0 ? "CR0" : "CR1";
        j["regression"] = rj;
    }
    if (cfg.has_placebo)
        j["placebo"] = {{"n_reps", cfg.placebo_reps}, {"level", cfg.placebo_level}};
    j["pipeline"] = {{"target_effect", cfg.target_effect},
                     {"knob", cfg.knob == ShockKnob::Disutility ? "d" : "lambda_minority"}};
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    return j;
}

ordered_json equilibrium_json(const Equilibrium& eq) {
    ordered_json j;
    j["params"] = params_json(eq.params);
    j["offer_dist"] = dist_json(eq.offer_dist);
    j["outside_dist"] = dist_json(eq.outside_dist);
    j["minority"] = group_eq_json(eq.minority);
    j["majority"] = group_eq_json(eq.majority);
    if (eq.segregation_defined)
        j["segregation_share"] = eq.segregation_share;
    else
        j["segregation_share"] = nullptr;
    double wage_min = std::nan(""), wage_maj = std::nan("");
    try {
        wage_min = mean_accepted_wage(WorkerGroup::Minority, eq);
    } catch (const std::domain_error&) {
    }
    try {
        wage_maj = mean_accepted_wage(WorkerGroup::Majority, eq);
    } catch (const std::domain_error&) {
    }
    j["mean_wage_minority"] = std::isnan(wage_min) ? ordered_json(nullptr) : ordered_json(wage_min);
    j["mean_wage_majority"] = std::isnan(wage_maj) ? ordered_json(nullptr) : ordered_json(wage_maj);
    return j;
}

ordered_json sweep_json(const SweepResult& sweep) {
    ordered_json j;
    j["parameter"] = sweep.parameter == SweepParameter::Disutility ? "d" : "lambda_minority";
    j["tie_band"] = sweep.tie_band;
    j["all_converged"] = sweep.all_converged;
    ordered_json pts = ordered_json::array();
    for (const SweepPoint& p : sweep.points) {
        ordered_json pj;
        pj["value"] = p.value;
        pj["converged"] = p.converged;
        pj["degenerate"] = p.degenerate;
        if (p.converged) {
            pj["reservation_minority"] = p.eq.minority.reservation_value;
            pj["reservation_majority"] = p.eq.majority.reservation_value;
            pj["unemployment_minority"] = p.eq.minority.unemployment_rate;
            pj["participation_minority"] = p.eq.minority.participation_rate;
            pj["mean_wage_minority"] =
                p.degenerate ? ordered_json(nullptr) : ordered_json(p.mean_wage_minority);
            pj["segregation_share"] = p.eq.segregation_defined
                                          ? ordered_json(p.eq.segregation_share)
                                          : ordered_json(nullptr);
        }
        pts.push_back(pj);
    }
    j["points"] = pts;
    ordered_json vds = ordered_json::array();
    for (const MonotonicityVerdict& v : sweep.verdicts) {
        vds.push_back({{"quantity", v.quantity},
                       {"expected", v.expected},
                       {"observed", v.observed},
                       {"matches_expected", v.matches_expected},
                       {"worst_violation", v.worst_violation}});
    }
    j["verdicts"] = vds;
    return j;
}

ordered_json simstats_json(const SimStats& sim) {
    ordered_json j;
    j["seed"] = sim.seed;
    j["window"] = sim.window;
    j["total_agent_time"] = sim.total_agent_time;
    j["minority"] = group_sim_json(sim.minority);
    j["majority"] = group_sim_json(sim.majority);
    j["segregation_share"] = estimate_json(sim.segregation_share);
    return j;
}

ordered_json regression_json(const RegressionResult& res) {
    ordered_json j;
    j["engine"] = res.engine_used;
    j["n_obs"] = res.n_obs;
    j["n_clusters"] = res.n_clusters;
    j["n_params"] = res.n_params;
    j["absorbed_unit"] = res.absorbed_unit;
    j["absorbed_time"] = res.absorbed_time;
    j["r2"] = res.r2;
    j["root_mse"] = res.root_mse;
    j["max_orthogonality"] = res.max_orthogonality;
    j["dropped_columns"] = res.dropped_columns;
    ordered_json cs = ordered_json::array();
    for (const Coefficient& c : res.coefficients) {
        ordered_json cj;
        cj["name"] = c.name;
        cj["estimate"] = c.estimate;
        cj["se"] = c.se;
        cj["t"] = std::isnan(c.t) ? ordered_json(nullptr) : ordered_json(c.t);
        cs.push_back(cj);
    }
    j["coefficients"] = cs;
    return j;
}

ordered_json placebo_json(const PlaceboReport& rep) {
    ordered_json j;
    j["n_reps"] = rep.n_reps;
    j["level"] = rep.level;
    j["rejections"] = rep.rejections;
    j["rejection_rate"] = rep.rejection_rate;
    j["rate_ci_lo"] = rep.rate_ci_lo;
    j["rate_ci_hi"] = rep.rate_ci_hi;
    j["mean_estimate"] = rep.mean_estimate;
    j["sd_estimate"] = rep.sd_estimate;
    j["mean_se"] = rep.mean_se;
    return j;
}

ordered_json calibration_json(const CalibrationResult& cal) {
    ordered_json j;
    j["knob_value"] = cal.knob_value;
    j["target_effect"] = cal.target_effect;
    j["achieved_effect"] = cal.achieved_effect;
    j["pre_outcome"] = cal.pre_outcome;
    j["post_outcome"] = cal.post_outcome;
    j["iterations"] = cal.iterations;
    j["post_params"] = params_json(cal.post_params);
    return j;
}

void write_json_file(const ordered_json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
    DataTable t;
    const std::size_t n = sweep.points.size();
    std::vector<double> value(n), conv(n), degen(n), vmin(n), vmaj(n), u(n), l(n), w(n), seg(n);
    for (std::size_t i = 0; i < n; ++i) {
        const SweepPoint& p = sweep.points[i];
        value[i] = p.value;
        conv[i] = p.converged ? 1.0 : 0.0;
        degen[i] = p.degenerate ? 1.0 : 0.0;
        const double nan = std::nan("");
        vmin[i] = p.converged ? p.eq.minority.reservation_value : nan;
        vmaj[i] = p.converged ? p.eq.majority.reservation_value : nan;
        u[i] = p.converged ? p.eq.minority.unemployment_rate : nan;
        l[i] = p.converged ? p.eq.minority.participation_rate : nan;
        w[i] = (p.converged && !p.degenerate) ? p.mean_wage_minority : nan;
        seg[i] = (p.converged && p.eq.segregation_defined) ? p.eq.segregation_share : nan;
    }
    t.add_numeric("value", value);
    t.add_numeric("converged", conv);
    t.add_numeric("degenerate", degen);
    t.add_numeric("reservation_minority", vmin);
    t.add_numeric("reservation_majority", vmaj);
    t.add_numeric("unemployment_minority", u);
    t.add_numeric("participation_minority", l);
    t.add_numeric("mean_wage_minority", w);
    t.add_numeric("segregation_share", seg);
    write_csv(t, path);
}

void write_coefficients_csv(const RegressionResult& res, const std::string& path) {
    DataTable t;
    const std::size_t n = res.coefficients.size();
    std::vector<std::string> names(n);
    std::vector<double> est(n), se(n), tval(n);
    for (std::size_t i = 0; i < n; ++i) {
        names[i] = res.coefficients[i].name;
        est[i] = res.coefficients[i].estimate;
        se[i] = res.coefficients[i].se;
        tval[i] = res.coefficients[i].t;
    }
    t.add_text("name", names);
    t.add_numeric("estimate", est);
    t.add_numeric("se", se);
    t.add_numeric("t", tval);
    write_csv(t, path);
}

void write_manifest(const AppConfig& cfg, const std::string& command, const std::string& out_dir) {
    ordered_json j;
    j["tool"] = kToolVersion;
    j["command"] = command;
    j["config"] = config_json(cfg);
    write_json_file(j, out_dir + "/manifest.json");
}

}  // namespace searchdid
