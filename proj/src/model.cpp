#include "searchdid/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "searchdid/parallel.hpp"

namespace searchdid {

namespace {
void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

const char* to_string(WorkerGroup g) {
    return g == WorkerGroup::Minority ? "minority" : "majority";
}

const char* to_string(FirmType f) {
    return f == FirmType::Unprejudiced ? "unprejudiced" : "prejudiced";
}

void ModelParams::validate() const {
    require(std::isfinite(lambda_minority) && lambda_minority >= 0.0, "lambda_minority must be >= 0");
    require(std::isfinite(lambda_majority) && lambda_majority >= 0.0, "lambda_majority must be >= 0");
    require(std::isfinite(eta) && eta > 0.0, "eta must be > 0");
    require(std::isfinite(rho) && rho > 0.0, "rho must be > 0");
    require(std::isfinite(b), "b must be finite");
    require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0,1]");
    require(std::isfinite(d) && d >= 0.0, "d must be >= 0");
    require(std::isfinite(p) && p >= 0.0 && p <= 1.0, "p must lie in [0,1]");
}

double reservation_rhs(const ModelParams& params, const Dist& offer, double v, WorkerGroup worker) {
    if (!std::isfinite(v)) throw std::invalid_argument("candidate reservation value must be finite");
    const double lam = params.lambda(worker);
    if (lam == 0.0 || params.alpha == 0.0) return params.b;
    const double shift = worker == WorkerGroup::Minority ? params.d : 0.0;
    const double surplus = params.p * offer.partial_expectation(v + shift)
                         + (1.0 - params.p) * offer.partial_expectation(v);
    return params.b + lam * params.alpha / (params.rho + params.eta) * surplus;
}

namespace {

// Bracketed bisection on [b, rhs(b)] — rhs is decreasing, so g(v)=rhs(v)-v has
// g(b) >= 0 and g(rhs(b)) <= 0 — then a short secant polish to push the
// residual toward machine precision.
GroupEquilibrium solve_reservation(const ModelParams& params, const Dist& offer,
                                   WorkerGroup worker, const SolveOptions& opts) {
    GroupEquilibrium out;
    const auto g = [&](double v) { return reservation_rhs(params, offer, v, worker) - v; };

    double lo = params.b;
    double hi = reservation_rhs(params, offer, params.b, worker);
    if (hi <= lo) {  // surplus term vanishes: v = b exactly
        out.reservation_value = params.b;
        out.residual = 0.0;
        return out;
    }
    double glo = g(lo);
    double ghi = g(hi);
    if (glo < 0.0 || ghi > 0.0) throw std::logic_error("reservation bracket invalid");

    int it = 0;
    while (hi - lo > opts.tolerance * std::max(1.0, std::abs(lo))) {
        if (++it > opts.max_iterations) {
            std::ostringstream os;
            os << "reservation solve for " << to_string(worker) << " exceeded "
               << opts.max_iterations << " iterations; bracket width " << (hi - lo);
            throw SolveError(os.str(), std::abs(g(0.5 * (lo + hi))));
        }
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm >= 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }

    double best = std::abs(glo) <= std::abs(ghi) ? lo : hi;
    double best_res = std::min(std::abs(glo), std::abs(ghi));
    // Secant polish from the bracket endpoints.
    double x0 = lo, f0 = glo, x1 = hi, f1 = ghi;
    for (int k = 0; k < 8 && f1 != f0; ++k) {
        const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if (!std::isfinite(x2)) break;
        const double f2 = g(x2);
        ++it;
        if (std::abs(f2) < best_res) {
            best = x2;
            best_res = std::abs(f2);
        }
        x0 = x1; f0 = f1; x1 = x2; f1 = f2;
        if (best_res == 0.0) break;
    }

    out.reservation_value = best;
    out.residual = best_res;
    out.iterations = it;
    return out;
}

void fill_rates(const ModelParams& params, const Dist& offer, const Dist& outside,
                WorkerGroup worker, GroupEquilibrium& geq) {
    const double v = geq.reservation_value;
    const double shift = worker == WorkerGroup::Minority ? params.d : 0.0;
    geq.acceptance_probability = params.p * offer.survival(v + shift)
                               + (1.0 - params.p) * offer.survival(v);
    const double lam = params.lambda(worker);
    const double flow_in = lam * geq.acceptance_probability;
    geq.unemployment_rate = flow_in > 0.0 ? params.eta / (params.eta + flow_in) : 1.0;
    geq.participation_rate = outside.cdf(v);
    geq.employment_share = geq.participation_rate * (1.0 - geq.unemployment_rate);
}

}  // namespace

Equilibrium solve_equilibrium(const ModelParams& params, const Dist& offer, const Dist& outside,
                              const SolveOptions& opts) {
    params.validate();
    offer.validate();
    outside.validate();
    require(std::isfinite(offer.mean()), "offer distribution must have finite mean");

    Equilibrium eq;
    eq.params = params;
    eq.offer_dist = offer;
    eq.outside_dist = outside;
    eq.minority = solve_reservation(params, offer, WorkerGroup::Minority, opts);
    eq.majority = solve_reservation(params, offer, WorkerGroup::Majority, opts);
    fill_rates(params, offer, outside, WorkerGroup::Minority, eq.minority);
    fill_rates(params, offer, outside, WorkerGroup::Majority, eq.majority);

    try {
        eq.segregation_share = segregation_share(eq.minority.reservation_value, params, offer);
        eq.segregation_defined = true;
    } catch (const std::domain_error&) {
        eq.segregation_share = 0.0;
        eq.segregation_defined = false;
    }
    return eq;
}

double acceptance_threshold(WorkerGroup worker, FirmType firm, const Equilibrium& eq) {
    const double v = eq.group(worker).reservation_value;
    const bool penalized = worker == WorkerGroup::Minority && firm == FirmType::Prejudiced;
    return v + (penalized ? eq.params.d : 0.0);
}

double wage(double x, WorkerGroup worker, FirmType firm, const Equilibrium& eq) {
    const double threshold = acceptance_threshold(worker, firm, eq);
    if (x < threshold) {
        std::ostringstream os;
        os << "wage requested for unacceptable match: x=" << x << " below threshold " << threshold
           << " (" << to_string(worker) << " at " << to_string(firm) << " firm)";
        throw std::domain_error(os.str());
    }
    const bool penalized = worker == WorkerGroup::Minority && firm == FirmType::Prejudiced;
    const double v = eq.group(worker).reservation_value;
    return eq.params.alpha * (x - (penalized ? eq.params.d : 0.0)) + (1.0 - eq.params.alpha) * v;
}

double unemployed_value(const Equilibrium& eq, WorkerGroup worker) {
    return eq.group(worker).reservation_value / eq.params.rho;
}

double employed_value(double w, const Equilibrium& eq, WorkerGroup worker) {
    return (w + eq.params.eta * unemployed_value(eq, worker)) / (eq.params.rho + eq.params.eta);
}

double nonparticipant_value(double z, const ModelParams& params) {
    return z / params.rho;
}

double segregation_share(double reservation_minority, const ModelParams& params, const Dist& offer) {
    const double sn = offer.survival(reservation_minority);
    const double sp = offer.survival(reservation_minority + params.d);
    const double denom = params.p * sp + (1.0 - params.p) * sn;
    if (denom <= 0.0)
        throw std::domain_error("no minority match is acceptable at any firm; share undefined");
    return (1.0 - params.p) * sn / denom;
}

double mean_accepted_wage(WorkerGroup worker, const Equilibrium& eq) {
    const double v = eq.group(worker).reservation_value;
    const double shift = worker == WorkerGroup::Minority ? eq.params.d : 0.0;
    const double p = eq.params.p;
    const double accept = p * eq.offer_dist.survival(v + shift) + (1.0 - p) * eq.offer_dist.survival(v);
    if (accept <= 0.0)
        throw std::domain_error("no acceptable match for this worker group; mean wage undefined");
    const double surplus = p * eq.offer_dist.partial_expectation(v + shift)
                         + (1.0 - p) * eq.offer_dist.partial_expectation(v);
    // E[wage | accepted] = v + alpha * E[(x - threshold)^+ mixture] / P(accept):
    // the d shift cancels against the threshold inside the bargained wage.
    return v + eq.params.alpha * surplus / accept;
}

Dist default_outside_dist(const ModelParams& params, const Dist& offer, const SolveOptions& opts) {
    params.validate();
    const GroupEquilibrium majority = solve_reservation(params, offer, WorkerGroup::Majority, opts);
    return Dist::uniform(0.0, 3.0 * majority.reservation_value);
}

namespace {

struct Direction {
    const char* quantity;
    const char* expected;  // nondecreasing / nonincreasing / none
};

std::vector<Direction> expected_directions(SweepParameter parameter) {
    if (parameter == SweepParameter::Disutility) {
        return {{"mean_wage", "nonincreasing"},
                {"unemployment", "nondecreasing"},
                {"participation", "nonincreasing"},
                {"segregation", "nondecreasing"}};
    }
    return {{"mean_wage", "nondecreasing"},
            {"unemployment", "nonincreasing"},
            {"participation", "nondecreasing"},
            {"segregation", "none"}};
}

MonotonicityVerdict judge(const char* quantity, const char* expected,
                          const std::vector<double>& ys, double tie_band) {
    MonotonicityVerdict v;
    v.quantity = quantity;
    v.expected = expected;
    double worst_up = 0.0;    // largest decrease (violation of nondecreasing)
    double worst_down = 0.0;  // largest increase (violation of nonincreasing)
    bool has_up = false, has_down = false;
    for (std::size_t i = 1; i < ys.size(); ++i) {
        const double step = ys[i] - ys[i - 1];
        const double band = tie_band * std::max({1.0, std::abs(ys[i - 1]), std::abs(ys[i])});
        if (step > band) {
            has_up = true;
            worst_down = std::max(worst_down, step);
        } else if (step < -band) {
            has_down = true;
            worst_up = std::max(worst_up, -step);
        }
    }
    if (!has_up && !has_down) v.observed = "constant";
    else if (has_up && has_down) v.observed = "nonmonotone";
    else v.observed = has_up ? "nondecreasing" : "nonincreasing";

    const std::string exp(expected);
    if (exp == "none") {
        v.matches_expected = true;
        v.worst_violation = 0.0;
    } else if (exp == "nondecreasing") {
        v.matches_expected = !has_down;
        v.worst_violation = worst_up;
    } else {
        v.matches_expected = !has_up;
        v.worst_violation = worst_down;
    }
    return v;
}

}  // namespace

SweepResult comparative_statics_sweep(const ModelParams& base, const Dist& offer, const Dist& outside,
                                      SweepParameter parameter, std::vector<double> grid,
                                      const SolveOptions& opts, int jobs) {
    require(!grid.empty(), "sweep grid must be non-empty");
    std::sort(grid.begin(), grid.end());
    require(std::adjacent_find(grid.begin(), grid.end()) == grid.end(),
            "sweep grid must not contain duplicate points");

    SweepResult result;
    result.parameter = parameter;
    result.tie_band = 10.0 * opts.tolerance;
    result.points.resize(grid.size());

    parallel_for(grid.size(), jobs, [&](std::size_t i) {
        SweepPoint& pt = result.points[i];
        pt.value = grid[i];
        ModelParams params = base;
        if (parameter == SweepParameter::Disutility) params.d = grid[i];
        else params.lambda_minority = grid[i];
        try {
            pt.eq = solve_equilibrium(params, offer, outside, opts);
            pt.converged = true;
            pt.degenerate = !pt.eq.segregation_defined;
            if (!pt.degenerate) pt.mean_wage_minority = mean_accepted_wage(WorkerGroup::Minority, pt.eq);
        } catch (const SolveError&) {
            pt.converged = false;
        }
    });

    result.all_converged = std::all_of(result.points.begin(), result.points.end(),
                                       [](const SweepPoint& pt) { return pt.converged; });

    std::vector<double> wage_seq, u_seq, l_seq, seg_seq;
    for (const SweepPoint& pt : result.points) {
        if (!pt.converged) continue;
        u_seq.push_back(pt.eq.minority.unemployment_rate);
        l_seq.push_back(pt.eq.minority.participation_rate);
        if (!pt.degenerate) {
            wage_seq.push_back(pt.mean_wage_minority);
            seg_seq.push_back(pt.eq.segregation_share);
        }
    }
    for (const Direction& dir : expected_directions(parameter)) {
        const std::vector<double>* seq = nullptr;
        if (dir.quantity == std::string("mean_wage")) seq = &wage_seq;
        else if (dir.quantity == std::string("unemployment")) seq = &u_seq;
        else if (dir.quantity == std::string("participation")) seq = &l_seq;
        else seq = &seg_seq;
        result.verdicts.push_back(judge(dir.quantity, dir.expected, *seq, result.tie_band));
    }
    return result;
}

}  // namespace searchdid
