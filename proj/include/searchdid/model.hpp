#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "searchdid/distributions.hpp"

namespace searchdid {

enum class WorkerGroup { Minority, Majority };
enum class FirmType { Unprejudiced, Prejudiced };

const char* to_string(WorkerGroup g);
const char* to_string(FirmType f);

// Exogenous parameters of the two-group search economy.
struct ModelParams {
    double lambda_minority = 1.0;  // meeting rate while unemployed, minority workers
    double lambda_majority = 1.0;  // meeting rate while unemployed, majority workers
    double eta = 0.1;              // job-destruction rate
    double rho = 0.05;             // discount rate
    double b = 0.4;                // flow value of unemployment
    double alpha = 0.5;            // worker bargaining weight
    double d = 0.2;                // prejudiced employers' flow disutility from a minority hire
    double p = 0.3;                // share of prejudiced employers

    void validate() const;  // throws std::invalid_argument naming the field
    double lambda(WorkerGroup g) const {
        return g == WorkerGroup::Minority ? lambda_minority : lambda_majority;
    }
};

struct SolveOptions {
    double tolerance = 1e-10;  // relative tolerance on the reservation-value fixed point
    int max_iterations = 200;
};

// Thrown when the fixed-point iteration exhausts its budget.
struct SolveError : std::runtime_error {
    double residual;
    SolveError(const std::string& msg, double res) : std::runtime_error(msg), residual(res) {}
};

struct GroupEquilibrium {
    double reservation_value = 0.0;   // v: flow value at which accepting and searching tie
    double unemployment_rate = 1.0;   // u: steady-state unemployment among participants
    double participation_rate = 0.0;  // l = Q(v)
    double employment_share = 0.0;    // e = l * (1 - u)
    double acceptance_probability = 0.0;  // chance a meeting yields an acceptable match
    int iterations = 0;
    double residual = 0.0;  // |v - rhs(v)| at the solution
};

struct Equilibrium {
    ModelParams params;
    Dist offer_dist;
    Dist outside_dist;
    GroupEquilibrium minority;
    GroupEquilibrium majority;
    // Share of employed minority workers at unprejudiced firms. Undefined
    // (flagged false) when no minority match is acceptable at any firm.
    double segregation_share = 0.0;
    bool segregation_defined = true;

    const GroupEquilibrium& group(WorkerGroup g) const {
        return g == WorkerGroup::Minority ? minority : majority;
    }
};

// b + (lambda_J * alpha / (rho + eta)) * [ p*PE(v + d*1{minority}) + (1-p)*PE(v) ].
// Strictly decreasing in v wherever offer survival is positive, so the
// reservation value is the unique fixed point, bracketed by [b, rhs(b)].
double reservation_rhs(const ModelParams& params, const Dist& offer, double v, WorkerGroup worker);

Equilibrium solve_equilibrium(const ModelParams& params, const Dist& offer, const Dist& outside,
                              const SolveOptions& opts = {});

// Offers are acceptable iff x >= threshold = v + d*1{minority at prejudiced firm}.
double acceptance_threshold(WorkerGroup worker, FirmType firm, const Equilibrium& eq);

// Bargained wage alpha*(x - d*1{minority,prejudiced}) + (1-alpha)*v.
// Throws std::domain_error when x is below the acceptance threshold.
double wage(double x, WorkerGroup worker, FirmType firm, const Equilibrium& eq);

// Present values: unemployed U = v/rho, employed V(w) = (w + eta*U)/(rho+eta),
// non-participant NP(z) = z/rho.
double unemployed_value(const Equilibrium& eq, WorkerGroup worker);
double employed_value(double w, const Equilibrium& eq, WorkerGroup worker);
double nonparticipant_value(double z, const ModelParams& params);

// (1-p)*S(v) / (p*S(v+d) + (1-p)*S(v)) with S the offer survival at the
// minority reservation value. Throws std::domain_error when both survival
// terms vanish (no-employment equilibrium).
double segregation_share(double reservation_minority, const ModelParams& params, const Dist& offer);

// Expected bargained wage over accepted meetings, mixing firm types by the
// probability each type produces an acceptable match. Throws std::domain_error
// when no match is acceptable.
double mean_accepted_wage(WorkerGroup worker, const Equilibrium& eq);

// Documented default outside-option law: uniform on [0, 3 * v_majority] with
// v_majority solved at the baseline parameters (it does not depend on Q).
Dist default_outside_dist(const ModelParams& params, const Dist& offer, const SolveOptions& opts = {});

enum class SweepParameter { Disutility, ArrivalMinority };

struct SweepPoint {
    double value = 0.0;
    bool converged = false;
    bool degenerate = false;  // no acceptable minority match: wage/segregation undefined
    Equilibrium eq;
    double mean_wage_minority = 0.0;
};

struct MonotonicityVerdict {
    std::string quantity;   // mean_wage / unemployment / participation / segregation
    std::string expected;   // nondecreasing / nonincreasing / none
    std::string observed;   // nondecreasing / nonincreasing / constant / nonmonotone
    bool matches_expected = false;  // vacuously true when expected == none
    double worst_violation = 0.0;   // largest step against the expected direction
};

struct SweepResult {
    SweepParameter parameter = SweepParameter::Disutility;
    std::vector<SweepPoint> points;      // grid order (ascending)
    std::vector<MonotonicityVerdict> verdicts;
    bool all_converged = false;
    double tie_band = 0.0;  // direction violations below this are ties
};

// Solves the equilibrium along an ascending grid over d or lambda_minority and
// reports minority-outcome monotonicity against the predicted directions:
// in d: mean wage and participation nonincreasing, unemployment and segregation
// nondecreasing; in lambda: mean wage and participation nondecreasing,
// unemployment nonincreasing (segregation direction reported, not asserted).
// The grid is sorted ascending first; verdicts use only solved points.
SweepResult comparative_statics_sweep(const ModelParams& base, const Dist& offer, const Dist& outside,
                                      SweepParameter parameter, std::vector<double> grid,
                                      const SolveOptions& opts = {}, int jobs = 1);

}  // namespace searchdid
