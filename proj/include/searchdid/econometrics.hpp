#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "searchdid/simulate.hpp"
#include "searchdid/table.hpp"

namespace searchdid {

enum class FeEngine { Auto, Explicit, Within };
enum class ClusterAdjustment { CR0, CR1 };

// A fixed-effects policy regression on a long-format panel.
struct RegressionSpec {
    std::string outcome;
    std::string treatment;            // absorbing 0/1 policy column
    std::string unit_fe;              // column defining unit effects ("" = none)
    std::string time_fe;              // column defining time effects ("" = none)
    int trend_order = 0;              // 0, 1, or 2: per-unit polynomial time trends
    int leads = 0;                    // event-study window: leads ...
    int lags = 0;                     // ... and lags; the deepest lag is binned (>= lags)
    std::string group_column;         // text column enabling the triple difference ("" = off)
    std::string group_treated_level;  // level of group_column exposed to the policy
    std::vector<std::string> covariates;
    std::string cluster;              // cluster column (required)
    std::string weight;               // optional per-row weight column ("" = unweighted)
    std::string unit_reference;       // FE level dropped as reference ("" = first level)
    std::string time_reference;
    FeEngine engine = FeEngine::Auto;
    ClusterAdjustment adjustment = ClusterAdjustment::CR1;
};

struct Coefficient {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double t = 0.0;
};

struct RegressionResult {
    // Retained columns in design order. Under the within engine only the
    // non-absorbed block is reported; absorbed dummy counts are recorded.
    std::vector<Coefficient> coefficients;
    Eigen::MatrixXd vcov;  // cluster-robust, aligned with `coefficients`
    long n_obs = 0;
    int n_clusters = 0;
    int n_params = 0;  // model rank including absorbed dummies
    int absorbed_unit = 0;
    int absorbed_time = 0;
    std::vector<std::string> dropped_columns;  // collinear columns, by name
    double r2 = 0.0;
    double root_mse = 0.0;
    double max_orthogonality = 0.0;  // max_j |x_j'e| / (|x_j||e|), should be ~0
    std::string engine_used;         // "explicit" or "within"

    const Coefficient& coefficient(const std::string& name) const;  // throws std::out_of_range
};

// Explicit design matrix: intercept, policy/event/interaction block,
// covariates, unit dummies, time dummies, group interactions, unit trends.
struct Design {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> names;  // one per X column
    std::vector<int> cluster_ids;    // dense 0-based
    int n_clusters = 0;
    Eigen::VectorXd weights;         // size 0 when unweighted
};

Design build_design(const DataTable& panel, const RegressionSpec& spec);

struct OlsFit {
    Eigen::VectorXd beta;              // coefficients on retained columns
    Eigen::VectorXd residuals;
    std::vector<int> retained;         // design-column indices kept
    std::vector<std::string> dropped;  // names of collinear columns dropped
    Eigen::MatrixXd xtx_inv;           // (X'X)^{-1} on retained columns
};

// Least squares via Householder QR after an in-order rank-revealing pass on
// X'X (relative diagonal tolerance 1e-10, first-listed column kept). With
// weights, rows are scaled by sqrt(w) and residuals are on that scale.
OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
           const std::vector<std::string>& names = {}, const Eigen::VectorXd* weights = nullptr);

// Sandwich (X'X)^{-1} (sum_c X_c' e_c e_c' X_c) (X'X)^{-1}; CR1 scales by
// [C/(C-1)] * [(N-1)/(N-K)] with K = k_model (pass the full model rank when
// dummies were absorbed; defaults to X.cols()).
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                             const std::vector<int>& cluster_ids, int n_clusters,
                             ClusterAdjustment adjustment, int k_model = -1);

// Two-way FE policy regression; the reported coefficient of interest carries
// the treatment column's name.
RegressionResult estimate_did(const DataTable& panel, const RegressionSpec& spec);

// Event-study variant, leads + lags indicator columns in all: exact dummies at
// event times -leads..-1 ("lead_j") and 0..lags-2 ("effect_0", "lag_k"), plus
// one absorbing dummy at >= lags-1 ("lag_<lags-1>plus", or "effect_0plus" when
// lags == 1). Reference category: deep-pre observations (more than `leads`
// years before adoption) and never-treated observations.
RegressionResult estimate_event_study(const DataTable& panel, const RegressionSpec& spec);

// Triple difference: adds group main effect, group x unit and group x time
// dummies, the policy main effect, and policy x group — the reported
// coefficient, named "<treatment>_x_<group_treated_level>".
RegressionResult estimate_ddd(const DataTable& panel, const RegressionSpec& spec);

struct PlaceboReport {
    int n_reps = 0;
    double level = 0.0;
    int rejections = 0;
    double rejection_rate = 0.0;
    double rate_ci_lo = 0.0;  // 95% Monte Carlo interval for the rate
    double rate_ci_hi = 0.0;
    double mean_estimate = 0.0;
    double sd_estimate = 0.0;
    double mean_se = 0.0;
};

// Repeatedly generates zero-effect panels (pre params must equal post params),
// fits the DiD spec, and reports how often |t| on the policy coefficient
// exceeds the normal critical value at `level`.
PlaceboReport placebo_suite(const PanelScenario& scenario, const RegressionSpec& spec, int n_reps,
                            double level, int jobs = 1);

}  // namespace searchdid
