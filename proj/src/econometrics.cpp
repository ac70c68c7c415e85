#include "searchdid/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "searchdid/mathutil.hpp"
#include "searchdid/parallel.hpp"

namespace searchdid {

namespace {

constexpr double kCollinearTol = 1e-10;

[[noreturn]] void data_fail(const std::string& msg) { throw DataError(msg); }

const std::vector<double>& need_numeric(const DataTable& t, const std::string& col,
                                        const char* role) {
    if (col.empty()) data_fail(std::string("regression spec is missing the ") + role + " column");
    if (!t.has_numeric(col)) {
        if (t.has_text(col))
            data_fail("column '" + col + "' (" + role + ") is text but must be numeric");
        data_fail("column '" + col + "' (" + role + ") not found in the panel");
    }
    const std::vector<double>& v = t.numeric(col);
    for (double x : v)
        if (std::isnan(x)) data_fail("column '" + col + "' (" + role + ") contains missing values");
    return v;
}

// Distinct levels of a numeric or text column, sorted, as dense 0-based ids.
struct LevelColumn {
    std::vector<int> ids;
    std::vector<std::string> labels;
    int n_levels = 0;
};

LevelColumn levels_from(const DataTable& t, const std::string& col, const char* role) {
    if (col.empty()) data_fail(std::string("regression spec is missing the ") + role + " column");
    LevelColumn out;
    out.ids.reserve(t.n_rows);
    if (t.has_numeric(col)) {
        const std::vector<double>& v = t.numeric(col);
        std::map<double, int> seen;
        for (double x : v) {
            if (std::isnan(x)) data_fail("column '" + col + "' (" + role + ") contains missing values");
            seen.emplace(x, 0);
        }
        int next = 0;
        for (auto& kv : seen) kv.second = next++;
        out.n_levels = next;
        out.labels.resize(static_cast<std::size_t>(next));
        for (const auto& kv : seen) out.labels[static_cast<std::size_t>(kv.second)] = format_double(kv.first);
        for (double x : v) out.ids.push_back(seen.at(x));
    } else if (t.has_text(col)) {
        const std::vector<std::string>& v = t.text(col);
        std::map<std::string, int> seen;
        for (const std::string& x : v) seen.emplace(x, 0);
        int next = 0;
        for (auto& kv : seen) kv.second = next++;
        out.n_levels = next;
        out.labels.resize(static_cast<std::size_t>(next));
        for (const auto& kv : seen) out.labels[static_cast<std::size_t>(kv.second)] = kv.first;
        for (const std::string& x : v) out.ids.push_back(seen.at(x));
    } else {
        data_fail("column '" + col + "' (" + role + ") not found in the panel");
    }
    return out;
}

int reference_index(const LevelColumn& lv, const std::string& wanted, const char* role) {
    if (wanted.empty()) return 0;
    const auto it = std::find(lv.labels.begin(), lv.labels.end(), wanted);
    if (it == lv.labels.end())
        data_fail("reference level '" + wanted + "' not found among " + role + " levels");
    return static_cast<int>(it - lv.labels.begin());
}

void check_binary(const std::vector<double>& v, const std::string& col) {
    for (double x : v)
        if (x != 0.0 && x != 1.0)
            data_fail("column '" + col + "' must be 0/1 (found " + format_double(x) + ")");
}

std::vector<int> dense_cluster_ids(const DataTable& t, const std::string& col, int& n_clusters) {
    const LevelColumn lv = levels_from(t, col, "cluster");
    n_clusters = lv.n_levels;
    if (n_clusters < 2) data_fail("need at least 2 clusters; column '" + col + "' has fewer");
    return lv.ids;
}

// Event time t - g per row; g is the unit's first treated year. Rows of
// never-treated units get no event time (flag vector).
struct EventTime {
    std::vector<double> value;
    std::vector<char> defined;
};

EventTime event_time(const DataTable& t, const RegressionSpec& spec, const LevelColumn& unit) {
    const std::vector<double>& treat = need_numeric(t, spec.treatment, "treatment");
    const std::vector<double>& year = need_numeric(t, spec.time_fe, "time");
    check_binary(treat, spec.treatment);

    constexpr double kNone = std::numeric_limits<double>::infinity();
    std::vector<double> adoption(static_cast<std::size_t>(unit.n_levels), kNone);
    for (std::size_t r = 0; r < t.n_rows; ++r)
        if (treat[r] == 1.0) {
            double& g = adoption[static_cast<std::size_t>(unit.ids[r])];
            g = std::min(g, year[r]);
        }
    // absorbing check: treated exactly from the adoption year onward
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        const double g = adoption[static_cast<std::size_t>(unit.ids[r])];
        const bool should = g != kNone && year[r] >= g;
        if ((treat[r] == 1.0) != should)
            data_fail("treatment column '" + spec.treatment +
                      "' is not absorbing within unit " + unit.labels[static_cast<std::size_t>(unit.ids[r])]);
    }

    EventTime et;
    et.value.resize(t.n_rows, 0.0);
    et.defined.resize(t.n_rows, 0);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        const double g = adoption[static_cast<std::size_t>(unit.ids[r])];
        if (g == kNone) continue;
        et.value[r] = year[r] - g;
        et.defined[r] = 1;
    }
    return et;
}

enum class Mode { Did, EventStudy, TripleDiff };

// The non-absorbed block whose coefficients the estimators report.
struct InterestBlock {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
};

InterestBlock build_interest(const DataTable& t, const RegressionSpec& spec, Mode mode,
                             const LevelColumn* unit) {
    InterestBlock blk;
    const std::vector<double>& treat = need_numeric(t, spec.treatment, "treatment");
    check_binary(treat, spec.treatment);

    if (mode == Mode::Did) {
        blk.names.push_back(spec.treatment);
        blk.cols.push_back(treat);
        return blk;
    }
    if (mode == Mode::EventStudy) {
        const std::vector<double>& year = need_numeric(t, spec.time_fe, "time");
        const double span = *std::max_element(year.begin(), year.end()) -
                            *std::min_element(year.begin(), year.end());
        if (spec.leads > span || spec.lags - 1 > span)
            data_fail("lead/lag window exceeds the observed years (span " +
                      format_double(span) + ")");
        const EventTime et = event_time(t, spec, *unit);
        const auto add = [&](const std::string& name, auto&& fire) {
            std::vector<double> col(t.n_rows, 0.0);
            for (std::size_t r = 0; r < t.n_rows; ++r)
                if (et.defined[r] && fire(et.value[r])) col[r] = 1.0;
            blk.names.push_back(name);
            blk.cols.push_back(std::move(col));
        };
        // leads + lags columns in all: exact dummies at event times -L..-1 and
        // 0..K-2, and one absorbing dummy at >= K-1 so that long-run treated
        // periods never fall back into the reference category.
        for (int j = spec.leads; j >= 1; --j)
            add("lead_" + std::to_string(j), [j](double e) { return e == -j; });
        for (int k = 0; k + 2 <= spec.lags; ++k)
            add(k == 0 ? std::string("effect_0") : "lag_" + std::to_string(k),
                [k](double e) { return e == k; });
        const int bin = spec.lags - 1;
        add(bin == 0 ? std::string("effect_0plus") : "lag_" + std::to_string(bin) + "plus",
            [bin](double e) { return e >= bin; });
        return blk;
    }
    // TripleDiff: policy x group first so collinearity handling favors it.
    const std::vector<std::string>& grp = t.text(spec.group_column);
    std::vector<double> g(t.n_rows, 0.0);
    for (std::size_t r = 0; r < t.n_rows; ++r)
        if (grp[r] == spec.group_treated_level) g[r] = 1.0;
    std::vector<double> inter(t.n_rows, 0.0);
    for (std::size_t r = 0; r < t.n_rows; ++r) inter[r] = treat[r] * g[r];
    blk.names.push_back(spec.treatment + "_x_" + spec.group_treated_level);
    blk.cols.push_back(std::move(inter));
    blk.names.push_back(spec.treatment);
    blk.cols.push_back(treat);
    return blk;
}

Mode mode_of(const RegressionSpec& spec) {
    const bool event = spec.leads > 0 || spec.lags > 0;
    const bool ddd = !spec.group_column.empty();
    if (event && ddd)
        throw std::invalid_argument("event-study window and group interaction cannot be combined");
    if (event) return Mode::EventStudy;
    if (ddd) return Mode::TripleDiff;
    return Mode::Did;
}

void validate_common(const DataTable& t, const RegressionSpec& spec) {
    if (t.n_rows == 0) data_fail("panel has no rows");
    if (spec.outcome.empty()) data_fail("regression spec is missing the outcome column");
    need_numeric(t, spec.outcome, "outcome");
    if (spec.cluster.empty()) data_fail("regression spec is missing the cluster column");
    if (spec.trend_order < 0 || spec.trend_order > 2)
        throw std::invalid_argument("trend_order must be 0, 1, or 2");
    if (spec.leads < 0 || spec.lags < 0)
        throw std::invalid_argument("leads and lags must be >= 0");
    if (!spec.group_column.empty()) {
        if (!t.has_text(spec.group_column))
            data_fail("group column '" + spec.group_column + "' not found as a text column");
        if (spec.group_treated_level.empty())
            throw std::invalid_argument("group interaction requires group_treated_level");
        const std::vector<std::string>& grp = t.text(spec.group_column);
        if (std::find(grp.begin(), grp.end(), spec.group_treated_level) == grp.end())
            data_fail("group level '" + spec.group_treated_level + "' absent from column '" +
                      spec.group_column + "'");
    }
}

}  // namespace

Design build_design(const DataTable& t, const RegressionSpec& spec) {
    validate_common(t, spec);
    const Mode mode = mode_of(spec);

    const bool has_unit = !spec.unit_fe.empty();
    const bool has_time = !spec.time_fe.empty();
    LevelColumn unit, time;
    if (has_unit) unit = levels_from(t, spec.unit_fe, "unit");
    if (has_time) time = levels_from(t, spec.time_fe, "time");
    if (mode == Mode::EventStudy && (!has_unit || !has_time))
        throw std::invalid_argument("event-study regressions need unit and time fixed effects");

    const InterestBlock interest = build_interest(t, spec, mode, has_unit ? &unit : nullptr);
    const std::size_t n = t.n_rows;

    std::vector<std::string> names;
    std::vector<const std::vector<double>*> borrowed;  // columns owned elsewhere
    std::vector<std::vector<double>> owned;            // columns built here
    owned.reserve(interest.cols.size() + 256);

    const auto push_owned = [&](std::string name, std::vector<double> col) {
        names.push_back(std::move(name));
        owned.push_back(std::move(col));
        borrowed.push_back(nullptr);
    };
    const auto push_borrowed = [&](std::string name, const std::vector<double>& col) {
        names.push_back(std::move(name));
        borrowed.push_back(&col);
    };

    push_owned("intercept", std::vector<double>(n, 1.0));
    for (std::size_t j = 0; j < interest.cols.size(); ++j)
        push_owned(interest.names[j], interest.cols[j]);

    std::vector<double> group_flag;
    if (mode == Mode::TripleDiff) {
        const std::vector<std::string>& grp = t.text(spec.group_column);
        group_flag.assign(n, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            if (grp[r] == spec.group_treated_level) group_flag[r] = 1.0;
        push_owned("group_" + spec.group_treated_level, group_flag);
    }

    for (const std::string& cov : spec.covariates)
        push_borrowed(cov, need_numeric(t, cov, "covariate"));

    const int unit_ref = has_unit ? reference_index(unit, spec.unit_reference, "unit") : 0;
    const int time_ref = has_time ? reference_index(time, spec.time_reference, "time") : 0;

    if (has_unit) {
        for (int lv = 0; lv < unit.n_levels; ++lv) {
            if (lv == unit_ref) continue;
            std::vector<double> col(n, 0.0);
            for (std::size_t r = 0; r < n; ++r)
                if (unit.ids[r] == lv) col[r] = 1.0;
            push_owned(spec.unit_fe + "_" + unit.labels[static_cast<std::size_t>(lv)], std::move(col));
        }
    }
    if (has_time) {
        for (int lv = 0; lv < time.n_levels; ++lv) {
            if (lv == time_ref) continue;
            std::vector<double> col(n, 0.0);
            for (std::size_t r = 0; r < n; ++r)
                if (time.ids[r] == lv) col[r] = 1.0;
            push_owned(spec.time_fe + "_" + time.labels[static_cast<std::size_t>(lv)], std::move(col));
        }
    }

    if (mode == Mode::TripleDiff) {
        if (has_unit) {
            for (int lv = 0; lv < unit.n_levels; ++lv) {
                if (lv == unit_ref) continue;
                std::vector<double> col(n, 0.0);
                for (std::size_t r = 0; r < n; ++r)
                    if (unit.ids[r] == lv && group_flag[r] == 1.0) col[r] = 1.0;
                push_owned(spec.unit_fe + "_" + unit.labels[static_cast<std::size_t>(lv)] + "_x_" +
                               spec.group_treated_level,
                           std::move(col));
            }
        }
        if (has_time) {
            for (int lv = 0; lv < time.n_levels; ++lv) {
                if (lv == time_ref) continue;
                std::vector<double> col(n, 0.0);
                for (std::size_t r = 0; r < n; ++r)
                    if (time.ids[r] == lv && group_flag[r] == 1.0) col[r] = 1.0;
                push_owned(spec.time_fe + "_" + time.labels[static_cast<std::size_t>(lv)] + "_x_" +
                               spec.group_treated_level,
                           std::move(col));
            }
        }
    }

    if (spec.trend_order >= 1) {
        if (!has_unit || !has_time)
            throw std::invalid_argument("unit trends need unit and time fixed effects");
        const std::vector<double>& year = need_numeric(t, spec.time_fe, "time");
        const double t0 = *std::min_element(year.begin(), year.end());
        for (int order = 1; order <= spec.trend_order; ++order) {
            for (int lv = 0; lv < unit.n_levels; ++lv) {
                if (lv == unit_ref) continue;
                std::vector<double> col(n, 0.0);
                for (std::size_t r = 0; r < n; ++r)
                    if (unit.ids[r] == lv) col[r] = std::pow(year[r] - t0, order);
                push_owned("trend" + std::to_string(order) + "_" + spec.unit_fe + "_" +
                               unit.labels[static_cast<std::size_t>(lv)],
                           std::move(col));
            }
        }
    }

    Design dz;
    dz.names = std::move(names);
    dz.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dz.names.size()));
    {
        std::size_t own_idx = 0;
        for (std::size_t c = 0; c < dz.names.size(); ++c) {
            const std::vector<double>& src = borrowed[c] ? *borrowed[c] : owned[own_idx++];
            for (std::size_t r = 0; r < n; ++r)
                dz.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = src[r];
        }
    }
    const std::vector<double>& y = t.numeric(spec.outcome);
    dz.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
    dz.cluster_ids = dense_cluster_ids(t, spec.cluster, dz.n_clusters);
    if (!spec.weight.empty()) {
        const std::vector<double>& w = need_numeric(t, spec.weight, "weight");
        for (double x : w)
            if (!(x >= 0.0)) data_fail("weight column '" + spec.weight + "' must be nonnegative");
        dz.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(n));
    }
    return dz;
}

OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
           const std::vector<std::string>& names, const Eigen::VectorXd* weights) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    if (y.size() != n) throw std::invalid_argument("outcome length does not match design rows");
    if (n == 0) data_fail("design has no rows");

    Eigen::MatrixXd Xw;
    Eigen::VectorXd yw;
    const Eigen::MatrixXd* Xp = &X;
    const Eigen::VectorXd* yp = &y;
    if (weights && weights->size() > 0) {
        if (weights->size() != n) throw std::invalid_argument("weight length does not match rows");
        const Eigen::VectorXd sw = weights->array().sqrt();
        Xw = sw.asDiagonal() * X;
        yw = sw.asDiagonal() * y;
        Xp = &Xw;
        yp = &yw;
    }

    // In-order rank-revealing pass on X'X: keep a column iff its residual sum
    // of squares after projection on the retained set exceeds the relative
    // tolerance; first-listed columns win ties.
    const Eigen::MatrixXd G = Xp->transpose() * (*Xp);
    OlsFit fit;
    Eigen::MatrixXd L(k, k);  // growing lower-triangular Cholesky factor
    for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::Index m = static_cast<Eigen::Index>(fit.retained.size());
        Eigen::VectorXd w(m);
        for (Eigen::Index i = 0; i < m; ++i) w(i) = G(fit.retained[static_cast<std::size_t>(i)], j);
        if (m > 0)
            L.topLeftCorner(m, m).triangularView<Eigen::Lower>().solveInPlace(w);
        const double resid = G(j, j) - w.squaredNorm();
        if (G(j, j) <= 0.0 || resid <= kCollinearTol * G(j, j)) {
            fit.dropped.push_back(j < static_cast<Eigen::Index>(names.size())
                                      ? names[static_cast<std::size_t>(j)]
                                      : "column_" + std::to_string(j));
            continue;
        }
        L.row(m).head(m) = w.transpose();
        L(m, m) = std::sqrt(resid);
        fit.retained.push_back(static_cast<int>(j));
    }
    if (fit.retained.empty()) data_fail("design is entirely collinear (no usable columns)");
    if (n < static_cast<Eigen::Index>(fit.retained.size()))
        data_fail("fewer rows than retained design columns");

    Eigen::MatrixXd Xr(n, static_cast<Eigen::Index>(fit.retained.size()));
    for (std::size_t c = 0; c < fit.retained.size(); ++c)
        Xr.col(static_cast<Eigen::Index>(c)) = Xp->col(fit.retained[c]);

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Xr);
    fit.beta = qr.solve(*yp);
    fit.residuals = *yp - Xr * fit.beta;

    const Eigen::Index kr = Xr.cols();
    const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(kr, kr).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(kr, kr));
    fit.xtx_inv = Rinv * Rinv.transpose();
    return fit;
}

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                             const std::vector<int>& cluster_ids, int n_clusters,
                             ClusterAdjustment adjustment, int k_model) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    if (residuals.size() != n) throw std::invalid_argument("residual length does not match rows");
    if (static_cast<Eigen::Index>(cluster_ids.size()) != n)
        throw std::invalid_argument("cluster id length does not match rows");
    if (n_clusters < 2) data_fail("cluster-robust variance needs at least 2 clusters");

    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_clusters, k);
    for (Eigen::Index i = 0; i < n; ++i)
        scores.row(cluster_ids[static_cast<std::size_t>(i)]) += residuals(i) * X.row(i);
    const Eigen::MatrixXd meat = scores.transpose() * scores;

    const Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::LLT<Eigen::MatrixXd> llt(xtx);
    if (llt.info() != Eigen::Success)
        data_fail("X'X is singular; collinear columns must be dropped before cluster_vcov");
    Eigen::MatrixXd v = llt.solve(llt.solve(meat).transpose());

    if (adjustment == ClusterAdjustment::CR1) {
        const double C = n_clusters;
        const double N = static_cast<double>(n);
        const double K = k_model >= 0 ? static_cast<double>(k_model) : static_cast<double>(k);
        if (N - K <= 0.0) data_fail("CR1 adjustment undefined: no residual degrees of freedom");
        v *= (C / (C - 1.0)) * ((N - 1.0) / (N - K));
    }
    return 0.5 * (v + v.transpose());  // exact symmetry
}

namespace {

// ------------------------- shared result assembly -------------------------

double normal_critical(double level) { return norm_quantile(1.0 - level / 2.0); }

void fill_inference(RegressionResult& res, const Eigen::VectorXd& beta, const Eigen::MatrixXd& vcov,
                    const std::vector<std::string>& names) {
    res.vcov = vcov;
    res.coefficients.clear();
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        Coefficient c;
        c.name = names[static_cast<std::size_t>(j)];
        c.estimate = beta(j);
        c.se = std::sqrt(std::max(0.0, vcov(j, j)));
        c.t = c.se > 0.0 ? c.estimate / c.se : std::nan("");
        res.coefficients.push_back(std::move(c));
    }
}

void fill_fit_stats(RegressionResult& res, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& residuals, int k_model) {
    const double ssr = residuals.squaredNorm();
    const double ybar = y.mean();
    const double sst = (y.array() - ybar).square().sum();
    res.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    const double dof = static_cast<double>(X.rows()) - static_cast<double>(k_model);
    res.root_mse = dof > 0.0 ? std::sqrt(ssr / dof) : 0.0;
    double worst = 0.0;
    const double rnorm = residuals.norm();
    if (rnorm > 0.0) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const double cnorm = X.col(j).norm();
            if (cnorm == 0.0) continue;
            worst = std::max(worst, std::abs(X.col(j).dot(residuals)) / (cnorm * rnorm));
        }
    }
    res.max_orthogonality = worst;
}

RegressionResult run_explicit(const DataTable& t, const RegressionSpec& spec) {
    Design dz = build_design(t, spec);
    const Eigen::VectorXd* w = dz.weights.size() > 0 ? &dz.weights : nullptr;
    OlsFit fit = ols(dz.X, dz.y, dz.names, w);

    Eigen::MatrixXd Xr(dz.X.rows(), static_cast<Eigen::Index>(fit.retained.size()));
    std::vector<std::string> kept_names;
    kept_names.reserve(fit.retained.size());
    for (std::size_t c = 0; c < fit.retained.size(); ++c) {
        Xr.col(static_cast<Eigen::Index>(c)) = dz.X.col(fit.retained[c]);
        kept_names.push_back(dz.names[static_cast<std::size_t>(fit.retained[c])]);
    }
    Eigen::VectorXd yr = dz.y;
    if (w) {
        const Eigen::VectorXd sw = w->array().sqrt();
        Xr = sw.asDiagonal() * Xr;
        yr = sw.asDiagonal() * yr;
    }

    RegressionResult res;
    res.engine_used = "explicit";
    res.n_obs = static_cast<long>(dz.X.rows());
    res.n_clusters = dz.n_clusters;
    res.n_params = static_cast<int>(fit.retained.size());
    res.dropped_columns = fit.dropped;
    const Eigen::MatrixXd vcov = cluster_vcov(Xr, fit.residuals, dz.cluster_ids, dz.n_clusters,
                                              spec.adjustment, res.n_params);
    fill_inference(res, fit.beta, vcov, kept_names);
    fill_fit_stats(res, Xr, yr, fit.residuals, res.n_params);
    return res;
}

// ------------------------- within (absorbed FE) engine -------------------------

struct WithinPrep {
    bool eligible = false;
    std::string why_not;
    std::vector<int> unit_ids, time_ids, group_ids;
    int n_units = 0, n_times = 0, n_groups = 1;
    std::vector<int> cluster_ids;
    int n_clusters = 0;
};

WithinPrep within_prepare(const DataTable& t, const RegressionSpec& spec, Mode mode) {
    WithinPrep prep;
    if (spec.unit_fe.empty() || spec.time_fe.empty()) {
        prep.why_not = "within engine needs unit and time fixed effects";
        return prep;
    }
    if (spec.trend_order > 0 || !spec.covariates.empty() || !spec.weight.empty()) {
        prep.why_not = "within engine covers FE-only specs (no trends, covariates, or weights)";
        return prep;
    }
    const LevelColumn unit = levels_from(t, spec.unit_fe, "unit");
    const LevelColumn time = levels_from(t, spec.time_fe, "time");
    prep.unit_ids = unit.ids;
    prep.time_ids = time.ids;
    prep.n_units = unit.n_levels;
    prep.n_times = time.n_levels;
    if (mode == Mode::TripleDiff) {
        const LevelColumn grp = levels_from(t, spec.group_column, "group");
        prep.group_ids = grp.ids;
        prep.n_groups = grp.n_levels;
    } else {
        prep.group_ids.assign(t.n_rows, 0);
        prep.n_groups = 1;
    }

    // Balance: within each group, every unit x time cell present with one count.
    std::vector<long> counts(static_cast<std::size_t>(prep.n_units) * prep.n_times * prep.n_groups, 0);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        const std::size_t idx =
            (static_cast<std::size_t>(prep.group_ids[r]) * prep.n_units + prep.unit_ids[r]) *
                prep.n_times +
            prep.time_ids[r];
        ++counts[idx];
    }
    for (int g = 0; g < prep.n_groups; ++g) {
        const std::size_t base = static_cast<std::size_t>(g) * prep.n_units * prep.n_times;
        const long first = counts[base];
        if (first == 0) {
            prep.why_not = "panel is unbalanced (empty unit-time cell)";
            return prep;
        }
        for (std::size_t i = 0; i < static_cast<std::size_t>(prep.n_units) * prep.n_times; ++i) {
            if (counts[base + i] != first) {
                prep.why_not = "panel is unbalanced (unequal unit-time cell sizes)";
                return prep;
            }
        }
    }
    prep.cluster_ids = dense_cluster_ids(t, spec.cluster, prep.n_clusters);
    prep.eligible = true;
    return prep;
}

// Two-way demeaning per group: x - mean(unit,group) - mean(time,group) + mean(group).
void demean_inplace(Eigen::VectorXd& col, const WithinPrep& prep) {
    const std::size_t n = static_cast<std::size_t>(col.size());
    std::vector<double> sum_u(static_cast<std::size_t>(prep.n_groups) * prep.n_units, 0.0);
    std::vector<double> sum_t(static_cast<std::size_t>(prep.n_groups) * prep.n_times, 0.0);
    std::vector<double> sum_g(static_cast<std::size_t>(prep.n_groups), 0.0);
    std::vector<long> cnt_u(sum_u.size(), 0), cnt_t(sum_t.size(), 0), cnt_g(sum_g.size(), 0);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t gu = static_cast<std::size_t>(prep.group_ids[r]) * prep.n_units + prep.unit_ids[r];
        const std::size_t gt = static_cast<std::size_t>(prep.group_ids[r]) * prep.n_times + prep.time_ids[r];
        sum_u[gu] += col(static_cast<Eigen::Index>(r));
        sum_t[gt] += col(static_cast<Eigen::Index>(r));
        sum_g[static_cast<std::size_t>(prep.group_ids[r])] += col(static_cast<Eigen::Index>(r));
        ++cnt_u[gu];
        ++cnt_t[gt];
        ++cnt_g[static_cast<std::size_t>(prep.group_ids[r])];
    }
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t g = static_cast<std::size_t>(prep.group_ids[r]);
        const std::size_t gu = g * prep.n_units + prep.unit_ids[r];
        const std::size_t gt = g * prep.n_times + prep.time_ids[r];
        col(static_cast<Eigen::Index>(r)) += sum_g[g] / cnt_g[g] - sum_u[gu] / cnt_u[gu] -
                                             sum_t[gt] / cnt_t[gt];
    }
}

RegressionResult run_within(const DataTable& t, const RegressionSpec& spec, Mode mode,
                            const WithinPrep& prep) {
    const LevelColumn unit_lv = levels_from(t, spec.unit_fe, "unit");
    const InterestBlock interest = build_interest(t, spec, mode, &unit_lv);
    const std::size_t n = t.n_rows;

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(interest.cols.size()));
    for (std::size_t c = 0; c < interest.cols.size(); ++c) {
        Eigen::VectorXd col =
            Eigen::Map<const Eigen::VectorXd>(interest.cols[c].data(), static_cast<Eigen::Index>(n));
        demean_inplace(col, prep);
        X.col(static_cast<Eigen::Index>(c)) = col;
    }
    const std::vector<double>& yraw = t.numeric(spec.outcome);
    Eigen::VectorXd y_orig = Eigen::Map<const Eigen::VectorXd>(yraw.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd y = y_orig;
    demean_inplace(y, prep);

    OlsFit fit = ols(X, y, interest.names, nullptr);
    Eigen::MatrixXd Xr(X.rows(), static_cast<Eigen::Index>(fit.retained.size()));
    std::vector<std::string> kept_names;
    for (std::size_t c = 0; c < fit.retained.size(); ++c) {
        Xr.col(static_cast<Eigen::Index>(c)) = X.col(fit.retained[c]);
        kept_names.push_back(interest.names[static_cast<std::size_t>(fit.retained[c])]);
    }

    RegressionResult res;
    res.engine_used = "within";
    res.n_obs = static_cast<long>(n);
    res.n_clusters = prep.n_clusters;
    res.absorbed_unit = prep.n_groups * (prep.n_units - 1);
    res.absorbed_time = prep.n_groups * (prep.n_times - 1);
    res.n_params = static_cast<int>(fit.retained.size()) + res.absorbed_unit + res.absorbed_time +
                   prep.n_groups;  // + intercept and group means
    res.dropped_columns = fit.dropped;
    const Eigen::MatrixXd vcov = cluster_vcov(Xr, fit.residuals, prep.cluster_ids, prep.n_clusters,
                                              spec.adjustment, res.n_params);
    fill_inference(res, fit.beta, vcov, kept_names);

    // R^2 and RMSE for the full model: residuals are identical, the total sum
    // of squares uses the raw outcome.
    const double ssr = fit.residuals.squaredNorm();
    const double sst = (y_orig.array() - y_orig.mean()).square().sum();
    res.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    const double dof = static_cast<double>(n) - static_cast<double>(res.n_params);
    res.root_mse = dof > 0.0 ? std::sqrt(ssr / dof) : 0.0;
    double worst = 0.0;
    const double rnorm = fit.residuals.norm();
    if (rnorm > 0.0) {
        for (Eigen::Index j = 0; j < Xr.cols(); ++j) {
            const double cnorm = Xr.col(j).norm();
            if (cnorm == 0.0) continue;
            worst = std::max(worst, std::abs(Xr.col(j).dot(fit.residuals)) / (cnorm * rnorm));
        }
    }
    res.max_orthogonality = worst;
    return res;
}

RegressionResult run_auto(const DataTable& t, const RegressionSpec& spec, Mode mode) {
    validate_common(t, spec);
    if (spec.engine == FeEngine::Explicit) return run_explicit(t, spec);
    const WithinPrep prep = within_prepare(t, spec, mode);
    if (prep.eligible) return run_within(t, spec, mode, prep);
    if (spec.engine == FeEngine::Within)
        data_fail("within engine requested but not applicable: " + prep.why_not);
    return run_explicit(t, spec);
}

}  // namespace

const Coefficient& RegressionResult::coefficient(const std::string& name) const {
    for (const Coefficient& c : coefficients)
        if (c.name == name) return c;
    throw std::out_of_range("no coefficient named '" + name + "' in the fitted result");
}

RegressionResult estimate_did(const DataTable& panel, const RegressionSpec& spec) {
    if (spec.leads > 0 || spec.lags > 0)
        throw std::invalid_argument("estimate_did takes no event-study window; use estimate_event_study");
    if (!spec.group_column.empty())
        throw std::invalid_argument("estimate_did takes no group interaction; use estimate_ddd");
    if (spec.unit_fe.empty() || spec.time_fe.empty())
        throw std::invalid_argument("estimate_did requires unit and time fixed effects");
    return run_auto(panel, spec, Mode::Did);
}

RegressionResult estimate_event_study(const DataTable& panel, const RegressionSpec& spec) {
    if (spec.lags < 1)
        throw std::invalid_argument(
            "estimate_event_study needs lags >= 1 so post-adoption periods stay out of the "
            "reference category");
    if (!spec.group_column.empty())
        throw std::invalid_argument("event-study window and group interaction cannot be combined");
    return run_auto(panel, spec, Mode::EventStudy);
}

RegressionResult estimate_ddd(const DataTable& panel, const RegressionSpec& spec) {
    if (spec.group_column.empty() || spec.group_treated_level.empty())
        throw std::invalid_argument("estimate_ddd requires group_column and group_treated_level");
    if (spec.leads > 0 || spec.lags > 0)
        throw std::invalid_argument("event-study window and group interaction cannot be combined");
    validate_common(panel, spec);
    const LevelColumn grp = levels_from(panel, spec.group_column, "group");
    if (grp.n_levels != 2)
        data_fail("triple difference needs exactly 2 group levels; column '" + spec.group_column +
                  "' has " + std::to_string(grp.n_levels));
    // both groups must appear under policy-on and policy-off observations
    const std::vector<double>& treat = need_numeric(panel, spec.treatment, "treatment");
    bool seen[2][2] = {{false, false}, {false, false}};
    for (std::size_t r = 0; r < panel.n_rows; ++r)
        seen[grp.ids[r]][treat[r] == 1.0 ? 1 : 0] = true;
    if (!(seen[0][0] && seen[0][1] && seen[1][0] && seen[1][1]))
        data_fail("triple difference needs both groups observed with and without the policy");
    return run_auto(panel, spec, Mode::TripleDiff);
}

PlaceboReport placebo_suite(const PanelScenario& scenario, const RegressionSpec& spec, int n_reps,
                            double level, int jobs) {
    if (n_reps < 100) throw std::invalid_argument("placebo_suite needs n_reps >= 100");
    if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("level must lie in [0,1]");
    const ModelParams& a = scenario.pre_params;
    const ModelParams& b = scenario.post_params;
    if (a.d != b.d || a.lambda_minority != b.lambda_minority)
        throw std::invalid_argument("placebo_suite requires a zero-effect scenario (pre == post)");
    scenario.validate();

    const double critical = normal_critical(level);
    std::vector<double> estimates(static_cast<std::size_t>(n_reps));
    std::vector<double> ses(static_cast<std::size_t>(n_reps));
    parallel_for(static_cast<std::size_t>(n_reps), jobs, [&](std::size_t r) {
        PanelScenario rep = scenario;
        rep.seed = scenario.seed + r;
        const DataTable panel = generate_panel(rep);
        const RegressionResult res = estimate_did(panel, spec);
        const Coefficient& c = res.coefficient(spec.treatment);
        estimates[r] = c.estimate;
        ses[r] = c.se;
    });

    PlaceboReport rep;
    rep.n_reps = n_reps;
    rep.level = level;
    double sum = 0.0, sumsq = 0.0, se_sum = 0.0;
    for (int r = 0; r < n_reps; ++r) {
        const std::size_t i = static_cast<std::size_t>(r);
        if (ses[i] > 0.0 && std::abs(estimates[i] / ses[i]) > critical) ++rep.rejections;
        sum += estimates[i];
        sumsq += estimates[i] * estimates[i];
        se_sum += ses[i];
    }
    rep.rejection_rate = static_cast<double>(rep.rejections) / n_reps;
    const double half = 1.959963984540054 *
                        std::sqrt(std::max(0.0, rep.rejection_rate * (1.0 - rep.rejection_rate) /
                                                     n_reps));
    rep.rate_ci_lo = std::max(0.0, rep.rejection_rate - half);
    rep.rate_ci_hi = std::min(1.0, rep.rejection_rate + half);
    rep.mean_estimate = sum / n_reps;
    rep.sd_estimate = n_reps > 1 ? std::sqrt(std::max(0.0, (sumsq - n_reps * rep.mean_estimate *
                                                                        rep.mean_estimate) /
                                                               (n_reps - 1)))
                                 : 0.0;
    rep.mean_se = se_sum / n_reps;
    return rep;
}

}  // namespace searchdid
