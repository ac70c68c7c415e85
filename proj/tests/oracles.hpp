#pragma once

// Independent cross-checking implementations used only by the tests: a
// composite-Simpson integrator (with a compactified transform for infinite
// upper limits), a plain bisection root finder, dense normal-equations least
// squares, and a brute-force clustered sandwich assembled cluster by cluster.
// None of these share code with the library.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Composite Simpson on [a, b] with n panels (forced even).
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 4096) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// integral over [a, inf) via x = a + t/(1-t), dx = dt/(1-t)^2.
inline double simpson_to_inf(const std::function<double(double)>& f, double a, int n = 8192) {
    const auto g = [&](double t) {
        if (t >= 1.0) return 0.0;
        const double z = 1.0 - t;
        const double val = f(a + t / z) / (z * z);
        return std::isfinite(val) ? val : 0.0;
    };
    return simpson(g, 0.0, 1.0, n);
}

// Bisection for a decreasing g with g(lo) >= 0 >= g(hi).
inline double bisect(const std::function<double(double)>& g, double lo, double hi,
                     int iterations = 200) {
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) >= 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * std::max(1.0, std::abs(lo))) break;
    }
    return 0.5 * (lo + hi);
}

inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return (X.transpose() * X).fullPivLu().solve(X.transpose() * y);
}

inline Eigen::MatrixXd sandwich(const Eigen::MatrixXd& X, const Eigen::VectorXd& e,
                                const std::vector<int>& cluster_ids, int n_clusters, bool cr1,
                                int k_model) {
    const Eigen::MatrixXd bread = (X.transpose() * X).fullPivLu().inverse();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (int c = 0; c < n_clusters; ++c) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(X.cols());
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            if (cluster_ids[static_cast<std::size_t>(i)] == c) s += e(i) * X.row(i).transpose();
        meat += s * s.transpose();
    }
    Eigen::MatrixXd v = bread * meat * bread;
    if (cr1) {
        const double C = n_clusters;
        const double N = static_cast<double>(X.rows());
        const double K = k_model;
        v *= (C / (C - 1.0)) * ((N - 1.0) / (N - K));
    }
    return v;
}

}  // namespace oracle
