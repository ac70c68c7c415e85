#pragma once

#include <functional>

namespace searchdid {

// Standard normal density, cdf and quantile. The quantile uses Acklam's
// rational approximation polished with one Halley step, giving close to
// full double precision over (0,1).
double norm_pdf(double x);
double norm_cdf(double x);
double norm_quantile(double p);

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    bool converged = false;
};

// Adaptive Simpson integration of f over [a, b] to an absolute tolerance.
// The error estimate is the accumulated Richardson residual.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f,
                                  double a, double b, double abs_tol,
                                  int max_depth = 48);

}  // namespace searchdid
