#include "searchdid/mathutil.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace searchdid {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("norm_quantile: p outside [0,1]");
    }

    // Acklam's rational approximation, |relative error| < 1.15e-9.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;

    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // One Halley step against the exact cdf.
    double e = norm_cdf(x) - p;
    double u = e / norm_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

namespace {

struct SimpsonState {
    const std::function<double(double)>& f;
    double abs_tol;
    int max_depth;
    double err_accum = 0.0;
    bool ok = true;

    double recurse(double a, double m, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
        double lm = 0.5 * (a + m);
        double rm = 0.5 * (m + b);
        double flm = f(lm);
        double frm = f(rm);
        double h = b - a;
        double left = (h / 12.0) * (fa + 4.0 * flm + fm);
        double right = (h / 12.0) * (fm + 4.0 * frm + fb);
        double delta = left + right - whole;
        if (depth >= max_depth) {
            ok = false;
            err_accum += std::abs(delta);
            return left + right + delta / 15.0;
        }
        if (std::abs(delta) <= 15.0 * tol) {
            err_accum += std::abs(delta) / 15.0;
            return left + right + delta / 15.0;
        }
        return recurse(a, lm, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
               recurse(m, rm, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
    }
};

}  // namespace

QuadratureResult adaptive_simpson(const std::function<double(double)>& f,
                                  double a, double b, double abs_tol,
                                  int max_depth) {
    QuadratureResult out;
    if (a == b) {
        out.converged = true;
        return out;
    }
    double fa = f(a);
    double fb = f(b);
    double m = 0.5 * (a + b);
    double fm = f(m);
    double whole = ((b - a) / 6.0) * (fa + 4.0 * fm + fb);
    SimpsonState st{f, abs_tol, max_depth};
    out.value = st.recurse(a, m, b, fa, fm, fb, whole, abs_tol, 0);
    out.error_estimate = st.err_accum;
    out.converged = st.ok && st.err_accum <= abs_tol;
    return out;
}

}  // namespace searchdid
