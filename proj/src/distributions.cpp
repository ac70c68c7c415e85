#include "searchdid/distributions.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "searchdid/mathutil.hpp"

namespace searchdid {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

Dist Dist::exponential(double rate) {
    Dist d;
    d.kind = DistKind::Exponential;
    d.a = rate;
    d.validate();
    return d;
}

Dist Dist::uniform(double lo, double hi) {
    Dist d;
    d.kind = DistKind::Uniform;
    d.a = lo;
    d.b = hi;
    d.validate();
    return d;
}

Dist Dist::lognormal(double log_mean, double log_sd) {
    Dist d;
    d.kind = DistKind::Lognormal;
    d.a = log_mean;
    d.b = log_sd;
    d.validate();
    return d;
}

Dist Dist::truncated_normal(double mean, double sd) {
    Dist d;
    d.kind = DistKind::TruncatedNormal;
    d.a = mean;
    d.b = sd;
    d.validate();
    return d;
}

void Dist::validate() const {
    switch (kind) {
        case DistKind::Exponential:
            require(std::isfinite(a) && a > 0.0, "exponential rate must be positive");
            break;
        case DistKind::Uniform:
            require(std::isfinite(a) && std::isfinite(b), "uniform bounds must be finite");
            require(a < b, "uniform requires lo < hi");
            break;
        case DistKind::Lognormal:
            require(std::isfinite(a), "lognormal log-mean must be finite");
            require(std::isfinite(b) && b > 0.0, "lognormal log-sd must be positive");
            break;
        case DistKind::TruncatedNormal:
            require(std::isfinite(a), "truncated normal mean must be finite");
            require(std::isfinite(b) && b > 0.0, "truncated normal sd must be positive");
            break;
    }
}

double Dist::support_lo() const {
    if (kind == DistKind::Uniform) return a;
    return 0.0;
}

double Dist::support_hi() const {
    if (kind == DistKind::Uniform) return b;
    return kInf;
}

double Dist::cdf(double x) const {
    switch (kind) {
        case DistKind::Exponential:
            return x <= 0.0 ? 0.0 : -std::expm1(-a * x);
        case DistKind::Uniform:
            if (x <= a) return 0.0;
            if (x >= b) return 1.0;
            return (x - a) / (b - a);
        case DistKind::Lognormal:
            return x <= 0.0 ? 0.0 : norm_cdf((std::log(x) - a) / b);
        case DistKind::TruncatedNormal: {
            if (x <= 0.0) return 0.0;
            const double Fl = norm_cdf(-a / b);
            return (norm_cdf((x - a) / b) - Fl) / (1.0 - Fl);
        }
    }
    return 0.0;
}

double Dist::density(double x) const {
    switch (kind) {
        case DistKind::Exponential:
            return x < 0.0 ? 0.0 : a * std::exp(-a * x);
        case DistKind::Uniform:
            return (x < a || x > b) ? 0.0 : 1.0 / (b - a);
        case DistKind::Lognormal:
            return x <= 0.0 ? 0.0 : norm_pdf((std::log(x) - a) / b) / (x * b);
        case DistKind::TruncatedNormal: {
            if (x < 0.0) return 0.0;
            const double Fl = norm_cdf(-a / b);
            return norm_pdf((x - a) / b) / (b * (1.0 - Fl));
        }
    }
    return 0.0;
}

double Dist::quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("quantile argument must lie in [0,1]");
    if (u == 1.0) return support_hi();
    switch (kind) {
        case DistKind::Exponential:
            return -std::log1p(-u) / a;
        case DistKind::Uniform:
            return a + u * (b - a);
        case DistKind::Lognormal:
            return u == 0.0 ? 0.0 : std::exp(a + b * norm_quantile(u));
        case DistKind::TruncatedNormal: {
            const double Fl = norm_cdf(-a / b);
            const double p = Fl + u * (1.0 - Fl);
            if (p >= 1.0) return kInf;
            const double x = a + b * norm_quantile(p);
            return x < 0.0 ? 0.0 : x;
        }
    }
    return 0.0;
}

double Dist::mean() const {
    switch (kind) {
        case DistKind::Exponential:
            return 1.0 / a;
        case DistKind::Uniform:
            return 0.5 * (a + b);
        case DistKind::Lognormal:
            return std::exp(a + 0.5 * b * b);
        case DistKind::TruncatedNormal: {
            const double zl = -a / b;
            return a + b * norm_pdf(zl) / (1.0 - norm_cdf(zl));
        }
    }
    return 0.0;
}

double Dist::partial_expectation(double cutoff) const {
    if (!std::isfinite(cutoff)) throw std::invalid_argument("partial expectation cutoff must be finite");
    // Below the support the positive part is just x - c: PE(c) = mean - c.
    if (cutoff <= support_lo()) return mean() - cutoff;
    if (cutoff >= support_hi()) return 0.0;

    switch (kind) {
        case DistKind::Exponential:
            // integral_c^inf (x-c) a e^{-ax} dx = e^{-ac}/a
            return std::exp(-a * cutoff) / a;
        case DistKind::Uniform:
            return (b - cutoff) * (b - cutoff) / (2.0 * (b - a));
        case DistKind::Lognormal: {
            const double z = (std::log(cutoff) - a) / b;
            return std::exp(a + 0.5 * b * b) * norm_cdf(b - z) - cutoff * norm_cdf(-z);
        }
        case DistKind::TruncatedNormal: {
            // E[(X-c)^+] = sd phi(z) + (mean-c) Phi(-z) for the untruncated normal;
            // the cutoff is inside [0, inf) here, so renormalize by the kept mass.
            const double z = (cutoff - a) / b;
            const double Fl = norm_cdf(-a / b);
            return (b * norm_pdf(z) + (a - cutoff) * norm_cdf(-z)) / (1.0 - Fl);
        }
    }
    return 0.0;
}

Dist Dist::scaled(double k) const {
    if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("scale factor must be positive");
    Dist out = *this;
    switch (kind) {
        case DistKind::Exponential:
            out.a = a / k;
            break;
        case DistKind::Uniform:
            out.a = a * k;
            out.b = b * k;
            break;
        case DistKind::Lognormal:
            out.a = a + std::log(k);  // log-sd unchanged
            break;
        case DistKind::TruncatedNormal:
            out.a = a * k;  // truncation point 0 is scale-invariant
            out.b = b * k;
            break;
    }
    out.validate();
    return out;
}

std::string Dist::describe() const {
    std::ostringstream os;
    switch (kind) {
        case DistKind::Exponential: os << "exponential(rate=" << a << ")"; break;
        case DistKind::Uniform: os << "uniform(lo=" << a << ", hi=" << b << ")"; break;
        case DistKind::Lognormal: os << "lognormal(log_mean=" << a << ", log_sd=" << b << ")"; break;
        case DistKind::TruncatedNormal: os << "truncated_normal(mean=" << a << ", sd=" << b << ")"; break;
    }
    return os.str();
}

}  // namespace searchdid
