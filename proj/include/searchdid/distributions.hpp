#pragma once

#include <string>

#include "searchdid/rng.hpp"

namespace searchdid {

enum class DistKind { Exponential, Uniform, Lognormal, TruncatedNormal };

// Continuous offer / outside-option distribution. Four parametric families.
// Parameter slots by kind:
//   Exponential      a = rate                   support [0, inf)
//   Uniform          a = lo, b = hi             support [lo, hi]
//   Lognormal        a = log-mean, b = log-sd   support (0, inf)
//   TruncatedNormal  a = mean, b = sd           normal truncated at zero, support [0, inf)
struct Dist {
    DistKind kind = DistKind::Exponential;
    double a = 1.0;
    double b = 0.0;

    static Dist exponential(double rate);
    static Dist uniform(double lo, double hi);
    static Dist lognormal(double log_mean, double log_sd);
    static Dist truncated_normal(double mean, double sd);

    void validate() const;  // throws std::invalid_argument naming the offending field

    double support_lo() const;
    double support_hi() const;  // may be +inf

    double cdf(double x) const;
    double survival(double x) const { return 1.0 - cdf(x); }
    double density(double x) const;
    double quantile(double u) const;  // u in [0,1]
    double mean() const;

    // Partial expectation E[(X - c)^+] = integral_c^inf (x - c) dF(x).
    // Closed form for exponential/uniform/lognormal; adaptive quadrature
    // for the truncated normal.
    double partial_expectation(double cutoff) const;

    // Same law with all values multiplied by k > 0.
    Dist scaled(double k) const;

    double sample(Rng& rng) const { return quantile(rng.uniform01()); }

    std::string describe() const;
};

}  // namespace searchdid
