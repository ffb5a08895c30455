#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ensemble_lab {

inline constexpr double euler_gamma = 0.5772156649015328606;

// Value carried on the natural-log scale. Products of ensemble weights are
// accumulated by adding logs; `zero` marks an exact structural zero (e.g. a
// partition that does not fit the requested number of rows).
struct LogValue {
    double log = 0.0;
    bool zero = false;

    static LogValue from_log(double l) { return LogValue{l, false}; }
    static LogValue exact_zero() { return LogValue{0.0, true}; }

    double to_double() const { return zero ? 0.0 : std::exp(log); }

    LogValue& operator*=(const LogValue& o) {
        zero = zero || o.zero;
        log = zero ? 0.0 : log + o.log;
        return *this;
    }
    friend LogValue operator*(LogValue a, const LogValue& b) { return a *= b; }
};

namespace detail {

// Lanczos approximation, g = 7, 9 coefficients (Godfrey's set).
inline double lanczos_log_gamma(double x) {
    static constexpr double g = 7.0;
    static constexpr double c[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    double z = x - 1.0;
    double a = c[0];
    for (int i = 1; i < 9; ++i) a += c[i] / (z + i);
    double t = z + g + 0.5;
    return 0.91893853320467274178 /* ln sqrt(2*pi) */
           + (z + 0.5) * std::log(t) - t + std::log(a);
}

} // namespace detail

// Natural log of Gamma(x) for x > 0. Reflection handles arguments below 1/2.
inline double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0");
    if (x < 0.5) {
        // ln Gamma(x) = ln(pi / sin(pi x)) - ln Gamma(1 - x)
        return std::log(M_PI / std::sin(M_PI * x)) - detail::lanczos_log_gamma(1.0 - x);
    }
    return detail::lanczos_log_gamma(x);
}

// ln Q_theta(x) = ln[Gamma(x+1)Gamma(x+theta) / (Gamma(x)Gamma(x+1-theta))].
// Defined for x >= theta (the minimal particle spacing), where it stays within
// (1+theta)^3/x of 2*theta*ln(x).
inline double log_q_theta(double x, double theta) {
    if (!(theta > 0.0)) throw std::domain_error("log_q_theta: requires theta > 0");
    if (!(x >= theta)) throw std::domain_error("log_q_theta: requires x >= theta");
    if (theta == 1.0) return 2.0 * std::log(x); // Q_1(x) = x^2 exactly
    return log_gamma(x + 1.0) + log_gamma(x + theta) - log_gamma(x) -
           log_gamma(x + 1.0 - theta);
}

// Checks x^{x-gamma}/e^{x-1} <= Gamma(x) <= x^{x-1/2}/e^{x-1} for x >= 1,
// with a small slack absorbing round-off (the bounds are tight at x = 1).
inline bool gamma_sandwich_check(double x) {
    if (!(x >= 1.0)) throw std::domain_error("gamma_sandwich_check: requires x >= 1");
    double lg = log_gamma(x);
    double lower = (x - euler_gamma) * std::log(x) - (x - 1.0);
    double upper = (x - 0.5) * std::log(x) - (x - 1.0);
    double slack = 1e-12 * std::max(1.0, std::fabs(lg));
    return lower - slack <= lg && lg <= upper + slack;
}

} // namespace ensemble_lab
