#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ensemble_lab/equilibrium.hpp"
#include "ensemble_lab/measures.hpp"
#include "ensemble_lab/quadrature.hpp"

namespace ensemble_lab {

inline constexpr double pi_const = 3.141592653589793238462643383279;

// Exact single-cell integral int_a^b ln|v - c| dv with the 0*ln0 = 0 convention.
inline double log_cell_integral(double a, double b, double c) {
    auto xlogx = [](double u) { return u != 0.0 ? u * std::log(std::fabs(u)) : 0.0; };
    return xlogx(b - c) + xlogx(c - a) + a - b;
}

// Effective potential of a cell density: -2 theta int ln|x-t| phi(t) dt + V(x),
// with the log integral done exactly per cell so x may sit on the density support.
inline double g_function(double x, const EquilibriumSolution& sol, const Potential& v,
                         double theta) {
    if (x < 0.0) throw std::domain_error("x must be nonnegative");
    const GridDensity& phi = sol.density;
    const double h = phi.h();
    double acc = 0.0;
    for (std::size_t j = 0; j < phi.cells(); ++j)
        if (phi.values[j] != 0.0)
            acc += phi.values[j] * log_cell_integral(double(j) * h, double(j + 1) * h, x);
    return -2.0 * theta * acc + v.eval_limit(x);
}

namespace detail {

template <class F>
double golden_min(const F& f, double lo, double hi, double tol = 1e-8) {
    const double gr = 0.6180339887498948482;
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return f(0.5 * (a + b));
}

template <class F>
double scan_min(const F& f, double lo, double hi, std::size_t samples = 512) {
    if (hi <= lo) return f(lo);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    for (std::size_t k = 0; k <= samples; ++k) {
        double y = lo + (hi - lo) * double(k) / double(samples);
        double val = f(y);
        if (val < best) {
            best = val;
            best_k = k;
        }
    }
    double step = (hi - lo) / double(samples);
    double a = lo + step * (best_k == 0 ? 0.0 : double(best_k - 1));
    double b = std::min(hi, lo + step * double(best_k + 1));
    return std::min(best, golden_min(f, a, b));
}

}  // namespace detail

namespace detail {

inline double tail_scan_end(double t, const EquilibriumSolution& sol, const Potential& v,
                            double theta) {
    return std::min(v.domain_right(),
                    std::max(sol.density.support_right, t + 8.0 * theta));
}

// Reference level G(b): the scan starts exactly at the numeric edge so that the rate is
// continuous across its own branch point by construction.
inline double tail_reference_level(const EquilibriumSolution& sol, const Potential& v,
                                   double theta) {
    const double b = sol.edge_right;
    auto g = [&](double y) { return g_function(y, sol, v, theta); };
    return scan_min(g, b, tail_scan_end(b, sol, v, theta));
}

}  // namespace detail

// Tail rate from a solved profile: inf of G over [t, scan end] relative to the level of G
// at the support edge; zero at and below the edge.
inline double j_function(double t, const EquilibriumSolution& sol, const Potential& v,
                         double theta) {
    if (t < 0.0) throw std::domain_error("t must be nonnegative");
    const double b = sol.edge_right;
    if (t <= b) return 0.0;
    const double hi = detail::tail_scan_end(t, sol, v, theta);
    auto g = [&](double y) { return g_function(y, sol, v, theta); };
    double ref = detail::tail_reference_level(sol, v, theta);
    double inf_val = t >= hi ? g(std::min(t, v.domain_right()))
                             : detail::scan_min(g, t, hi);
    return std::max(0.0, inf_val - ref);
}

// Left-tail log-probability limit: F over the full window minus F over [0, t], evaluated
// on a common cell width so the two energies cancel exactly once t clears the support.
inline double lower_tail_rate(double t, const Potential& v, double theta,
                              std::size_t n_grid = 1024) {
    if (!(t >= theta)) throw std::invalid_argument("need t >= theta");
    const double t_eff = std::min(t, v.domain_right());
    double window = 0.0;
    solve_unbounded(v, theta, n_grid, &window);
    const double h0 = window / double(n_grid);
    const auto k = std::max<std::size_t>(64, std::size_t(std::llround(t_eff / h0)));
    const double h = t_eff / double(k);
    const auto n_w = std::max(k, std::size_t(std::floor(window / h + 1e-12)));
    double f_inf = solve(v, theta, double(n_w) * h, n_w).energy;
    double f_t = k == n_w ? f_inf : solve(v, theta, t_eff, k).energy;
    return std::min(0.0, f_inf - f_t);
}

// ---- closed-form tail rates of the two reference families ----

inline double krawtchouk_lambda(double y, double m_rate, double theta) {
    const double a = 0.5 * (m_rate + theta) - std::sqrt(m_rate * theta);
    const double b = 0.5 * (m_rate + theta) + std::sqrt(m_rate * theta);
    const double ra = std::sqrt(y - a), rb = std::sqrt(y - b);
    return -y * std::log((ra + rb * std::sqrt(a / b)) / (ra + rb * std::sqrt(b / a))) -
           (m_rate + theta) * std::log(ra + rb * std::sqrt(b / a)) +
           (m_rate - theta) * std::log(ra + rb) + theta * std::log(b - a);
}

inline double krawtchouk_lambda_prime(double y, double m_rate, double theta) {
    const double a = 0.5 * (m_rate + theta) - std::sqrt(m_rate * theta);
    const double b = 0.5 * (m_rate + theta) + std::sqrt(m_rate * theta);
    const double ra = std::sqrt(y - a), rb = std::sqrt(y - b);
    return -std::log((ra + rb * std::sqrt(a / b)) / (ra + rb * std::sqrt(b / a)));
}

// Upper-tail rate of the bounded family with separated edges (m > theta).
inline double krawtchouk_j(double y, double m_rate, double theta) {
    if (!(m_rate > theta)) throw std::invalid_argument("requires m > theta");
    const double right = m_rate + theta;
    const double b = 0.5 * right + std::sqrt(m_rate * theta);
    if (y < b) return 0.0;
    if (y > right * (1.0 + 1e-12)) return std::numeric_limits<double>::infinity();
    const double a = right - b;
    auto potential = [&](double x) {
        auto xlogx = [](double u) { return u > 0.0 ? u * std::log(u) : 0.0; };
        return xlogx(x) + xlogx(right - x);
    };
    const double vpb = std::log(b) - std::log(a);
    double yc = std::min(y, right);
    return 2.0 * krawtchouk_lambda(yc, m_rate, theta) + potential(yc) - potential(b) -
           (yc - b) * vpb;
}

inline double jack_lambda(double alpha, double t, double theta) {
    const double root = std::sqrt(t);
    const double b = theta * (root + 1.0) * (root + 1.0);
    const double w = std::sqrt(4.0 * root * theta + alpha);
    const double sa = std::sqrt(alpha);
    return (b + alpha) * std::log((sa + w) / ((root - 1.0) / (root + 1.0) * sa + w)) -
           2.0 * root * theta * sa / (sa + w) -
           2.0 * theta * std::log((sa + w) / std::sqrt(4.0 * root * theta));
}

inline double jack_lambda_prime(double alpha, double t, double theta) {
    const double root = std::sqrt(t);
    const double w = std::sqrt(4.0 * root * theta + alpha);
    const double sa = std::sqrt(alpha);
    return std::log((sa + w) / ((root - 1.0) / (root + 1.0) * sa + w));
}

// Upper-tail rate of the unbounded family.
inline double jack_j(double y, double t, double theta) {
    if (y < 0.0) throw std::domain_error("y must be nonnegative");
    const double root = std::sqrt(t);
    const double b = theta * (root + 1.0) * (root + 1.0);
    if (y <= b) return 0.0;
    const double alpha = y - b;
    return 2.0 * jack_lambda(alpha, t, theta) + (b + alpha) * std::log((b + alpha) / b) - alpha;
}

// ---- closed-form log integrals ----

enum class LogIntegralCase { i_minus_1, i_plus_1, i_minus_2, i_plus_2, j_1, j_2 };

// int_0^inf ln|a^2 +- b^2 z^2| / (c^2 + d^2 z^2)^n dz and the companion
// int_0^inf dz / (c^2 + d^2 z^2)^n, for the parameter patterns with closed forms.
inline double log_integral_identities(LogIntegralCase which, double a, double b, double c,
                                      double d) {
    if (a < 0.0 || b < 0.0 || c < 0.0 || d < 0.0) throw std::domain_error("parameters < 0");
    if (!(c * d > 0.0)) throw std::domain_error("requires c*d > 0");
    switch (which) {
        case LogIntegralCase::j_1:
            return pi_const / (2.0 * c * d);
        case LogIntegralCase::j_2:
            if (c != 1.0 || d != 1.0) throw std::domain_error("closed form needs c = d = 1");
            return pi_const / 4.0;
        default:
            break;
    }
    if (!(a + b > 0.0)) throw std::domain_error("requires a + b > 0");
    switch (which) {
        case LogIntegralCase::i_minus_1:
            return pi_const * std::log(a * a + b * b * c * c / (d * d)) / (2.0 * c * d);
        case LogIntegralCase::i_plus_1:
            return pi_const / (c * d) * std::log(a + b * c / d);
        case LogIntegralCase::i_minus_2:
            if (c != 1.0 || d != 1.0) throw std::domain_error("closed form needs c = d = 1");
            return pi_const / 4.0 * std::log(a * a + b * b) -
                   pi_const * b * b / (2.0 * (a * a + b * b));
        case LogIntegralCase::i_plus_2:
            if (c != 1.0 || d != 1.0) throw std::domain_error("closed form needs c = d = 1");
            return pi_const / 2.0 * std::log(a + b) - b * pi_const / (2.0 * a + 2.0 * b);
        default:
            throw std::logic_error("unknown case");
    }
}

// Numeric evaluation of the same integrals via the tangent substitution, which turns the
// log blow-up at infinity into pi*ln2 and leaves a bounded integrand.
inline double log_integral_numeric(LogIntegralCase which, double a, double b, double c,
                                   double d) {
    switch (which) {
        case LogIntegralCase::j_1: {
            // Finite part numerically; the tail integrates the expansion of
            // 1/(c^2 + d^2 z^2) in powers of (c/(d z))^2, accurate to machine
            // precision once the cutoff is far past c/d.
            const double cutoff = 100.0 * std::max(1.0, c / d);
            double head = adaptive_simpson(
                [&](double z) { return 1.0 / (c * c + d * d * z * z); }, 0.0, cutoff, 1e-13);
            double ratio_sq = (c / (d * cutoff)) * (c / (d * cutoff));
            double tail = 0.0, term = 1.0 / (d * d * cutoff);
            for (int k = 0; k < 8; ++k) {
                tail += term / (2.0 * k + 1.0);
                term *= -ratio_sq;
            }
            return head + tail;
        }
        case LogIntegralCase::j_2:
            return adaptive_simpson(
                [&](double u) {
                    double cu = std::cos(u);
                    return cu * cu;
                },
                0.0, 0.5 * pi_const, 1e-13);
        default:
            break;
    }
    const bool minus = which == LogIntegralCase::i_minus_1 || which == LogIntegralCase::i_minus_2;
    const bool order_one = which == LogIntegralCase::i_minus_1 || which == LogIntegralCase::i_plus_1;
    const double beta = order_one ? b * c / d : b;
    auto core = [&](double u) {
        double cu = std::cos(u), su = std::sin(u);
        double arg = minus ? a * a * cu * cu - beta * beta * su * su
                           : a * a * cu * cu + beta * beta * su * su;
        double weight = order_one ? 1.0 : cu * cu;
        double logpart = std::log(std::fabs(arg)) - (order_one ? 0.0 : 2.0 * std::log(cu));
        return logpart * weight;
    };
    double total = 0.0;
    if (minus && a > 0.0 && beta > 0.0) {
        double u_star = std::atan(a / beta);
        double delta = 1e-7;
        total += adaptive_simpson(core, 0.0, u_star - delta, 1e-10, 44);
        total += adaptive_simpson(core, u_star + delta, 0.5 * pi_const, 1e-10, 44);
        double slope = (a * a + beta * beta) * std::fabs(std::sin(2.0 * u_star));
        double weight = order_one ? 1.0 : std::cos(u_star) * std::cos(u_star);
        total += weight * 2.0 * delta * (std::log(slope * delta) - 1.0);
        if (!order_one)
            total += weight * (-2.0 * std::log(std::cos(u_star))) * 2.0 * delta;
    } else {
        total += adaptive_simpson(core, 0.0, 0.5 * pi_const, 1e-12, 44);
    }
    if (order_one) return (total + pi_const * std::log(2.0)) / (c * d);
    return total;
}

// ---- exact cell integrals exposed by hypothesis-checked kind ----

enum class CellIntegralKind { same_interval, point_vs_interval, offset_square };

inline double closed_form_log_cells(CellIntegralKind kind, double a, double b, double c) {
    switch (kind) {
        case CellIntegralKind::same_interval: {
            if (!(b > a)) throw std::domain_error("needs a < b");
            double r = b - a;
            return r * r * std::log(r) - 1.5 * r * r;
        }
        case CellIntegralKind::point_vs_interval:
            if (!(b > a)) throw std::domain_error("needs a < b");
            return log_cell_integral(a, b, c);
        case CellIntegralKind::offset_square: {
            if (!(c >= a) || !(a >= 0.0)) throw std::domain_error("needs c >= a >= 0");
            auto sqlog = [](double u) { return u > 0.0 ? u * u * std::log(u) : 0.0; };
            return 0.5 * sqlog(c - a) + 0.5 * sqlog(c + a) - sqlog(c) - 1.5 * a * a;
        }
    }
    throw std::logic_error("unknown kind");
}

// Tabulated tail-rate bundle for reporting.
struct RateProfile {
    double edge_right = 0.0;
    std::vector<double> y;
    std::vector<double> g_values;
    std::vector<double> j_values;
    std::vector<double> t_grid;
    std::vector<double> f_curve;
};

inline RateProfile build_rate_profile(const EquilibriumSolution& sol, const Potential& v,
                                      double theta, std::size_t n_samples = 256) {
    if (n_samples < 2) throw std::invalid_argument("need at least two samples");
    RateProfile p;
    p.edge_right = sol.edge_right;
    const double s = sol.density.support_right;
    const double right = std::min(v.domain_right(), s);
    p.y.resize(n_samples);
    p.g_values.resize(n_samples);
    p.j_values.resize(n_samples);
    const double ref = detail::tail_reference_level(sol, v, theta);
    // Suffix minima of G over one fine grid give every inf over [y, right] in a single pass;
    // a multiple of n_samples - 1 keeps the sample points exactly on the fine grid.
    const std::size_t fine = std::min<std::size_t>(4096, 4 * (n_samples - 1));
    std::vector<double> g_fine(fine + 1);
    for (std::size_t k = 0; k <= fine; ++k)
        g_fine[k] = g_function(right * double(k) / double(fine), sol, v, theta);
    std::vector<double> suffix(g_fine);
    for (std::size_t k = fine; k-- > 0;) suffix[k] = std::min(suffix[k], suffix[k + 1]);
    for (std::size_t k = 0; k < n_samples; ++k) {
        double y = right * double(k) / double(n_samples - 1);
        p.y[k] = y;
        p.g_values[k] = g_function(y, sol, v, theta);
        auto idx = std::size_t(std::ceil(y / right * double(fine) - 1e-9));
        p.j_values[k] =
            y <= sol.edge_right ? 0.0 : std::max(0.0, suffix[std::min(idx, fine)] - ref);
    }
    return p;
}

}  // namespace ensemble_lab
