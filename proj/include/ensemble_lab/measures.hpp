#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ensemble_lab/specfun.hpp"
#include "ensemble_lab/statespace.hpp"

namespace ensemble_lab {

enum class PotentialFamily { krawtchouk, jack_plancherel, tabulated };

// External field V, carried as the finite-n form V_N, its limit V, and V'.
struct Potential {
    PotentialFamily family = PotentialFamily::tabulated;
    double theta = 1.0;
    double m_rate = 0.0;   // krawtchouk cap rate
    double t = 0.0;        // plancherel time parameter
    double xi = 0.0;       // growth margin in V(x) >= (1+xi) theta ln(1+x^2)
    double offset_a = 0.0; // additive constant fixed at construction
    std::vector<double> grid_x, grid_v, grid_dv;  // tabulated family

    long long finite_cap(int n) const {
        if (family == PotentialFamily::krawtchouk) return (long long)std::floor(m_rate * double(n));
        return unbounded_cap;
    }

    double domain_right() const {
        if (family == PotentialFamily::krawtchouk) return m_rate + theta;
        if (family == PotentialFamily::tabulated) return grid_x.back();
        return std::numeric_limits<double>::infinity();
    }

    double eval_finite_n(int n, double x) const {
        double nn = double(n);
        switch (family) {
            case PotentialFamily::krawtchouk: {
                double m_n = double(finite_cap(n));
                double upper = m_n + nn * theta - nn * x + 1.0 - theta;
                if (x < 0.0 || upper <= 0.0) throw std::domain_error("x outside finite-n domain");
                return (log_gamma(nn * x + 1.0) + log_gamma(upper) -
                        (m_n + nn * theta + 2.0 - theta) * std::log(nn) + (m_n + nn * theta - theta)) /
                       nn;
            }
            case PotentialFamily::jack_plancherel: {
                if (x < 0.0) throw std::domain_error("x must be nonnegative");
                return offset_a +
                       (log_gamma(nn * x + 1.0) - nn * x * std::log(t * theta * nn)) / nn;
            }
            case PotentialFamily::tabulated:
                return eval_limit(x);
        }
        throw std::logic_error("unknown family");
    }

    double eval_limit(double x) const {
        auto xlogx = [](double u) { return u > 0.0 ? u * std::log(u) : 0.0; };
        switch (family) {
            case PotentialFamily::krawtchouk: {
                double right = m_rate + theta;
                if (x < 0.0 || x > right) throw std::domain_error("x outside [0, m+theta]");
                return xlogx(x) + xlogx(right - x);
            }
            case PotentialFamily::jack_plancherel:
                if (x < 0.0) throw std::domain_error("x must be nonnegative");
                return offset_a + xlogx(x) - (1.0 + std::log(t * theta)) * x;
            case PotentialFamily::tabulated: {
                if (x < grid_x.front() || x > grid_x.back())
                    throw std::domain_error("x outside table");
                auto it = std::upper_bound(grid_x.begin(), grid_x.end(), x);
                auto j = std::size_t(std::max<std::ptrdiff_t>(1, it - grid_x.begin())) - 1;
                if (j + 1 >= grid_x.size()) j = grid_x.size() - 2;
                double w = (x - grid_x[j]) / (grid_x[j + 1] - grid_x[j]);
                return grid_v[j] * (1.0 - w) + grid_v[j + 1] * w;
            }
        }
        throw std::logic_error("unknown family");
    }

    double eval_derivative(double x) const {
        switch (family) {
            case PotentialFamily::krawtchouk: {
                double right = m_rate + theta;
                if (x < 0.0 || x > right) throw std::domain_error("x outside [0, m+theta]");
                double delta = std::ldexp(right, -40);
                double u = std::clamp(x, delta, right - delta);
                return std::log(u) - std::log(right - u);
            }
            case PotentialFamily::jack_plancherel: {
                if (x < 0.0) throw std::domain_error("x must be nonnegative");
                double delta = std::ldexp(theta * (std::sqrt(t) + 1.0) * (std::sqrt(t) + 1.0), -40);
                return std::log(std::max(x, delta) / (t * theta));
            }
            case PotentialFamily::tabulated: {
                if (x < grid_x.front() || x > grid_x.back())
                    throw std::domain_error("x outside table");
                auto it = std::upper_bound(grid_x.begin(), grid_x.end(), x);
                auto j = std::size_t(std::max<std::ptrdiff_t>(1, it - grid_x.begin())) - 1;
                if (j >= grid_dv.size()) j = grid_dv.size() - 1;
                return grid_dv[j];
            }
        }
        throw std::logic_error("unknown family");
    }
};

inline Potential krawtchouk_potential(double m_rate, double theta) {
    if (!(m_rate > 0.0) || !(theta > 0.0)) throw std::invalid_argument("need m_rate, theta > 0");
    Potential v;
    v.family = PotentialFamily::krawtchouk;
    v.theta = theta;
    v.m_rate = m_rate;
    v.xi = 0.0;
    return v;
}

// Fixes the additive constant as the smallest grid value making
// V(x) >= 2 theta ln(1+x^2) everywhere; V_N >= V pointwise, so every N inherits it.
inline Potential jack_potential(double t, double theta) {
    if (!(t > 0.0) || !(theta > 0.0)) throw std::invalid_argument("need t, theta > 0");
    Potential v;
    v.family = PotentialFamily::jack_plancherel;
    v.theta = theta;
    v.t = t;
    v.xi = 1.0;
    auto gap = [&](double x) {
        double xlx = x > 0.0 ? x * std::log(x) : 0.0;
        return 2.0 * theta * std::log1p(x * x) - xlx + (1.0 + std::log(t * theta)) * x;
    };
    auto slack_growth = [&](double x) {
        return std::log(x / (t * theta)) - 4.0 * theta * x / (1.0 + x * x);
    };
    double x_max = 1e3;
    while (slack_growth(x_max) < 0.0) x_max *= 2.0;
    double best = 0.0;
    int best_k = 0;
    const int pts = 1 << 18;
    for (int k = 0; k <= pts; ++k) {
        double g = gap(x_max * double(k) / double(pts));
        if (g > best) {
            best = g;
            best_k = k;
        }
    }
    double lo = x_max * double(std::max(0, best_k - 1)) / double(pts);
    double hi = x_max * double(std::min(pts, best_k + 1)) / double(pts);
    for (int it = 0; it < 200; ++it) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (gap(m1) < gap(m2)) lo = m1; else hi = m2;
    }
    v.offset_a = std::max(best, gap(0.5 * (lo + hi))) + 1e-9;
    return v;
}

inline Potential tabulated_potential(std::vector<double> x, std::vector<double> val,
                                     std::vector<double> slope, double theta, double xi = 0.0) {
    if (x.size() < 2 || x.size() != val.size() || slope.size() + 1 != x.size())
        throw std::invalid_argument("table sizes inconsistent");
    if (!std::is_sorted(x.begin(), x.end())) throw std::invalid_argument("grid must be sorted");
    Potential v;
    v.family = PotentialFamily::tabulated;
    v.theta = theta;
    v.xi = xi;
    v.grid_x = std::move(x);
    v.grid_v = std::move(val);
    v.grid_dv = std::move(slope);
    return v;
}

// Reports (never rejects) violations of the claimed growth envelope on a geometric grid.
inline std::vector<std::string> growth_violations(const Potential& v, double x_hi = 1e4) {
    std::vector<std::string> out;
    double right = std::min(v.domain_right(), x_hi);
    for (double x = 1e-3; x <= right; x *= 1.05) {
        double need = (1.0 + v.xi) * v.theta * std::log1p(x * x);
        double have = v.eval_limit(x);
        if (have < need - 1e-12 * std::max(1.0, std::fabs(need)))
            out.push_back("V(" + std::to_string(x) + ") = " + std::to_string(have) + " < " +
                          std::to_string(need));
    }
    return out;
}

enum class InteractionKind { q_theta, coulomb };

struct EnsembleSpec {
    int n = 0;
    double theta = 1.0;
    long long cap = unbounded_cap;
    Potential potential;
    InteractionKind interaction = InteractionKind::q_theta;
    double beta = 2.0;  // used by the coulomb comparison form only

    void validate() const {
        if (n < 1) throw std::invalid_argument("need n >= 1");
        if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
        if (potential.theta != theta) throw std::invalid_argument("potential/spec theta mismatch");
        if (potential.family == PotentialFamily::krawtchouk && cap != potential.finite_cap(n))
            throw std::invalid_argument("cap must track floor(m_rate * n)");
    }
};

inline EnsembleSpec krawtchouk_spec(double m_rate, double theta, int n) {
    EnsembleSpec s;
    s.n = n;
    s.theta = theta;
    s.potential = krawtchouk_potential(m_rate, theta);
    s.cap = s.potential.finite_cap(n);
    s.validate();
    return s;
}

inline EnsembleSpec jack_spec(double t, double theta, int n, long long cap) {
    EnsembleSpec s;
    s.n = n;
    s.theta = theta;
    s.potential = jack_potential(t, theta);
    s.cap = cap;
    s.validate();
    return s;
}

inline double log_interaction(const EnsembleSpec& spec, double gap) {
    if (spec.interaction == InteractionKind::q_theta) return log_q_theta(gap, spec.theta);
    return spec.beta * std::log(gap);
}

// Unnormalized log-mass of one configuration.
inline LogValue log_weight(const EnsembleSpec& spec, const Configuration& c) {
    spec.validate();
    c.validate();
    if (c.n != spec.n || c.theta != spec.theta)
        throw std::invalid_argument("configuration does not match spec");
    double acc = 0.0;
    for (int i = 1; i <= c.n; ++i) {
        for (int j = i + 1; j <= c.n; ++j) acc += log_interaction(spec, c.position(i) - c.position(j));
        acc -= double(spec.n) * spec.potential.eval_finite_n(spec.n, c.position(i) / double(spec.n));
    }
    return LogValue::from_log(acc);
}

// ln Z by streaming log-sum-exp over the whole state space.
inline LogValue exact_log_partition(const EnsembleSpec& spec, long long budget = 10'000'000) {
    spec.validate();
    if (spec.cap == unbounded_cap) throw std::invalid_argument("partition sum needs a finite cap");
    double peak = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for_each_state(spec.n, spec.cap, spec.theta,
                   [&](const Configuration& c) {
                       double l = log_weight(spec, c).log;
                       if (l > peak) {
                           sum = sum * std::exp(peak - l) + 1.0;
                           peak = l;
                       } else {
                           sum += std::exp(l - peak);
                       }
                   },
                   budget);
    return LogValue::from_log(peak + std::log(sum));
}

// -(2 theta / r^2) sum_{i<j} ln|x_i - x_j| + (1/r) sum V(x_i); finite_n = 0 uses the limit V.
inline double energy_of_atoms(const EmpiricalMeasure& mu, const Potential& v, double theta,
                              int finite_n = 0) {
    auto r = mu.atoms.size();
    if (r == 0) throw std::invalid_argument("empty measure");
    double pair_sum = 0.0;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = i + 1; j < r; ++j) {
            double gap = std::fabs(mu.atoms[i] - mu.atoms[j]);
            if (gap == 0.0) throw std::domain_error("coincident atoms have infinite energy");
            pair_sum += std::log(gap);
        }
    double field = 0.0;
    for (double x : mu.atoms)
        field += finite_n > 0 ? v.eval_finite_n(finite_n, x) : v.eval_limit(x);
    double rr = double(r);
    return -2.0 * theta * pair_sum / (rr * rr) + field / rr;
}

// Equals ln(Z_N P_N) - theta N(N-1) ln N + N^2 I_{V_N}(mu_N); the potential and ln N
// terms cancel exactly, leaving the pure interaction defect, which vanishes at theta = 1.
inline double pmf_decomposition_residual(const EnsembleSpec& spec, const Configuration& c) {
    spec.validate();
    c.validate();
    double acc = 0.0;
    for (int i = 1; i <= c.n; ++i)
        for (int j = i + 1; j <= c.n; ++j) {
            double gap = c.position(i) - c.position(j);
            acc += log_interaction(spec, gap) - 2.0 * spec.theta * std::log(gap);
        }
    return acc;
}

// Explicit bound from the decomposition: (1+theta)^3 sum_{i<j} 1/(l_i - l_j).
inline double pmf_residual_bound(const Configuration& c) {
    double s = 0.0;
    for (int i = 1; i <= c.n; ++i)
        for (int j = i + 1; j <= c.n; ++j) s += 1.0 / (c.position(i) - c.position(j));
    return std::pow(1.0 + c.theta, 3) * s;
}

}  // namespace ensemble_lab
