#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ensemble_lab/grid_density.hpp"

namespace ensemble_lab {

inline constexpr long long unbounded_cap = -1;

// Ordered particle configuration l_i = lambda_i + (n-i)*theta, stored through the
// integer partition so lattice membership is exact.
struct Configuration {
    double theta = 1.0;
    int n = 0;
    long long cap = unbounded_cap;
    std::vector<long long> lambda;  // weakly decreasing, size n

    // 1-based particle index, largest first.
    double position(int i) const { return double(lambda[i - 1]) + double(n - i) * theta; }

    std::vector<double> positions() const {
        std::vector<double> out(n);
        for (int i = 1; i <= n; ++i) out[i - 1] = position(i);
        return out;
    }

    void validate() const {
        if (n <= 0 || int(lambda.size()) != n) throw std::invalid_argument("configuration size mismatch");
        if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
        for (int i = 0; i < n; ++i) {
            if (lambda[i] < 0) throw std::invalid_argument("partition entries must be nonnegative");
            if (i + 1 < n && lambda[i] < lambda[i + 1])
                throw std::invalid_argument("partition entries must be weakly decreasing");
            if (cap != unbounded_cap && lambda[i] > cap)
                throw std::invalid_argument("partition entry exceeds cap");
        }
    }
};

struct EmpiricalMeasure {
    std::vector<double> atoms;  // l_i / N, descending
    double weight = 0.0;        // per atom
    int scale_n = 0;
    double theta = 1.0;

    double mass() const { return weight * double(atoms.size()); }
};

inline Configuration from_partition(const std::vector<long long>& lambda, double theta,
                                    long long cap = unbounded_cap) {
    Configuration c;
    c.theta = theta;
    c.n = int(lambda.size());
    c.cap = cap;
    c.lambda = lambda;
    c.validate();
    return c;
}

inline std::vector<long long> to_partition(const Configuration& c) { return c.lambda; }

// C(n+m, n) guarded against overflow; throws if it exceeds long long.
inline long long state_count(int n, long long m) {
    if (n <= 0 || m < 0) throw std::invalid_argument("need n >= 1, m >= 0");
    __int128 acc = 1;
    for (int k = 1; k <= n; ++k) {
        acc = acc * (__int128)(m + k) / k;
        if (acc > (__int128)std::numeric_limits<long long>::max())
            throw std::overflow_error("state count exceeds 64-bit range");
    }
    return (long long)acc;
}

// Visits every partition with at most n rows and entries <= m, smallest row varying
// slowest (colexicographic), so runs are deterministic and resumable by prefix count.
template <class F>
inline void for_each_state(int n, long long m, double theta, F&& visit,
                           long long budget = 10'000'000) {
    long long total = state_count(n, m);
    if (total > budget)
        throw std::runtime_error("state space has " + std::to_string(total) +
                                 " elements, over the budget of " + std::to_string(budget));
    std::vector<long long> mu(n, 0);  // weakly increasing mirror of lambda
    std::vector<long long> lambda(n);
    for (;;) {
        for (int i = 0; i < n; ++i) lambda[i] = mu[n - 1 - i];
        Configuration c;
        c.theta = theta;
        c.n = n;
        c.cap = m;
        c.lambda = lambda;
        visit(const_cast<const Configuration&>(c));
        int k = n - 1;
        while (k >= 0 && mu[k] >= m) --k;
        if (k < 0) break;
        long long next = mu[k] + 1;
        for (int i = k; i < n; ++i) mu[i] = next;
    }
}

inline std::vector<Configuration> enumerate_states(int n, long long m, double theta,
                                                   long long budget = 10'000'000) {
    std::vector<Configuration> out;
    out.reserve(std::size_t(state_count(n, m)));
    for_each_state(n, m, theta, [&](const Configuration& c) { out.push_back(c); }, budget);
    return out;
}

inline EmpiricalMeasure empirical_measure(const Configuration& c) {
    c.validate();
    EmpiricalMeasure mu;
    mu.scale_n = c.n;
    mu.theta = c.theta;
    mu.weight = 1.0 / double(c.n);
    mu.atoms.resize(c.n);
    for (int i = 1; i <= c.n; ++i) mu.atoms[i - 1] = c.position(i) / double(c.n);
    return mu;
}

// Largest r particles at weight 1/r; scale_n keeps the ambient N used to rescale.
inline EmpiricalMeasure empirical_measure_top(const Configuration& c, int r, int ambient_n) {
    c.validate();
    if (r < 1 || r > c.n) throw std::invalid_argument("need 1 <= r <= particle count");
    EmpiricalMeasure mu;
    mu.scale_n = ambient_n;
    mu.theta = c.theta;
    mu.weight = 1.0 / double(r);
    mu.atoms.resize(r);
    for (int i = 1; i <= r; ++i) mu.atoms[i - 1] = c.position(i) / double(ambient_n);
    return mu;
}

inline int count_above(const Configuration& c, double rho) {
    if (rho < 0.0) throw std::invalid_argument("threshold must be nonnegative");
    int u = 0;
    for (int i = 1; i <= c.n; ++i)
        if (c.position(i) >= rho * double(c.n)) ++u;
    return u;
}

// Drops particle w_prime and slides the window [w_prime, w] down by one slot:
// l'_k = l_{k+1} + theta there. The k = n boundary has no successor, so w = n is rejected.
inline Configuration shift_map(const Configuration& c, int w, int w_prime) {
    c.validate();
    if (w_prime < 1 || w_prime > w || w >= c.n)
        throw std::invalid_argument("window must satisfy 1 <= w' <= w <= n-1");
    Configuration out = c;
    for (int k = w_prime; k <= w; ++k) out.lambda[k - 1] = c.lambda[k];
    out.validate();
    return out;
}

// Pushes every particle at or above barrier*N down one slot except the lowest of them,
// which lands on the smallest lattice point >= barrier*N above l_{u+1}.
inline Configuration push_right_tail_map(const Configuration& c, double barrier) {
    c.validate();
    double wall = barrier * double(c.n);
    int u = count_above(c, barrier);
    if (u < 1) throw std::invalid_argument("no particle reaches the barrier");
    if (u >= c.n) throw std::invalid_argument("barrier must sit above the lowest particle");
    Configuration out = c;
    for (int k = 1; k < u; ++k) out.lambda[k - 1] = c.lambda[k];
    double base = c.position(u + 1) + c.theta;  // maps to lambda_{u+1} at row u
    long long a = (long long)std::ceil(wall - base);
    if (a < 0) a = 0;
    while (base + double(a) < wall) ++a;
    while (a > 0 && base + double(a - 1) >= wall) --a;
    out.lambda[u - 1] = c.lambda[u] + a;
    out.validate();
    return out;
}

// Smallest y with cdf(y) = level, found by walking cells of the piecewise-linear CDF.
inline double quantile_of_density(const GridDensity& phi, double level) {
    if (level <= 0.0 || level > 1.0) throw std::invalid_argument("quantile level must be in (0, 1]");
    double step = phi.h();
    double acc = 0.0;
    for (std::size_t j = 0; j < phi.cells(); ++j) {
        double cell_mass = phi.values[j] * step;
        if (acc + cell_mass >= level) {
            if (phi.values[j] <= 0.0) return double(j) * step;
            return double(j) * step + (level - acc) / phi.values[j];
        }
        acc += cell_mass;
    }
    if (level <= acc * (1.0 + 1e-12) + 1e-12) return phi.support_right;
    throw std::invalid_argument("density carries less mass than the requested level");
}

// Rounds the r quantiles of phi at levels (i - 1/2)/r down to the shifted lattice
// Z + (r-i)*theta, producing an r-particle configuration on scale n.
inline Configuration quantile_configuration(const GridDensity& phi, double theta, int n, int r,
                                            long long m) {
    if (r < 1 || n < 1 || 2 * r < n || r > n)
        throw std::invalid_argument("need n/2 <= r <= n");
    if (!is_admissible(phi, theta, phi.support_right))
        throw std::invalid_argument("density is not admissible for this theta");
    std::vector<long long> lambda(r);
    for (int i = 1; i <= r; ++i) {
        double y = quantile_of_density(phi, (double(r - i + 1) - 0.5) / double(r));
        double t = double(n) * y - double(r - i) * theta;
        long long lam = (long long)std::floor(t + 1e-9);
        if (lam < 0) lam = 0;
        lambda[i - 1] = lam;
    }
    return from_partition(lambda, theta, m);
}

// Spreads each atom a over [a, a + theta/N) at height N/(r*theta); blocks of adjacent
// lattice atoms tile exactly, so the zero partition flattens to the constrained ceiling.
inline GridDensity mollify(const EmpiricalMeasure& mu, int r) {
    if (mu.atoms.empty() || mu.scale_n <= 0) throw std::invalid_argument("empty measure");
    if (r < 1) throw std::invalid_argument("need r >= 1");
    double n = double(mu.scale_n);
    double theta = mu.theta;
    double block = theta / n;
    double height = (n / double(r)) / theta;

    // Exact tiling when theta has a small rational denominator: grid step 1/(q*N).
    int q = 0;
    for (int cand = 1; cand <= 640; ++cand) {
        double scaled = theta * double(cand);
        if (std::fabs(scaled - std::round(scaled)) <= 1e-9 * std::max(1.0, scaled)) {
            q = cand;
            break;
        }
    }
    double top = mu.atoms.front() + block;
    if (q > 0) {
        double step = 1.0 / (double(q) * n);
        auto cells = std::size_t(std::llround(top / step));
        if (cells * q <= 64u * 1024u * 1024u / 8u) {
            long long width = std::llround(block / step);
            GridDensity out;
            out.support_right = double(cells) * step;
            out.values.assign(cells, 0.0);
            for (double a : mu.atoms) {
                long long j0 = std::llround(a / step);
                for (long long k = 0; k < width; ++k) out.values[std::size_t(j0 + k)] += height;
            }
            return out;
        }
    }

    // Fallback: proportional overlap onto a fine uniform grid.
    std::size_t cells = 4096;
    double step = top / double(cells);
    GridDensity out;
    out.support_right = top;
    out.values.assign(cells, 0.0);
    for (double a : mu.atoms) {
        double lo = a, hi = a + block;
        auto j0 = std::size_t(std::max(0.0, lo / step));
        auto j1 = std::min(cells - 1, std::size_t(hi / step));
        for (std::size_t j = j0; j <= j1; ++j) {
            double overlap = std::min(hi, double(j + 1) * step) - std::max(lo, double(j) * step);
            if (overlap > 0.0) out.values[j] += height * overlap / step;
        }
    }
    return out;
}

// Geometric tail of sum_{l >= (B+theta+1)N} (l^2/N^2 + 1)^{-N theta xi}.
inline double tail_sum_bound(double b, int n, double theta, double xi) {
    double expo = double(n) * theta * xi - 1.0;
    if (expo <= 0.0) throw std::invalid_argument("need N*theta*xi > 1");
    return (double(n) * M_PI / 2.0) * std::pow(b * b + 1.0, -expo);
}

// Smallest lattice cap L = ceil((B+theta+1)N) whose tail bound is below eps.
inline long long truncation_cap(int n, double theta, double xi, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    double expo = double(n) * theta * xi - 1.0;
    if (expo <= 0.0) throw std::invalid_argument("need N*theta*xi > 1");
    double b = std::sqrt(std::max(0.0, std::pow(double(n) * M_PI / (2.0 * eps), 1.0 / expo) - 1.0));
    return (long long)std::ceil((b + theta + 1.0) * double(n));
}

}  // namespace ensemble_lab
