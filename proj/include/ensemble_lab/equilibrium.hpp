#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ensemble_lab/grid_density.hpp"
#include "ensemble_lab/measures.hpp"
#include "ensemble_lab/quadrature.hpp"

namespace ensemble_lab {

// Second antiderivative of ln|z| normalized so that
// iint_{[a1,b1]x[a2,b2]} ln|x-y| = G(b1-a2) + G(a1-b2) - G(b1-b2) - G(a1-a2).
inline double log_biprimitive(double z) {
    if (z == 0.0) return 0.0;
    return z * z * (2.0 * std::log(std::fabs(z)) - 3.0) / 4.0;
}

inline double boxpair_log_integral(double a1, double b1, double a2, double b2) {
    return log_biprimitive(b1 - a2) + log_biprimitive(a1 - b2) - log_biprimitive(b1 - b2) -
           log_biprimitive(a1 - a2);
}

// First row of the symmetric Toeplitz matrix of cell-averaged -ln|x-y| values on an
// n-cell uniform grid of width h.  Entry m is exact for cells at lag m.
inline std::vector<double> neglog_kernel_row(std::size_t n, double h) {
    if (n == 0 || !(h > 0.0)) throw std::invalid_argument("need n >= 1 cells of positive width");
    std::vector<double> row(n);
    double log_h = std::log(h);
    row[0] = -(log_h - 1.5);
    if (n > 1) row[1] = -(log_h - 1.5 + 2.0 * std::log(2.0));
    for (std::size_t m = 2; m < n; ++m) {
        double dm = double(m);
        double curvature = std::log1p(-1.0 / (dm * dm));
        double psi = 0.5 * dm * dm * curvature + dm * std::log1p(2.0 / (dm - 1.0)) +
                     std::log(dm) + 0.5 * curvature;
        row[m] = -(log_h - 1.5 + psi);
    }
    return row;
}

namespace detail {

inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft length must be 2^k");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = (inverse ? two_pi : -two_pi) / double(len);
        std::complex<double> step(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto t = w * a[i + k + len / 2];
                a[i + k] = u + t;
                a[i + k + len / 2] = u - t;
                w *= step;
            }
        }
    }
    if (inverse)
        for (auto& z : a) z /= double(n);
}

}  // namespace detail

// Symmetric Toeplitz matvec; direct summation up to dense_limit, circulant FFT above.
struct ToeplitzOperator {
    static constexpr std::size_t dense_limit = 4096;

    std::size_t n = 0;
    std::vector<double> row;
    bool use_fft = false;
    std::vector<std::complex<double>> symbol;

    explicit ToeplitzOperator(std::vector<double> first_row, bool force_fft = false)
        : n(first_row.size()), row(std::move(first_row)) {
        if (n == 0) throw std::invalid_argument("empty kernel row");
        use_fft = force_fft || n > dense_limit;
        if (use_fft) {
            std::size_t len = 1;
            while (len < 2 * n) len <<= 1;
            symbol.assign(len, std::complex<double>(0.0, 0.0));
            for (std::size_t m = 0; m < n; ++m) symbol[m] = row[m];
            for (std::size_t m = 1; m < n; ++m) symbol[len - m] = row[m];
            detail::fft_radix2(symbol, false);
        }
    }

    void apply(const std::vector<double>& x, std::vector<double>& out) const {
        if (x.size() != n) throw std::invalid_argument("operator/vector size mismatch");
        out.assign(n, 0.0);
        if (!use_fft) {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    acc += row[j >= k ? j - k : k - j] * x[k];
                out[j] = acc;
            }
            return;
        }
        std::vector<std::complex<double>> work(symbol.size(), std::complex<double>(0.0, 0.0));
        for (std::size_t k = 0; k < n; ++k) work[k] = x[k];
        detail::fft_radix2(work, false);
        for (std::size_t k = 0; k < work.size(); ++k) work[k] *= symbol[k];
        detail::fft_radix2(work, true);
        for (std::size_t j = 0; j < n; ++j) out[j] = work[j].real();
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> out;
        apply(x, out);
        return out;
    }
};

// Discretized weighted energy: theta * phi^T K phi * h^2 + h * sum V(x_j) phi_j,
// with K the exact cell-averaged -ln|x-y| kernel and V the limiting potential.
inline double kernel_energy(const GridDensity& phi, const Potential& v, double theta) {
    phi.validate();
    if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
    if (!is_admissible(phi, theta, phi.support_right, 1e-6))
        throw std::invalid_argument("density is not admissible for this theta");
    const std::size_t n = phi.cells();
    const double h = phi.h();
    ToeplitzOperator op(neglog_kernel_row(n, h));
    std::vector<double> kphi = op.apply(phi.values);
    double quad = 0.0, pot = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        quad += phi.values[j] * kphi[j];
        pot += v.eval_limit((double(j) + 0.5) * h) * phi.values[j];
    }
    return theta * h * h * quad + h * pot;
}

struct EquilibriumSolution {
    GridDensity density;
    double energy = 0.0;
    double edge_left = 0.0;
    double edge_right = 0.0;
    double kappa = 0.0;
    std::vector<double> residuals;
    std::size_t iterations = 0;
};

class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& msg, EquilibriumSolution best)
        : std::runtime_error(msg), best_iterate(std::move(best)) {}

    EquilibriumSolution best_iterate;
};

namespace detail {

// Euclidean projection onto {0 <= phi <= cap, h * sum(phi) = 1}: bisect the shift mu in
// phi_j = clamp(y_j - mu, 0, cap), then resolve mu exactly on the fixed active pattern.
inline void waterfill_project(std::vector<double>& y, double cap, double h) {
    const std::size_t n = y.size();
    auto mass_at = [&](double mu) {
        double s = 0.0;
        for (double v : y) s += std::clamp(v - mu, 0.0, cap);
        return s * h;
    };
    double lo = *std::min_element(y.begin(), y.end()) - cap;
    double hi = *std::max_element(y.begin(), y.end());
    if (mass_at(lo) < 1.0 - 1e-12)
        throw std::invalid_argument("box constraints cannot carry unit mass");
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        double mid = 0.5 * (lo + hi);
        (mass_at(mid) >= 1.0 ? lo : hi) = mid;
    }
    double mu = 0.5 * (lo + hi);
    double free_sum = 0.0;
    std::size_t n_free = 0, n_cap = 0;
    for (std::size_t j = 0; j < n; ++j) {
        double p = y[j] - mu;
        if (p >= cap) ++n_cap;
        else if (p > 0.0) { free_sum += y[j]; ++n_free; }
    }
    if (n_free > 0) {
        double exact = (free_sum + cap * double(n_cap) - 1.0 / h) / double(n_free);
        if (std::fabs(mass_at(exact) - 1.0) <= std::fabs(mass_at(mu) - 1.0)) mu = exact;
    }
    for (std::size_t j = 0; j < n; ++j) y[j] = std::clamp(y[j] - mu, 0.0, cap);
}

}  // namespace detail

// Constrained equilibrium measure on [0, s]: projected gradient descent with
// Barzilai-Borwein steps and Armijo backtracking on the exact-cell energy.
inline EquilibriumSolution solve(const Potential& v, double theta, double s, std::size_t n_grid,
                                 std::size_t max_iters = 60000) {
    if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
    if (!(s >= theta)) throw std::invalid_argument("window must satisfy s >= theta");
    if (n_grid < 64) throw std::invalid_argument("need n_grid >= 64");
    if (v.family == PotentialFamily::tabulated) {
        auto bad = growth_violations(v);
        if (!bad.empty())
            throw std::invalid_argument("potential fails the growth envelope: " + bad.front());
    }
    if (s > v.domain_right() * (1.0 + 1e-12))
        throw std::invalid_argument("window exceeds the potential domain");

    const std::size_t n = n_grid;
    const double h = s / double(n);
    const double cap = 1.0 / theta;
    std::vector<double> pot(n);
    for (std::size_t j = 0; j < n; ++j) pot[j] = v.eval_limit((double(j) + 0.5) * h);
    ToeplitzOperator op(neglog_kernel_row(n, h));

    std::vector<double> phi(n, 1.0 / s), kphi, grad(n), trial, ktrial;
    op.apply(phi, kphi);
    auto energy_of = [&](const std::vector<double>& p, const std::vector<double>& kp) {
        double quad = 0.0, lin = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            quad += p[j] * kp[j];
            lin += pot[j] * p[j];
        }
        return theta * h * h * quad + h * lin;
    };
    double energy = energy_of(phi, kphi);

    double row_scale = 0.0;
    for (double r : op.row) row_scale = std::max(row_scale, std::fabs(r));
    double alpha = 1.0 / (2.0 * theta * h * h * row_scale * double(n) + 1.0);

    std::vector<double> prev_phi, prev_grad;
    std::vector<double> history;
    history.reserve(256);
    history.push_back(energy);
    bool converged = false;
    std::size_t iter = 0;
    for (; iter < max_iters && !converged; ++iter) {
        for (std::size_t j = 0; j < n; ++j)
            grad[j] = 2.0 * theta * h * h * kphi[j] + h * pot[j];
        if (!prev_phi.empty()) {
            double ss = 0.0, sy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double ds = phi[j] - prev_phi[j];
                ss += ds * ds;
                sy += ds * (grad[j] - prev_grad[j]);
            }
            alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : 1e12;
        }
        prev_phi = phi;
        prev_grad = grad;

        double step = alpha;
        double new_energy = energy;
        for (int back = 0; back < 60; ++back) {
            trial = prev_phi;
            for (std::size_t j = 0; j < n; ++j) trial[j] -= step * grad[j];
            detail::waterfill_project(trial, cap, h);
            op.apply(trial, ktrial);
            double cand = energy_of(trial, ktrial);
            double slope = 0.0;
            for (std::size_t j = 0; j < n; ++j) slope += grad[j] * (trial[j] - prev_phi[j]);
            if (cand <= energy + 1e-4 * slope) {
                new_energy = cand;
                break;
            }
            step *= 0.5;
        }
        phi.swap(trial);
        kphi.swap(ktrial);
        energy = new_energy;
        history.push_back(energy);
        if (history.size() > 50) {
            double before = history[history.size() - 51];
            if (before - energy < 1e-10 * (1.0 + std::fabs(energy))) converged = true;
        }
    }

    EquilibriumSolution sol;
    sol.density = GridDensity(s, phi);
    sol.energy = energy;
    sol.iterations = iter;

    std::vector<double> tvals(n);
    double mean_pot = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean_pot += pot[j] * phi[j];
    mean_pot *= h;
    for (std::size_t j = 0; j < n; ++j)
        tvals[j] = theta * h * kphi[j] + 0.5 * pot[j] + 0.5 * mean_pot;

    const double tau = 1e-4 * cap;
    std::vector<double> interior;
    for (std::size_t j = 0; j < n; ++j)
        if (phi[j] > tau && phi[j] < cap - tau) interior.push_back(tvals[j]);
    if (interior.empty())
        for (std::size_t j = 0; j < n; ++j)
            if (phi[j] > tau) interior.push_back(tvals[j]);
    if (interior.empty()) interior = tvals;
    std::nth_element(interior.begin(), interior.begin() + interior.size() / 2, interior.end());
    sol.kappa = interior[interior.size() / 2];

    sol.residuals.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        double gap = tvals[j] - sol.kappa;
        if (phi[j] <= tau) sol.residuals[j] = std::max(0.0, -gap);
        else if (phi[j] >= cap - tau) sol.residuals[j] = std::max(0.0, gap);
        else sol.residuals[j] = std::fabs(gap);
    }

    const double edge_tol = 1e-3 * cap;
    std::size_t first = n, last = n;
    for (std::size_t j = 0; j < n; ++j)
        if (phi[j] > edge_tol) {
            if (first == n) first = j;
            last = j;
        }
    sol.edge_left = first == n ? 0.0 : double(first) * h;
    sol.edge_right = last == n ? 0.0 : double(last + 1) * h;

    if (!converged) throw ConvergenceError("equilibrium solve did not converge", sol);
    return sol;
}

// Free-boundary problem: grow the window until the support edge detaches from it.
inline EquilibriumSolution solve_unbounded(const Potential& v, double theta, std::size_t n_grid,
                                           double* window_out = nullptr) {
    double right = v.domain_right();
    double s = std::min(right, 4.0 * theta);
    int stable = 0;
    EquilibriumSolution sol;
    for (int round = 0; round < 48; ++round) {
        sol = solve(v, theta, s, n_grid);
        if (sol.edge_right <= s - 2.0 * theta) ++stable;
        else stable = 0;
        bool pinned = s >= right * (1.0 - 1e-12);
        if (stable >= 2 || pinned) {
            if (window_out) *window_out = s;
            return sol;
        }
        s = std::min(right, 2.0 * s);
    }
    throw ConvergenceError("window growth did not stabilize", sol);
}

inline double arccot(double y) { return std::atan2(1.0, y); }

// Limit density of the bounded family: arccot profile between the soft edges,
// saturating at 1/theta outside them when m < theta.
inline double krawtchouk_density(double x, double m_rate, double theta) {
    if (!(m_rate > 0.0) || !(theta > 0.0)) throw std::invalid_argument("need m, theta > 0");
    if (x < 0.0) throw std::domain_error("x must be nonnegative");
    const double center = 0.5 * (m_rate + theta);
    const double r2 = m_rate * theta - (x - center) * (x - center);
    const double pi = 3.141592653589793238462643383279;
    if (r2 > 0.0) return arccot((m_rate - theta) / (2.0 * std::sqrt(r2))) / (theta * pi);
    if (m_rate >= theta) return 0.0;
    return x <= m_rate + theta ? 1.0 / theta : 0.0;
}

// Limit density of the unbounded family; plateau at 1/theta below the lower edge when t < 1.
inline double jack_density(double x, double t, double theta) {
    if (!(t > 0.0) || !(theta > 0.0)) throw std::invalid_argument("need t, theta > 0");
    if (x < 0.0) throw std::domain_error("x must be nonnegative");
    const double root = std::sqrt(t);
    const double lower = theta * (root - 1.0) * (root - 1.0);
    const double upper = theta * (root + 1.0) * (root + 1.0);
    const double shifted = x + theta * (t - 1.0);
    const double disc = 4.0 * theta * t * x - shifted * shifted;
    const double pi = 3.141592653589793238462643383279;
    if (x > lower && x < upper && disc > 0.0)
        return arccot(shifted / std::sqrt(disc)) / (theta * pi);
    if (t < 1.0 && x <= lower) return 1.0 / theta;
    return 0.0;
}

// Logarithmic-energy distance between two cell densities, via the exact double integral
// of -ln|x-y| against the signed difference on the merged breakpoint grid.
inline double d_metric(const GridDensity& nu, const GridDensity& rho) {
    nu.validate();
    rho.validate();
    std::vector<double> pts;
    pts.reserve(nu.cells() + rho.cells() + 2);
    for (std::size_t j = 0; j <= nu.cells(); ++j) pts.push_back(double(j) * nu.h());
    for (std::size_t j = 0; j <= rho.cells(); ++j) pts.push_back(double(j) * rho.h());
    std::sort(pts.begin(), pts.end());
    double scale = std::max(nu.support_right, rho.support_right);
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [&](double a, double b) { return std::fabs(a - b) <= 1e-12 * scale; }),
              pts.end());

    std::vector<double> lo, hi, delta;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double mid = 0.5 * (pts[i] + pts[i + 1]);
        double d = nu.value_at(mid) - rho.value_at(mid);
        if (d != 0.0) {
            lo.push_back(pts[i]);
            hi.push_back(pts[i + 1]);
            delta.push_back(d);
        }
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i)
        for (std::size_t j = 0; j < delta.size(); ++j)
            d2 -= delta[i] * delta[j] * boxpair_log_integral(lo[i], hi[i], lo[j], hi[j]);
    return std::sqrt(std::max(0.0, d2));
}

// Same distance through the spectral representation: int_0^inf |diff_hat(xi)|^2 / xi dxi,
// integrated in log-frequency.  Cross-check companion to d_metric.
inline double d_metric_fourier(const GridDensity& nu, const GridDensity& rho,
                               double xi_max = 4096.0) {
    nu.validate();
    rho.validate();
    auto hat_diff_sq = [&](double xi) {
        auto accumulate = [&](const GridDensity& g, double sign, double& re, double& im) {
            double h = g.h();
            double win = 2.0 * std::sin(0.5 * xi * h) / xi;
            for (std::size_t j = 0; j < g.cells(); ++j) {
                double c = (double(j) + 0.5) * h;
                re += sign * g.values[j] * win * std::cos(c * xi);
                im += sign * g.values[j] * win * std::sin(c * xi);
            }
        };
        double re = 0.0, im = 0.0;
        accumulate(nu, 1.0, re, im);
        accumulate(rho, -1.0, re, im);
        return re * re + im * im;
    };
    double u_min = std::log(1e-8), u_max = std::log(xi_max);
    const int panels = 256;
    double d2 = 0.0;
    for (int p = 0; p < panels; ++p) {
        double a = u_min + (u_max - u_min) * double(p) / panels;
        double b = u_min + (u_max - u_min) * double(p + 1) / panels;
        d2 += adaptive_simpson([&](double u) { return hat_diff_sq(std::exp(u)); }, a, b, 1e-9, 24);
    }
    return std::sqrt(std::max(0.0, d2));
}

// Squared-difference overlap int (g(x+u)-g(x))^2 dx for the piecewise-linear interpolant
// of uniformly spaced samples on [-R, R]; exact per merged segment.
inline double shift_overlap(const std::vector<double>& samples, double support_radius, double u) {
    const std::size_t n = samples.size() - 1;
    const double r = support_radius;
    const double step = 2.0 * r / double(n);
    auto eval = [&](double x) {
        if (x <= -r || x >= r) return 0.0;
        double pos = (x + r) / step;
        auto k = std::size_t(pos);
        if (k >= n) k = n - 1;
        double w = pos - double(k);
        return samples[k] * (1.0 - w) + samples[k + 1] * w;
    };
    std::vector<double> cuts;
    cuts.reserve(2 * n + 4);
    for (std::size_t k = 0; k <= n; ++k) {
        double node = -r + double(k) * step;
        cuts.push_back(node);
        cuts.push_back(node - u);
    }
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double a = std::max(cuts[i], -r - u), b = std::min(cuts[i + 1], r);
        if (b <= a) continue;
        double m = 0.5 * (a + b);
        auto f = [&](double x) {
            double d = eval(x + u) - eval(x);
            return d * d;
        };
        acc += (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    }
    return acc;
}

// Gagliardo seminorm of the interpolant: 2 * int_0^inf u^-2 * shift_overlap(u) du with the
// near-zero and disjoint-support pieces handled in closed form.
inline double gagliardo_seminorm(const std::vector<double>& samples, double support_radius) {
    if (samples.size() < 2 || !(support_radius > 0.0))
        throw std::invalid_argument("need >= 2 samples on positive support radius");
    if (samples.front() != 0.0 || samples.back() != 0.0)
        throw std::invalid_argument("samples must vanish at the support boundary");
    const std::size_t n = samples.size() - 1;
    const double r = support_radius;
    const double step = 2.0 * r / double(n);
    double slope_sq = 0.0, l2 = 0.0;
    bool flat = true;
    for (std::size_t k = 0; k < n; ++k) {
        double sl = (samples[k + 1] - samples[k]) / step;
        slope_sq += sl * sl * step;
        l2 += step / 6.0 *
              (samples[k] * samples[k] + 4.0 * 0.25 * (samples[k] + samples[k + 1]) *
               (samples[k] + samples[k + 1]) + samples[k + 1] * samples[k + 1]);
        if (samples[k] != 0.0 || samples[k + 1] != 0.0) flat = false;
    }
    if (flat) return 0.0;
    const double eps = 1e-7 * r;
    double middle = adaptive_simpson(
        [&](double u) { return shift_overlap(samples, r, u) / (u * u); }, eps, 2.0 * r, 1e-10, 32);
    return 2.0 * (slope_sq * eps + middle + l2 / r);
}

// Half-order Sobolev seminorm of a sampled compactly supported Lipschitz function.
inline double half_norm(const std::vector<double>& samples, double support_radius) {
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(gagliardo_seminorm(samples, support_radius) / two_pi);
}

}  // namespace ensemble_lab
