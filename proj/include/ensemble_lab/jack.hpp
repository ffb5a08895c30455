#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ensemble_lab/specfun.hpp"

namespace ensemble_lab {

using Partition = std::vector<long long>;

inline Partition trim_partition(Partition lambda) {
    while (!lambda.empty() && lambda.back() == 0) lambda.pop_back();
    for (std::size_t i = 0; i + 1 < lambda.size(); ++i)
        if (lambda[i] < lambda[i + 1]) throw std::invalid_argument("partition rows must decrease");
    if (!lambda.empty() && lambda.back() < 0) throw std::invalid_argument("negative row");
    return lambda;
}

inline Partition conjugate(const Partition& lambda_in) {
    Partition lambda = trim_partition(lambda_in);
    Partition out;
    if (lambda.empty()) return out;
    out.resize(std::size_t(lambda[0]), 0);
    for (long long col = 1; col <= lambda[0]; ++col)
        for (const auto row : lambda) out[std::size_t(col - 1)] += row >= col ? 1 : 0;
    return out;
}

inline long long partition_weight(const Partition& lambda) {
    long long w = 0;
    for (long long r : lambda) w += r;
    return w;
}

struct Specialization {
    std::vector<double> alphas;  // weakly decreasing, nonnegative
    std::vector<double> betas;   // weakly decreasing, nonnegative
    double gamma = 0.0;

    static Specialization pure_alpha(int n) {
        Specialization s;
        s.alphas.assign(std::size_t(n), 1.0);
        return s;
    }
    static Specialization pure_beta(int m) {
        Specialization s;
        s.betas.assign(std::size_t(m), 1.0);
        return s;
    }
    static Specialization plancherel(double s_param) {
        Specialization s;
        s.gamma = s_param;
        return s;
    }
};

inline double power_sum(const Specialization& s, int k, double theta) {
    if (k < 1) throw std::invalid_argument("need k >= 1");
    if (k == 1) {
        double acc = s.gamma;
        for (double a : s.alphas) acc += a;
        for (double b : s.betas) acc += b;
        return acc;
    }
    double acc = 0.0;
    for (double a : s.alphas) acc += std::pow(a, k);
    double bsum = 0.0;
    for (double b : s.betas) bsum += std::pow(b, k);
    return acc + std::pow(-theta, k - 1) * bsum;
}

// Jack polynomial at n equal arguments, box-product form:
// prod over boxes of (n theta + coarm - theta coleg) / (arm + theta leg + theta).
inline LogValue log_jack_one_n_box(const Partition& lambda_in, int n, double theta) {
    Partition lambda = trim_partition(lambda_in);
    Partition conj = conjugate(lambda);
    double acc = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i)
        for (long long j = 1; j <= lambda[i]; ++j) {
            double num = double(n) * theta + double(j - 1) - theta * double(i);
            if (num == 0.0 || num < 0.0) {
                if (num == 0.0) return LogValue::exact_zero();
                throw std::domain_error("negative box factor");
            }
            double arm = double(lambda[i] - j);
            double leg = double(conj[std::size_t(j - 1)]) - double(i + 1);
            acc += std::log(num) - std::log(arm + theta * leg + theta);
        }
    return LogValue::from_log(acc);
}

// Same value through gamma functions on the shifted lattice l_i = lambda_i + (n-i) theta.
inline LogValue log_jack_one_n(const Partition& lambda_in, int n, double theta) {
    Partition lambda = trim_partition(lambda_in);
    if (int(lambda.size()) > n) return LogValue::exact_zero();
    lambda.resize(std::size_t(n), 0);
    double acc = 0.0;
    for (int i = 1; i <= n; ++i) acc += log_gamma(theta) - log_gamma(double(i) * theta);
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j) {
            double d = double(lambda[i - 1] - lambda[j - 1]) + double(j - i) * theta;
            acc += log_gamma(d + theta) - log_gamma(d);
        }
    return LogValue::from_log(acc);
}

// Dual Jack with Plancherel specialization, box form: prod sθ/(arm + θ leg + 1).
inline LogValue log_dual_jack_plancherel_box(const Partition& lambda_in, double s, double theta) {
    Partition lambda = trim_partition(lambda_in);
    Partition conj = conjugate(lambda);
    double acc = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i)
        for (long long j = 1; j <= lambda[i]; ++j) {
            double arm = double(lambda[i] - j);
            double leg = double(conj[std::size_t(j - 1)]) - double(i + 1);
            acc += std::log(s * theta) - std::log(arm + theta * leg + 1.0);
        }
    return LogValue::from_log(acc);
}

// Gamma form of the same value; the (sθ) prefactor exponent θ n(n-1)/2 cancels the
// lattice part of sum l_i, leaving (sθ)^{|lambda|} overall.
inline LogValue log_dual_jack_plancherel(const Partition& lambda_in, double s, double theta) {
    Partition lambda = trim_partition(lambda_in);
    int n = int(lambda.size());
    double acc = -theta * 0.5 * double(n) * double(n - 1) * std::log(s * theta);
    for (int i = 1; i <= n; ++i) {
        double li = double(lambda[i - 1]) + double(n - i) * theta;
        acc += li * std::log(s * theta) - log_gamma(li + 1.0);
        for (int j = i + 1; j <= n; ++j) {
            double d = double(lambda[i - 1] - lambda[j - 1]) + double(j - i) * theta;
            acc += log_gamma(d + 1.0) - log_gamma(d + 1.0 - theta);
        }
    }
    return LogValue::from_log(acc);
}

// Dual-Jack correction: J~ = J * prod (arm + θ leg + θ)/(arm + θ leg + 1).
inline LogValue log_dual_correction(const Partition& lambda_in, double theta) {
    Partition lambda = trim_partition(lambda_in);
    Partition conj = conjugate(lambda);
    double acc = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i)
        for (long long j = 1; j <= lambda[i]; ++j) {
            double hook = double(lambda[i] - j) +
                          theta * (double(conj[std::size_t(j - 1)]) - double(i + 1));
            acc += std::log(hook + theta) - std::log(hook + 1.0);
        }
    return LogValue::from_log(acc);
}

// Dual Jack in m unit beta variables via conjugation duality, carrying the
// θ^{|lambda|} weight that the beta power sums p_k = (-θ)^{k-1} m dictate.
inline LogValue log_dual_jack_pure_beta_box(const Partition& lambda_in, long long m,
                                            double theta) {
    Partition lambda = trim_partition(lambda_in);
    if (!lambda.empty() && lambda[0] > m) return LogValue::exact_zero();
    LogValue dual = log_jack_one_n_box(conjugate(lambda), int(m), 1.0 / theta);
    if (dual.zero) return dual;
    return LogValue::from_log(double(partition_weight(lambda)) * std::log(theta) + dual.log);
}

inline LogValue log_dual_jack_pure_beta(const Partition& lambda_in, long long m, double theta) {
    Partition lambda = trim_partition(lambda_in);
    if (!lambda.empty() && lambda[0] > m) return LogValue::exact_zero();
    int n = int(lambda.size());
    double acc = double(partition_weight(lambda)) * std::log(theta);
    for (int i = 1; i <= n; ++i) {
        double li = double(lambda[i - 1]) + double(n - i) * theta;
        acc += log_gamma(double(m) + theta * double(i - 1) + 1.0) - log_gamma(li + 1.0) -
               log_gamma(double(m) + double(n) * theta - li + 1.0 - theta);
        for (int j = i + 1; j <= n; ++j) {
            double d = double(lambda[i - 1] - lambda[j - 1]) + double(j - i) * theta;
            acc += log_gamma(d + 1.0) - log_gamma(d + 1.0 - theta);
        }
    }
    return LogValue::from_log(acc);
}

// Cauchy kernel H for rho1 = n unit alpha variables against a general rho2.
inline LogValue log_normalization(int n, const Specialization& rho2, double theta) {
    double acc = double(n) * theta * rho2.gamma;
    for (double b : rho2.betas) acc += double(n) * std::log1p(theta * b);
    for (double a : rho2.alphas) {
        if (a >= 1.0) throw std::domain_error("alpha variable >= 1 diverges against 1^n");
        acc -= double(n) * theta * std::log1p(-a);
    }
    return LogValue::from_log(acc);
}

template <class F>
inline void for_each_partition_bounded(int max_rows, long long max_weight, F&& visit) {
    Partition current;
    auto rec = [&](auto&& self, long long largest, long long remaining) -> void {
        visit(const_cast<const Partition&>(current));
        if (int(current.size()) >= max_rows) return;
        long long top = std::min(largest, remaining);
        for (long long part = 1; part <= top; ++part) {
            current.push_back(part);
            self(self, part, remaining - part);
            current.pop_back();
        }
    };
    rec(rec, max_weight, max_weight);
}

// Smallest weight cutoff whose Poisson-series tail beyond it is below eps.
inline long long plancherel_truncation_level(int n, double s, double theta, double eps) {
    double rate = theta * s * double(n);
    double term = 1.0;  // rate^0/0!
    double tail = std::exp(rate);
    long long level = 0;
    while (true) {
        tail -= term;
        if (tail < eps * std::exp(rate) * 1e-2 || level > 100000) return level;
        ++level;
        term *= rate / double(level);
    }
}

enum class CauchyFamily { pure_beta, plancherel_truncated };

// |sum_lambda J(rho1) J~(rho2) / H - 1| by exact enumeration.
inline double verify_cauchy_sum(int n, double m_or_s, double theta, CauchyFamily family,
                                long long budget = 10'000'000) {
    if (n < 1) throw std::invalid_argument("need n >= 1");
    double total = 0.0;
    if (family == CauchyFamily::pure_beta) {
        auto m = (long long)m_or_s;
        double log_h = double(n) * double(m) * std::log1p(theta);
        __int128 count = 1;
        for (int k = 1; k <= n; ++k) count = count * (m + k) / k;
        if (count > budget) throw std::runtime_error("state space exceeds budget");
        for_each_partition_bounded(n, m * n, [&](const Partition& lam) {
            if (!lam.empty() && lam[0] > m) return;
            LogValue a = log_jack_one_n(lam, n, theta);
            LogValue b = log_dual_jack_pure_beta(lam, m, theta);
            if (!a.zero && !b.zero) total += std::exp(a.log + b.log - log_h);
        });
    } else {
        double s = m_or_s;
        double log_h = theta * s * double(n);
        long long level = plancherel_truncation_level(n, s, theta, 1e-10);
        for_each_partition_bounded(n, level, [&](const Partition& lam) {
            LogValue a = log_jack_one_n(lam, n, theta);
            LogValue b = log_dual_jack_plancherel(lam, s, theta);
            if (!a.zero && !b.zero) total += std::exp(a.log + b.log - log_h);
        });
    }
    return std::fabs(total - 1.0);
}

}  // namespace ensemble_lab
