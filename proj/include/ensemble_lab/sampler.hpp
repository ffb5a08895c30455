#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ensemble_lab/measures.hpp"
#include "ensemble_lab/statespace.hpp"

namespace ensemble_lab {

// Counter-mixing 64-bit generator. Stream derivation rule: chain c draws from a
// generator seeded with mix64(seed ^ (c+1) * 0x9e3779b97f4a7c15), so streams are
// deterministic, platform independent, and distinct per chain.
struct SplitMix64 {
    std::uint64_t state = 0;

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    explicit SplitMix64(std::uint64_t s) : state(s) {}

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        return mix64(state);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound) by the multiply-shift map; deterministic across
    // platforms, bias below 2^-64 times bound.
    std::uint64_t below(std::uint64_t bound) {
        return std::uint64_t((unsigned __int128)(next()) * bound >> 64);
    }
};

inline SplitMix64 chain_stream(std::uint64_t seed, std::uint64_t chain) {
    return SplitMix64(SplitMix64::mix64(seed ^ (chain + 1) * 0x9e3779b97f4a7c15ULL));
}

inline constexpr std::uint64_t fnv_offset = 14695981039346656037ULL;
inline constexpr std::uint64_t fnv_prime = 1099511628211ULL;

inline std::uint64_t fnv1a_accumulate(std::uint64_t hash, std::uint64_t word) {
    for (int byte = 0; byte < 8; ++byte) {
        hash ^= (word >> (8 * byte)) & 0xffULL;
        hash *= fnv_prime;
    }
    return hash;
}

// Row cap that keeps every particle inside the sampler's reachable window. Bounded
// families use their own cap; unbounded ones combine the summable-tail truncation with
// headroom past the equilibrium edge (and past any event threshold of interest).
inline long long sampling_cap(const EnsembleSpec& spec, double event_reach = 0.0) {
    if (spec.cap != unbounded_cap) return spec.cap;
    const Potential& v = spec.potential;
    double nn = double(spec.n);
    if (v.family == PotentialFamily::tabulated)
        return (long long)std::floor(nn * v.domain_right() - (nn - 1.0) * spec.theta);
    double edge = spec.theta * (std::sqrt(v.t) + 1.0) * (std::sqrt(v.t) + 1.0);
    double reach = std::max(edge, event_reach) + spec.theta + 1.0;
    long long cap = (long long)std::ceil(nn * reach);
    if (double(spec.n) * spec.theta * v.xi > 1.0)
        cap = std::max(cap, truncation_cap(spec.n, spec.theta, v.xi, 1e-10));
    return cap;
}

// Single-site +-1 Metropolis kernel with tabulated interaction and potential factors, so
// one step costs O(n) lookups; gaps are always formed as d + k*theta, which makes the
// tabulated and direct paths bit-identical and the log-ratio exactly antisymmetric.
class MhSampler {
  public:
    MhSampler(EnsembleSpec spec, double event_reach = 0.0)
        : spec_(std::move(spec)), cap_(sampling_cap(spec_, event_reach)) {
        spec_.validate();
        if (cap_ < 0) throw std::invalid_argument("sampler cap must be nonnegative");
        const auto rows = std::uint64_t(cap_ + 1);
        if (rows * std::uint64_t(spec_.n) <= 10'000'000ULL) {
            tabulated_ = true;
            logq_.resize(std::size_t(rows) * std::size_t(std::max(1, spec_.n - 1)));
            for (long long d = 0; d <= cap_; ++d)
                for (int k = 1; k < spec_.n; ++k)
                    logq_[std::size_t(d) * std::size_t(spec_.n - 1) + std::size_t(k - 1)] =
                        log_interaction(spec_, gap_of(d, k));
            npot_.resize(std::size_t(rows) * std::size_t(spec_.n));
            for (long long lam = 0; lam <= cap_; ++lam)
                for (int k = 0; k < spec_.n; ++k)
                    npot_[std::size_t(lam) * std::size_t(spec_.n) + std::size_t(k)] =
                        potential_term(lam, k);
        }
    }

    const EnsembleSpec& spec() const { return spec_; }
    long long cap() const { return cap_; }

    Configuration initial_state(const std::vector<long long>& lambda) const {
        if (lambda.empty())
            return from_partition(std::vector<long long>(std::size_t(spec_.n), 0), spec_.theta,
                                  cap_);
        auto c = from_partition(lambda, spec_.theta, cap_);
        if (c.n != spec_.n) throw std::invalid_argument("initial state has wrong particle count");
        return c;
    }

    // Whether raising/lowering row i (0-based) by delta keeps a valid capped partition.
    bool proposal_valid(const Configuration& c, int i, int delta) const {
        long long next = c.lambda[std::size_t(i)] + delta;
        if (next < 0 || next > cap_) return false;
        if (delta > 0) return i == 0 || c.lambda[std::size_t(i - 1)] >= next;
        return i + 1 == spec_.n || next >= c.lambda[std::size_t(i + 1)];
    }

    // ln of the acceptance ratio for the move lambda_i -> lambda_i + delta: the O(n)
    // incremental form of the full weight ratio.
    double log_ratio(const Configuration& c, int i, int delta) const {
        if (!proposal_valid(c, i, delta))
            throw std::invalid_argument("log ratio of an off-lattice proposal");
        const long long lam = c.lambda[std::size_t(i)];
        const long long lam_next = lam + delta;
        double acc = 0.0;
        for (int j = 0; j < spec_.n; ++j) {
            if (j == i) continue;
            long long d_old, d_new;
            int k = std::abs(i - j);
            if (j < i) {
                d_old = c.lambda[std::size_t(j)] - lam;
                d_new = c.lambda[std::size_t(j)] - lam_next;
            } else {
                d_old = lam - c.lambda[std::size_t(j)];
                d_new = lam_next - c.lambda[std::size_t(j)];
            }
            acc += logq_at(d_new, k) - logq_at(d_old, k);
        }
        acc -= npot_at(lam_next, spec_.n - 1 - i) - npot_at(lam, spec_.n - 1 - i);
        return acc;
    }

    // One proposal; mutates the state in place and reports whether it was accepted.
    bool step(Configuration& c, SplitMix64& rng) const {
        int i = int(rng.below(std::uint64_t(spec_.n)));
        int delta = rng.below(2) == 0 ? 1 : -1;
        if (!proposal_valid(c, i, delta)) return false;
        double lr = log_ratio(c, i, delta);
        if (lr < 0.0 && rng.uniform01() >= std::exp(lr)) return false;
        c.lambda[std::size_t(i)] += delta;
        return true;
    }

  private:
    double gap_of(long long d, int k) const { return double(d) + double(k) * spec_.theta; }

    double potential_term(long long lam, int k) const {
        double nn = double(spec_.n);
        double x = (double(lam) + double(k) * spec_.theta) / nn;
        return nn * spec_.potential.eval_finite_n(spec_.n, x);
    }

    double logq_at(long long d, int k) const {
        if (tabulated_)
            return logq_[std::size_t(d) * std::size_t(spec_.n - 1) + std::size_t(k - 1)];
        return log_interaction(spec_, gap_of(d, k));
    }

    double npot_at(long long lam, int k) const {
        if (tabulated_) return npot_[std::size_t(lam) * std::size_t(spec_.n) + std::size_t(k)];
        return potential_term(lam, k);
    }

    EnsembleSpec spec_;
    long long cap_ = 0;
    bool tabulated_ = false;
    std::vector<double> logq_;
    std::vector<double> npot_;
};

// One Metropolis proposal from the given state; returns the (possibly unchanged) state.
inline Configuration mh_step(const Configuration& state, const EnsembleSpec& spec,
                             SplitMix64& rng) {
    MhSampler sampler(spec);
    Configuration c = state;
    c.cap = sampler.cap();
    c.validate();
    sampler.step(c, rng);
    return c;
}

struct ChainConfig {
    EnsembleSpec spec;
    std::uint64_t steps = 0;
    std::uint64_t burn_in = 0;
    std::uint64_t thin = 1;
    std::uint64_t seed = 1;
    unsigned chains = 1;
    std::vector<long long> init_lambda;  // empty = zero partition

    void validate() const {
        spec.validate();
        if (steps <= burn_in) throw std::invalid_argument("need steps > burn_in");
        if (thin == 0) throw std::invalid_argument("need thin >= 1");
        if (chains == 0) throw std::invalid_argument("need at least one chain");
    }
};

struct ChainSummary {
    std::uint64_t digest = fnv_offset;  // FNV-1a over every retained lambda sequence
    std::uint64_t retained = 0;
    std::uint64_t accepted = 0;
    std::uint64_t proposed = 0;
    long long truncation_used = unbounded_cap;
};

// Runs the configured chains sequentially, invoking visit(chain, configuration) on each
// retained sample. Deterministic given cfg.seed, chain by chain.
template <class Visit>
ChainSummary run_chain(const ChainConfig& cfg, Visit&& visit) {
    cfg.validate();
    MhSampler sampler(cfg.spec);
    ChainSummary out;
    out.truncation_used = sampler.cap();
    for (unsigned chain = 0; chain < cfg.chains; ++chain) {
        auto rng = chain_stream(cfg.seed, chain);
        Configuration c = sampler.initial_state(cfg.init_lambda);
        for (std::uint64_t s = 0; s < cfg.steps; ++s) {
            out.accepted += sampler.step(c, rng) ? 1 : 0;
            ++out.proposed;
            if (s >= cfg.burn_in && (s - cfg.burn_in) % cfg.thin == 0) {
                ++out.retained;
                for (long long lam : c.lambda)
                    out.digest = fnv1a_accumulate(out.digest, std::uint64_t(lam));
                visit(chain, const_cast<const Configuration&>(c));
            }
        }
    }
    return out;
}

enum class TailSide { upper, lower };

struct TailEstimate {
    double threshold = 0.0;
    double p_hat = 0.0;
    double std_error = 0.0;
    std::uint64_t n_effective = 0;
    bool rule_of_three = false;   // no hits: p_hat = 0 and upper_bound is the 95% bound
    double upper_bound = 0.0;
    long long truncation_used = unbounded_cap;
};

namespace detail {

inline unsigned worker_count(unsigned chains) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ENSEMBLE_LAB_THREADS")) {
        long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) hw = unsigned(parsed);
    }
    return std::min(hw, chains);
}

struct TailChainStats {
    std::uint64_t hits = 0;
    std::uint64_t used = 0;
    std::vector<double> batch_means;
};

}  // namespace detail

// Plain Monte Carlo estimate of P(l_1 >= t*n) or P(l_1 <= t*n) with batch-means errors;
// chains run in parallel (capped by ENSEMBLE_LAB_THREADS) and reduce deterministically.
inline TailEstimate estimate_tail(const ChainConfig& cfg, double t, TailSide side) {
    cfg.validate();
    MhSampler sampler(cfg.spec, side == TailSide::upper ? t : 0.0);
    const double wall = t * double(cfg.spec.n);
    const std::uint64_t per_chain = (cfg.steps - cfg.burn_in - 1) / cfg.thin + 1;

    std::vector<detail::TailChainStats> stats(cfg.chains);
    auto run_one = [&](unsigned chain) {
        auto rng = chain_stream(cfg.seed, chain);
        Configuration c = sampler.initial_state(cfg.init_lambda);
        std::vector<std::uint8_t> indicator;
        indicator.reserve(std::size_t(per_chain));
        for (std::uint64_t s = 0; s < cfg.steps; ++s) {
            sampler.step(c, rng);
            if (s >= cfg.burn_in && (s - cfg.burn_in) % cfg.thin == 0) {
                double top = c.position(1);
                bool hit = side == TailSide::upper ? top >= wall : top <= wall;
                indicator.push_back(hit ? 1 : 0);
            }
        }
        auto& st = stats[chain];
        std::uint64_t r = indicator.size();
        std::uint64_t batches = r >= 64 ? 32 : std::max<std::uint64_t>(2, r / 2);
        std::uint64_t len = std::max<std::uint64_t>(1, r / batches);
        st.used = len * batches;
        for (std::uint64_t b = 0; b < batches; ++b) {
            std::uint64_t s = 0;
            for (std::uint64_t k = 0; k < len; ++k) s += indicator[std::size_t(b * len + k)];
            st.batch_means.push_back(double(s) / double(len));
            st.hits += s;
        }
    };

    unsigned workers = detail::worker_count(cfg.chains);
    if (workers <= 1) {
        for (unsigned chain = 0; chain < cfg.chains; ++chain) run_one(chain);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (unsigned chain = w; chain < cfg.chains; chain += workers) run_one(chain);
            });
        for (auto& th : pool) th.join();
    }

    TailEstimate est;
    est.threshold = t;
    est.truncation_used = sampler.cap();
    std::uint64_t hits = 0, used = 0;
    std::vector<double> means;
    for (const auto& st : stats) {
        hits += st.hits;
        used += st.used;
        means.insert(means.end(), st.batch_means.begin(), st.batch_means.end());
    }
    est.n_effective = used;
    est.p_hat = used ? double(hits) / double(used) : 0.0;
    double ss = 0.0;
    for (double m : means) ss += (m - est.p_hat) * (m - est.p_hat);
    if (means.size() > 1)
        est.std_error = std::sqrt(ss / (double(means.size()) * double(means.size() - 1)));
    if (hits == 0 && used > 0) {
        est.rule_of_three = true;
        est.upper_bound = 3.0 / double(used);
    }
    return est;
}

}  // namespace ensemble_lab
