#pragma once

// Command-line front end: equilibrium densities, tail rate functions, Markov
// chain sampling, exact enumeration, and built-in self-verification.  Every
// command that produces files also writes a run manifest (effective config,
// library version, timestamps, and FNV-1a digests of each output) so a run
// can be reproduced and checked byte for byte.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "equilibrium.hpp"
#include "jack.hpp"
#include "measures.hpp"
#include "rates.hpp"
#include "sampler.hpp"
#include "specfun.hpp"
#include "statespace.hpp"
#include "version.hpp"

namespace ensemble_lab {
namespace cli {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Formatting and file helpers
// ---------------------------------------------------------------------------

// Decimal rendering with 17 significant digits: round-trips any double.
inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline uint64_t fnv1a_bytes(const std::string& data) {
    uint64_t hash = fnv_offset;
    for (unsigned char c : data) {
        hash ^= uint64_t(c);
        hash *= fnv_prime;
    }
    return hash;
}

struct OutputRecord {
    std::string file;
    std::string schema;
    uint64_t bytes = 0;
    uint64_t fnv64 = 0;
};

inline void write_binary_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os.write(content.data(), std::streamsize(content.size()));
    if (!os) throw std::runtime_error("short write: " + path.string());
}

inline OutputRecord emit_file(const std::filesystem::path& path, const std::string& schema,
                              const std::string& content, std::vector<OutputRecord>& outputs) {
    write_binary_file(path, content);
    OutputRecord rec{path.filename().string(), schema, content.size(), fnv1a_bytes(content)};
    outputs.push_back(rec);
    return rec;
}

inline void write_manifest(const std::string& prefix, const std::string& command,
                           const json& config, const std::vector<OutputRecord>& outputs) {
    json m;
    m["schema"] = "manifest.v1";
    m["command"] = command;
    m["library_version"] = library_version;
    m["created_unix"] = (long long)std::time(nullptr);
    m["config"] = config;
    m["outputs"] = json::array();
    for (const auto& rec : outputs) {
        json o;
        o["file"] = rec.file;
        o["schema"] = rec.schema;
        o["bytes"] = rec.bytes;
        o["fnv64"] = std::to_string(rec.fnv64);
        m["outputs"].push_back(o);
    }
    write_binary_file(std::filesystem::path(prefix + "_manifest.json"), m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Config file support: flags > JSON config file > built-in defaults.
// A config file is a flat JSON object keyed by long option names; a manifest
// file is also accepted (its "config" member is used).  Values from the file
// are injected as synthetic flags unless the user passed the flag explicitly.
// ---------------------------------------------------------------------------

inline bool args_contain_flag(const std::vector<std::string>& args, const std::string& key) {
    const std::string plain = "--" + key;
    const std::string assigned = plain + "=";
    for (const auto& a : args) {
        if (a == plain || a.rfind(assigned, 0) == 0) return true;
    }
    return false;
}

inline void apply_config_file(std::vector<std::string>& args) {
    std::string path;
    std::size_t insert_at = args.size();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            insert_at = i + 2;
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            insert_at = i + 1;
            break;
        }
    }
    if (path.empty()) return;
    std::ifstream is(path);
    if (!is) throw CLI::ValidationError("--config", "cannot read config file: " + path);
    json cfg;
    try {
        is >> cfg;
    } catch (const std::exception& e) {
        throw CLI::ValidationError("--config", "invalid JSON in " + path + ": " + e.what());
    }
    if (cfg.contains("config") && cfg["config"].is_object()) cfg = cfg["config"];
    if (!cfg.is_object()) throw CLI::ValidationError("--config", "config must be a JSON object");
    std::vector<std::string> injected;
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        const std::string& key = it.key();
        if (key == "config" || args_contain_flag(args, key)) continue;
        const json& v = it.value();
        if (v.is_boolean()) {
            if (v.get<bool>()) injected.push_back("--" + key);
        } else if (v.is_number() || v.is_string()) {
            injected.push_back("--" + key);
            injected.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
    }
    args.insert(args.begin() + std::ptrdiff_t(insert_at), injected.begin(), injected.end());
}

// ---------------------------------------------------------------------------
// Potential construction shared by equilibrium and rate commands
// ---------------------------------------------------------------------------

struct PotentialChoice {
    std::string family;  // "krawtchouk", "jack", or "tabulated"
    double m_rate = 0.0;
    double t = 0.0;
    double theta = 1.0;
    std::string potential_file;
};

inline Potential build_potential(const PotentialChoice& pc) {
    if (!pc.potential_file.empty()) {
        std::ifstream is(pc.potential_file);
        if (!is) throw std::invalid_argument("cannot read potential file: " + pc.potential_file);
        try {
            json p;
            is >> p;
            std::vector<double> x = p.at("x").get<std::vector<double>>();
            std::vector<double> v = p.at("v").get<std::vector<double>>();
            std::vector<double> slope = p.at("slope").get<std::vector<double>>();
            double xi = p.value("xi", 0.0);
            return tabulated_potential(x, v, slope, pc.theta, xi);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw std::invalid_argument("bad potential file " + pc.potential_file + ": " +
                                        e.what());
        }
    }
    if (pc.family == "krawtchouk") {
        if (!(pc.m_rate > 0.0)) throw std::invalid_argument("krawtchouk needs --m > 0");
        return krawtchouk_potential(pc.m_rate, pc.theta);
    }
    if (pc.family == "jack") {
        if (!(pc.t > 0.0)) throw std::invalid_argument("jack needs --t > 0");
        return jack_potential(pc.t, pc.theta);
    }
    throw std::invalid_argument("choose --family krawtchouk|jack or --potential-file");
}

inline double closed_form_density(const PotentialChoice& pc, double x) {
    if (pc.family == "krawtchouk") return krawtchouk_density(x, pc.m_rate, pc.theta);
    if (pc.family == "jack") return jack_density(x, pc.t, pc.theta);
    return std::numeric_limits<double>::quiet_NaN();
}

inline json potential_config(const PotentialChoice& pc) {
    json c;
    c["family"] = pc.family;
    c["theta"] = pc.theta;
    if (pc.family == "krawtchouk") c["m"] = pc.m_rate;
    if (pc.family == "jack") c["t"] = pc.t;
    if (!pc.potential_file.empty()) c["potential-file"] = pc.potential_file;
    return c;
}

// ---------------------------------------------------------------------------
// equilibrium: solve the constrained minimization and emit the density curve
// ---------------------------------------------------------------------------

struct EquilibriumArgs {
    PotentialChoice pc;
    int grid = 1024;
    double window = 0.0;  // 0 = automatic
    std::string output = "equilibrium";
    bool print_json = false;
};

inline int cmd_equilibrium(const EquilibriumArgs& a, std::ostream& out, std::ostream& err) {
    Potential v = build_potential(a.pc);
    json config = potential_config(a.pc);
    config["grid"] = a.grid;
    config["window"] = a.window;
    config["output"] = a.output;

    EquilibriumSolution sol;
    try {
        if (a.window > 0.0) {
            sol = solve(v, a.pc.theta, a.window, a.grid);
        } else if (std::isfinite(v.domain_right())) {
            sol = solve(v, a.pc.theta, v.domain_right(), a.grid);
        } else {
            sol = solve_unbounded(v, a.pc.theta, a.grid);
        }
    } catch (const ConvergenceError& e) {
        json diag;
        diag["schema"] = "diagnostic.v1";
        diag["command"] = "equilibrium";
        diag["error"] = e.what();
        diag["config"] = config;
        const EquilibriumSolution& best = e.best_iterate;
        diag["best_energy"] = best.energy;
        diag["best_edges"] = {best.edge_left, best.edge_right};
        diag["iterations"] = best.iterations;
        write_binary_file(std::filesystem::path(a.output + "_diagnostic.json"), diag.dump(2) + "\n");
        err << "equilibrium failed to converge: " << e.what() << "\n";
        return 1;
    }

    const auto& phi = sol.density.values;
    const double h = sol.density.h();
    double res_max = 0.0, res_sum = 0.0;
    for (double r : sol.residuals) {
        res_max = std::max(res_max, std::fabs(r));
        res_sum += std::fabs(r);
    }
    const double res_mean = sol.residuals.empty() ? 0.0 : res_sum / double(sol.residuals.size());

    std::ostringstream csv;
    csv << "x,phi_numeric,phi_closed_form,residual\n";
    json rows = json::array();
    for (std::size_t j = 0; j < phi.size(); ++j) {
        const double x = (double(j) + 0.5) * h;
        const double closed = closed_form_density(a.pc, x);
        const double resid = j < sol.residuals.size() ? sol.residuals[j] : 0.0;
        csv << fmt17(x) << ',' << fmt17(phi[j]) << ',' << fmt17(closed) << ',' << fmt17(resid)
            << '\n';
        rows.push_back({x, phi[j], closed, resid});
    }

    json summary;
    summary["schema"] = "equilibrium.v1";
    summary["csv_schema"] = "equilibrium-density.v1";
    summary["config"] = config;
    summary["energy"] = sol.energy;
    summary["edge_left"] = sol.edge_left;
    summary["edge_right"] = sol.edge_right;
    summary["kappa"] = sol.kappa;
    summary["iterations"] = sol.iterations;
    summary["residual_max"] = res_max;
    summary["residual_mean"] = res_mean;
    summary["mass"] = sol.density.mass();
    summary["rows"] = rows;

    std::vector<OutputRecord> outputs;
    emit_file(a.output + "_density.csv", "equilibrium-density.v1", csv.str(), outputs);
    emit_file(a.output + "_summary.json", "equilibrium.v1", summary.dump(2) + "\n", outputs);
    write_manifest(a.output, "equilibrium", config, outputs);

    if (a.print_json) {
        out << summary.dump(2) << "\n";
    } else {
        out << "energy " << fmt17(sol.energy) << "\n"
            << "edges (" << fmt17(sol.edge_left) << ", " << fmt17(sol.edge_right) << ")\n"
            << "kappa " << fmt17(sol.kappa) << "\n"
            << "residual max " << fmt17(res_max) << " mean " << fmt17(res_mean) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// rate: tail rate functions on a grid, optional small-excess asymptotic fit
// ---------------------------------------------------------------------------

struct RateArgs {
    PotentialChoice pc;
    int grid = 1024;
    int points = 65;
    double window = 0.0;
    bool lower_tail = false;
    int lower_points = 9;
    int lower_grid = 512;
    bool asymptotic = false;
    std::string output = "rate";
    bool print_json = false;
};

inline double closed_form_tail_rate(const PotentialChoice& pc, double y) {
    if (pc.family == "krawtchouk" && pc.m_rate > pc.theta)
        return krawtchouk_j(y, pc.m_rate, pc.theta);
    if (pc.family == "jack") return jack_j(y, pc.t, pc.theta);
    return std::numeric_limits<double>::quiet_NaN();
}

inline int cmd_rate(const RateArgs& a, std::ostream& out, std::ostream& err) {
    Potential v = build_potential(a.pc);
    json config = potential_config(a.pc);
    config["grid"] = a.grid;
    config["points"] = a.points;
    config["window"] = a.window;
    config["lower-tail"] = a.lower_tail;
    config["lower-points"] = a.lower_points;
    config["lower-grid"] = a.lower_grid;
    config["asymptotic"] = a.asymptotic;
    config["output"] = a.output;

    const bool has_family = a.pc.family == "krawtchouk" || a.pc.family == "jack";
    if (a.asymptotic && !has_family)
        throw std::invalid_argument("--asymptotic requires --family krawtchouk or jack");

    EquilibriumSolution sol;
    try {
        if (a.window > 0.0) {
            sol = solve(v, a.pc.theta, a.window, a.grid);
        } else if (std::isfinite(v.domain_right())) {
            sol = solve(v, a.pc.theta, v.domain_right(), a.grid);
        } else {
            sol = solve_unbounded(v, a.pc.theta, a.grid);
        }
    } catch (const ConvergenceError& e) {
        err << "rate: equilibrium solve failed: " << e.what() << "\n";
        return 1;
    }

    RateProfile profile = build_rate_profile(sol, v, a.pc.theta, a.points);
    const std::size_t n_rows = profile.y.size();

    // Lower-tail deviations are costly (one constrained solve per point), so
    // they are filled on an evenly spaced subset of rows when requested.
    std::vector<double> lower(n_rows, std::numeric_limits<double>::quiet_NaN());
    if (a.lower_tail) {
        const int lp = std::max(2, a.lower_points);
        for (int k = 0; k < lp; ++k) {
            std::size_t idx = std::size_t(
                std::llround(double(k) * double(n_rows - 1) / double(lp - 1)));
            double t = profile.y[idx];
            if (t < a.pc.theta) continue;
            lower[idx] = lower_tail_rate(t, v, a.pc.theta, a.lower_grid);
        }
    }

    std::ostringstream csv;
    csv << "t,j_numeric,j_closed_form,lower_tail_rate\n";
    json rows = json::array();
    for (std::size_t k = 0; k < n_rows; ++k) {
        const double t = profile.y[k];
        const double jc = has_family ? closed_form_tail_rate(a.pc, t)
                                     : std::numeric_limits<double>::quiet_NaN();
        csv << fmt17(t) << ',' << fmt17(profile.j_values[k]) << ',' << fmt17(jc) << ','
            << fmt17(lower[k]) << '\n';
        rows.push_back({t, profile.j_values[k], jc, lower[k]});
    }

    json summary;
    summary["schema"] = "rate.v1";
    summary["csv_schema"] = "rate-curve.v1";
    summary["config"] = config;
    summary["edge_right_numeric"] = profile.edge_right;
    if (a.pc.family == "krawtchouk" && a.pc.m_rate > a.pc.theta) {
        summary["edge_right_closed_form"] =
            0.5 * (a.pc.m_rate + a.pc.theta) + std::sqrt(a.pc.m_rate * a.pc.theta);
    } else if (a.pc.family == "jack") {
        double r = std::sqrt(a.pc.t) + 1.0;
        summary["edge_right_closed_form"] = a.pc.theta * r * r;
    }

    if (a.asymptotic) {
        // Log-log fit of the closed-form rate over small excesses above the
        // edge; the exponent should be 3/2 and the prefactor matches the
        // explicit small-excess constant for each family.
        double prefactor_exact;
        if (a.pc.family == "krawtchouk") {
            if (!(a.pc.m_rate > a.pc.theta))
                throw std::invalid_argument("--asymptotic needs m > theta for krawtchouk");
            prefactor_exact = 8.0 * std::sqrt(2.0 * std::sqrt(a.pc.m_rate * a.pc.theta)) /
                              (3.0 * (a.pc.m_rate - a.pc.theta));
        } else {
            double rt = std::sqrt(a.pc.t);
            prefactor_exact =
                4.0 / (3.0 * std::sqrt(a.pc.theta * rt) * (rt + 1.0));
        }
        const double b_closed =
            a.pc.family == "krawtchouk"
                ? 0.5 * (a.pc.m_rate + a.pc.theta) + std::sqrt(a.pc.m_rate * a.pc.theta)
                : a.pc.theta * (std::sqrt(a.pc.t) + 1.0) * (std::sqrt(a.pc.t) + 1.0);
        std::vector<double> la, lj;
        for (double alpha = 1e-4; alpha < 1.05e-2; alpha *= std::sqrt(10.0)) {
            la.push_back(std::log(alpha));
            lj.push_back(std::log(closed_form_tail_rate(a.pc, b_closed + alpha)));
        }
        double n = double(la.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < la.size(); ++i) {
            sx += la[i];
            sy += lj[i];
            sxx += la[i] * la[i];
            sxy += la[i] * lj[i];
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const double intercept = (sy - slope * sx) / n;
        json fit;
        fit["exponent_fit"] = slope;
        fit["prefactor_fit"] = std::exp(intercept);
        fit["prefactor_closed_form"] = prefactor_exact;
        fit["prefactor_relative_error"] =
            std::fabs(std::exp(intercept) - prefactor_exact) / prefactor_exact;
        summary["asymptotic"] = fit;
        if (!a.print_json)
            out << "asymptotic exponent " << fmt17(slope) << " prefactor "
                << fmt17(std::exp(intercept)) << " (closed form " << fmt17(prefactor_exact)
                << ")\n";
    }

    summary["rows"] = rows;

    std::vector<OutputRecord> outputs;
    emit_file(a.output + "_curve.csv", "rate-curve.v1", csv.str(), outputs);
    emit_file(a.output + "_summary.json", "rate.v1", summary.dump(2) + "\n", outputs);
    write_manifest(a.output, "rate", config, outputs);

    if (a.print_json) out << summary.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sample: Metropolis chains, per-sample top-particle positions, histogram,
// and optional tail-probability estimation
// ---------------------------------------------------------------------------

struct SampleArgs {
    std::string family = "krawtchouk";
    int n = 0;
    long long m = -1;   // krawtchouk row cap (integer)
    double t = 0.0;     // jack parameter
    long long cap = -1; // optional jack row cap
    double theta = 1.0;
    long long steps = 20000;
    long long burnin = 2000;
    long long thin = 10;
    int chains = 2;
    uint64_t seed = 1;
    double tail = std::numeric_limits<double>::quiet_NaN();
    std::string side = "upper";
    int bins = 64;
    std::string output = "sample";
    bool print_json = false;
};

inline EnsembleSpec build_sample_spec(const SampleArgs& a) {
    if (a.n < 1) throw std::invalid_argument("--n must be >= 1");
    if (a.family == "krawtchouk") {
        if (a.m < 1) throw std::invalid_argument("krawtchouk needs integer --m >= 1");
        // Rate chosen so the per-particle row cap floor(rate * n) is exactly m.
        double m_rate = (double(a.m) + 0.5) / double(a.n);
        EnsembleSpec spec = krawtchouk_spec(m_rate, a.theta, a.n);
        if (spec.cap != a.m) throw std::runtime_error("row cap resolution failed");
        return spec;
    }
    if (a.family == "jack") {
        if (!(a.t > 0.0)) throw std::invalid_argument("jack needs --t > 0");
        return jack_spec(a.t, a.theta, a.n, a.cap);
    }
    throw std::invalid_argument("--family must be krawtchouk or jack");
}

inline int cmd_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
    (void)err;
    EnsembleSpec spec = build_sample_spec(a);

    ChainConfig cfg;
    cfg.spec = spec;
    cfg.steps = a.steps;
    cfg.burn_in = a.burnin;
    cfg.thin = a.thin;
    cfg.seed = a.seed;
    cfg.chains = a.chains;

    json config;
    config["family"] = a.family;
    config["n"] = a.n;
    if (a.family == "krawtchouk") config["m"] = a.m;
    if (a.family == "jack") {
        config["t"] = a.t;
        config["cap"] = a.cap;
    }
    config["theta"] = a.theta;
    config["steps"] = a.steps;
    config["burnin"] = a.burnin;
    config["thin"] = a.thin;
    config["chains"] = a.chains;
    config["seed"] = a.seed;
    config["bins"] = a.bins;
    config["output"] = a.output;
    if (std::isfinite(a.tail)) {
        config["tail"] = a.tail;
        config["side"] = a.side;
    }

    std::ostringstream csv;
    csv << "chain,index,ell1_over_n\n";
    std::vector<double> samples;
    std::vector<long long> index_in_chain(std::size_t(a.chains), 0);
    ChainSummary summary_stats = run_chain(cfg, [&](int chain, const Configuration& c) {
        const double val = c.position(1) / double(a.n);
        samples.push_back(val);
        csv << chain << ',' << index_in_chain[std::size_t(chain)]++ << ',' << fmt17(val) << '\n';
    });

    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= double(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var = samples.size() > 1 ? var / double(samples.size() - 1) : 0.0;

    double lo = samples[0], hi = samples[0];
    for (double s : samples) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    if (!(hi > lo)) hi = lo + 1.0;
    const int bins = std::max(1, a.bins);
    std::vector<long long> counts(std::size_t(bins), 0);
    const double bw = (hi - lo) / double(bins);
    for (double s : samples) {
        int b = std::min(bins - 1, int((s - lo) / bw));
        counts[std::size_t(b)]++;
    }
    std::ostringstream hist_csv;
    hist_csv << "bin_left,bin_right,count,frequency\n";
    json hist_rows = json::array();
    for (int b = 0; b < bins; ++b) {
        const double bl = lo + b * bw, br = lo + (b + 1) * bw;
        const double freq = double(counts[std::size_t(b)]) / double(samples.size());
        hist_csv << fmt17(bl) << ',' << fmt17(br) << ',' << counts[std::size_t(b)] << ','
                 << fmt17(freq) << '\n';
        hist_rows.push_back({bl, br, counts[std::size_t(b)], freq});
    }

    json summary;
    summary["schema"] = "sample.v1";
    summary["csv_schema"] = "sample-top-particle.v1";
    summary["config"] = config;
    summary["resolved_cap"] = MhSampler(spec).cap();
    summary["retained"] = summary_stats.retained;
    summary["accepted"] = summary_stats.accepted;
    summary["proposed"] = summary_stats.proposed;
    summary["acceptance_rate"] =
        summary_stats.proposed > 0
            ? double(summary_stats.accepted) / double(summary_stats.proposed)
            : 0.0;
    summary["truncation_used"] = summary_stats.truncation_used;
    summary["digest"] = std::to_string(summary_stats.digest);
    summary["ell1_mean"] = mean;
    summary["ell1_stddev"] = std::sqrt(var);
    summary["histogram"] = hist_rows;

    if (std::isfinite(a.tail)) {
        TailSide side;
        if (a.side == "upper") {
            side = TailSide::upper;
        } else if (a.side == "lower") {
            side = TailSide::lower;
        } else {
            throw std::invalid_argument("--side must be upper or lower");
        }
        TailEstimate est = estimate_tail(cfg, a.tail, side);
        json tj;
        tj["threshold"] = est.threshold;
        tj["side"] = a.side;
        tj["p_hat"] = est.p_hat;
        tj["std_error"] = est.std_error;
        tj["n_effective"] = est.n_effective;
        tj["rule_of_three"] = est.rule_of_three;
        tj["upper_bound"] = est.upper_bound;
        summary["tail"] = tj;
    }

    std::vector<OutputRecord> outputs;
    emit_file(a.output + "_samples.csv", "sample-top-particle.v1", csv.str(), outputs);
    emit_file(a.output + "_hist.csv", "sample-histogram.v1", hist_csv.str(), outputs);
    emit_file(a.output + "_summary.json", "sample.v1", summary.dump(2) + "\n", outputs);
    write_manifest(a.output, "sample", config, outputs);

    if (a.print_json) {
        out << summary.dump(2) << "\n";
    } else {
        out << "retained " << summary_stats.retained << " acceptance "
            << fmt17(double(summary["acceptance_rate"])) << "\n"
            << "ell1/n mean " << fmt17(mean) << " stddev " << fmt17(std::sqrt(var)) << "\n";
        if (summary.contains("tail"))
            out << "tail p_hat " << fmt17(double(summary["tail"]["p_hat"])) << " +- "
                << fmt17(double(summary["tail"]["std_error"])) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// enumerate: exhaustive state listing with weights and normalized pmf
// ---------------------------------------------------------------------------

struct EnumerateArgs {
    std::string family = "krawtchouk";
    int n = 0;
    long long m = -1;
    double t = 0.0;
    long long cap = -1;
    double theta = 1.0;
    bool pmf = false;
    long long budget = 10'000'000;
    std::string output = "enumerate";
    bool print_json = false;
};

inline int cmd_enumerate(const EnumerateArgs& a, std::ostream& out, std::ostream& err) {
    (void)err;
    SampleArgs sa;
    sa.family = a.family;
    sa.n = a.n;
    sa.m = a.m;
    sa.t = a.t;
    sa.cap = a.cap;
    sa.theta = a.theta;
    EnsembleSpec spec = build_sample_spec(sa);
    if (spec.cap < 0)
        throw std::invalid_argument("enumerate needs a finite row cap (--m or --cap)");
    if (state_count(a.n, spec.cap) > a.budget)
        throw std::runtime_error("state space exceeds --budget");

    json config;
    config["family"] = a.family;
    config["n"] = a.n;
    if (a.family == "krawtchouk") config["m"] = a.m;
    if (a.family == "jack") {
        config["t"] = a.t;
        config["cap"] = a.cap;
    }
    config["theta"] = a.theta;
    config["pmf"] = a.pmf;
    config["budget"] = a.budget;
    config["output"] = a.output;

    std::vector<Configuration> states = enumerate_states(a.n, spec.cap, a.theta);
    std::vector<double> logw(states.size());
    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < states.size(); ++i) {
        LogValue w = log_weight(spec, states[i]);
        logw[i] = w.zero ? -std::numeric_limits<double>::infinity() : w.log;
        max_lw = std::max(max_lw, logw[i]);
    }
    double lse = 0.0;
    for (double lw : logw) lse += std::exp(lw - max_lw);
    lse = max_lw + std::log(lse);

    std::ostringstream csv;
    csv << (a.pmf ? "lambda,log_weight,pmf\n" : "lambda,log_weight\n");
    json rows = json::array();
    double pmf_total = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        std::string lam;
        for (std::size_t r = 0; r < states[i].lambda.size(); ++r) {
            if (r) lam += ';';
            lam += std::to_string(states[i].lambda[r]);
        }
        csv << lam << ',' << fmt17(logw[i]);
        json row = {lam, logw[i]};
        if (a.pmf) {
            const double p = std::exp(logw[i] - lse);
            pmf_total += p;
            csv << ',' << fmt17(p);
            row.push_back(p);
        }
        csv << '\n';
        rows.push_back(row);
    }

    json summary;
    summary["schema"] = "enumerate.v1";
    summary["csv_schema"] = a.pmf ? "enumerate-pmf.v1" : "enumerate-weights.v1";
    summary["config"] = config;
    summary["states"] = states.size();
    summary["log_partition"] = lse;
    if (a.pmf) summary["pmf_total"] = pmf_total;
    summary["rows"] = rows;

    std::vector<OutputRecord> outputs;
    emit_file(a.output + "_states.csv", summary["csv_schema"].get<std::string>(), csv.str(),
              outputs);
    emit_file(a.output + "_summary.json", "enumerate.v1", summary.dump(2) + "\n", outputs);
    write_manifest(a.output, "enumerate", config, outputs);

    if (a.print_json) {
        out << summary.dump(2) << "\n";
    } else {
        out << "states " << states.size() << " log_partition " << fmt17(lse);
        if (a.pmf) out << " pmf_total " << fmt17(pmf_total);
        out << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// verify: built-in identity and consistency suites; nonzero exit on failure
// ---------------------------------------------------------------------------

struct VerifyArgs {
    std::string suite = "all";
    uint64_t seed = 2026;
    std::string output;
    bool print_json = false;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double max_error = 0.0;
    std::string detail;
};

inline CheckResult verify_identities(uint64_t seed) {
    CheckResult r{"log-integral-identities", true, 0.0, ""};
    std::mt19937 rng{(unsigned)seed};
    std::uniform_real_distribution<double> uab(0.1, 3.0), ucd(0.2, 2.0);
    const LogIntegralCase cases[] = {LogIntegralCase::i_minus_1, LogIntegralCase::i_plus_1,
                                     LogIntegralCase::i_minus_2, LogIntegralCase::i_plus_2,
                                     LogIntegralCase::j_1,       LogIntegralCase::j_2};
    for (int draw = 0; draw < 100; ++draw) {
        double av = uab(rng), bv = uab(rng), cv = ucd(rng), dv = ucd(rng);
        for (LogIntegralCase which : cases) {
            const bool unit = which == LogIntegralCase::i_minus_2 ||
                              which == LogIntegralCase::i_plus_2 ||
                              which == LogIntegralCase::j_2;
            const double c = unit ? 1.0 : cv, d = unit ? 1.0 : dv;
            const double closed = log_integral_identities(which, av, bv, c, d);
            const double numeric = log_integral_numeric(which, av, bv, c, d);
            const double rel = std::fabs(closed - numeric) / (1.0 + std::fabs(closed));
            r.max_error = std::max(r.max_error, rel);
            if (rel > 1e-8) r.pass = false;
        }
    }
    r.detail = "100 randomized in-hypothesis draws, all six closed forms";
    return r;
}

inline CheckResult verify_cauchy() {
    CheckResult r{"cauchy-summation", true, 0.0, ""};
    for (int n = 2; n <= 4; ++n) {
        for (double theta : {0.5, 1.0, 2.0}) {
            double err = verify_cauchy_sum(n, double(n), theta, CauchyFamily::pure_beta);
            r.max_error = std::max(r.max_error, err);
            if (err > 1e-10) r.pass = false;
        }
    }
    double perr = verify_cauchy_sum(1, 0.1, 1.0, CauchyFamily::plancherel_truncated);
    r.max_error = std::max(r.max_error, perr);
    if (perr > 1e-8) r.pass = false;
    r.detail = "finite-cap sums at n=m in {2,3,4}, truncated series at n=1";
    return r;
}

inline CheckResult verify_sandwich() {
    CheckResult r{"pair-interaction-sandwich", true, 0.0, ""};
    for (double theta : {0.3, 0.5, 1.0, 2.0, 3.7}) {
        const double c = (1.0 + theta) * (1.0 + theta) * (1.0 + theta);
        for (int k = 0; k < 1000; ++k) {
            const double x =
                theta * std::pow(1e6 / theta, double(k) / 999.0);
            const double gap = std::fabs(log_q_theta(x, theta) - 2.0 * theta * std::log(x));
            const double excess = gap - c / x;
            r.max_error = std::max(r.max_error, excess);
            if (excess > 1e-12) r.pass = false;
        }
    }
    r.detail = "|log Q - 2 theta log x| <= (1+theta)^3/x on 1000 log-spaced points";
    return r;
}

inline CheckResult verify_balance() {
    CheckResult r{"detailed-balance-two-particles", true, 0.0, ""};
    for (double theta : {0.5, 1.0, 2.0}) {
        SampleArgs sa;
        sa.family = "krawtchouk";
        sa.n = 2;
        sa.m = 3;
        sa.theta = theta;
        EnsembleSpec spec = build_sample_spec(sa);
        MhSampler sampler(spec);
        auto states = enumerate_states(2, 3, theta);
        for (auto& c : states) {
            c.cap = sampler.cap();
            for (int i = 0; i < 2; ++i) {
                for (int delta : {+1, -1}) {
                    if (!sampler.proposal_valid(c, i, delta)) continue;
                    Configuration moved = c;
                    moved.lambda[std::size_t(i)] += delta;
                    const double lr = sampler.log_ratio(c, i, delta);
                    const double full =
                        log_weight(spec, moved).log - log_weight(spec, c).log;
                    const double err = std::fabs(lr - full);
                    r.max_error = std::max(r.max_error, err);
                    if (err > 1e-10) r.pass = false;
                }
            }
        }
    }
    r.detail = "proposal log-ratios equal exact weight ratios on every edge";
    return r;
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
    const bool all = a.suite == "all";
    std::vector<std::function<CheckResult()>> selected;
    if (all || a.suite == "identities")
        selected.push_back([&] { return verify_identities(a.seed); });
    if (all || a.suite == "cauchy") selected.push_back([] { return verify_cauchy(); });
    if (all || a.suite == "sandwich") selected.push_back([] { return verify_sandwich(); });
    if (all || a.suite == "balance") selected.push_back([] { return verify_balance(); });
    if (selected.empty()) {
        err << "unknown suite: " << a.suite
            << " (expected all|identities|cauchy|sandwich|balance)\n";
        return 2;
    }

    bool all_pass = true;
    json jchecks = json::array();
    for (const auto& run : selected) {
        CheckResult c = run();
        all_pass = all_pass && c.pass;
        // keep stdout machine-readable under --json; progress goes to stderr there
        (a.print_json ? err : out)
            << "VERIFY " << c.name << ": " << (c.pass ? "PASS" : "FAIL") << " (max error "
            << fmt17(c.max_error) << ")\n";
        json jc;
        jc["name"] = c.name;
        jc["pass"] = c.pass;
        jc["max_error"] = c.max_error;
        jc["detail"] = c.detail;
        jchecks.push_back(jc);
    }

    json report;
    report["schema"] = "verify.v1";
    report["suite"] = a.suite;
    report["seed"] = a.seed;
    report["checks"] = jchecks;
    report["all_pass"] = all_pass;

    if (!a.output.empty()) {
        json config;
        config["suite"] = a.suite;
        config["seed"] = a.seed;
        config["output"] = a.output;
        std::vector<OutputRecord> outputs;
        emit_file(a.output + "_report.json", "verify.v1", report.dump(2) + "\n", outputs);
        write_manifest(a.output, "verify", config, outputs);
    }
    if (a.print_json) out << report.dump(2) << "\n";
    return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// identities: evaluate the six closed-form log integrals at given parameters
// ---------------------------------------------------------------------------

struct IdentitiesArgs {
    double a = 1.0, b = 1.0, c = 1.0, d = 1.0;
    std::string output = "identities";
    bool print_json = false;
};

inline int cmd_identities(const IdentitiesArgs& ia, std::ostream& out, std::ostream& err) {
    (void)err;
    json config;
    config["a"] = ia.a;
    config["b"] = ia.b;
    config["c"] = ia.c;
    config["d"] = ia.d;
    config["output"] = ia.output;

    struct Row {
        const char* name;
        LogIntegralCase which;
        bool unit_cd;
    };
    const Row table[] = {
        {"i_minus_1", LogIntegralCase::i_minus_1, false},
        {"i_plus_1", LogIntegralCase::i_plus_1, false},
        {"i_minus_2", LogIntegralCase::i_minus_2, true},
        {"i_plus_2", LogIntegralCase::i_plus_2, true},
        {"j_1", LogIntegralCase::j_1, false},
        {"j_2", LogIntegralCase::j_2, true},
    };

    std::ostringstream csv;
    csv << "case,c_used,d_used,closed_form,quadrature,abs_error\n";
    json rows = json::array();
    for (const Row& row : table) {
        const double c = row.unit_cd ? 1.0 : ia.c;
        const double d = row.unit_cd ? 1.0 : ia.d;
        const double closed = log_integral_identities(row.which, ia.a, ia.b, c, d);
        const double numeric = log_integral_numeric(row.which, ia.a, ia.b, c, d);
        const double abs_err = std::fabs(closed - numeric);
        csv << row.name << ',' << fmt17(c) << ',' << fmt17(d) << ',' << fmt17(closed) << ','
            << fmt17(numeric) << ',' << fmt17(abs_err) << '\n';
        rows.push_back({row.name, c, d, closed, numeric, abs_err});
    }

    json summary;
    summary["schema"] = "identities.v1";
    summary["csv_schema"] = "identities-table.v1";
    summary["config"] = config;
    summary["rows"] = rows;

    std::vector<OutputRecord> outputs;
    emit_file(ia.output + "_table.csv", "identities-table.v1", csv.str(), outputs);
    emit_file(ia.output + "_summary.json", "identities.v1", summary.dump(2) + "\n", outputs);
    write_manifest(ia.output, "identities", config, outputs);

    if (ia.print_json) out << summary.dump(2) << "\n";
    else out << "six identities evaluated; table written to " << ia.output << "_table.csv\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"discrete beta-ensemble laboratory: equilibrium measures, tail "
                 "rate functions, exact enumeration, and Markov chain sampling"};
    app.require_subcommand(1);
    std::string config_path;  // parsed for completeness; consumed in preprocessing

    EquilibriumArgs eq;
    auto* sub_eq = app.add_subcommand("equilibrium", "solve the constrained energy minimization");
    sub_eq->add_option("--family", eq.pc.family, "krawtchouk | jack");
    sub_eq->add_option("--m", eq.pc.m_rate, "krawtchouk rate parameter (M/N limit)");
    sub_eq->add_option("--t", eq.pc.t, "jack parameter");
    sub_eq->add_option("--theta", eq.pc.theta, "interaction exponent theta > 0");
    sub_eq->add_option("--potential-file", eq.pc.potential_file,
                       "JSON tabulated potential {x, v, slope, xi}");
    sub_eq->add_option("--grid", eq.grid, "number of grid cells");
    sub_eq->add_option("--window", eq.window, "right end of the solve window (0 = auto)");
    sub_eq->add_option("--output", eq.output, "output file prefix");
    sub_eq->add_flag("--json", eq.print_json, "print the JSON summary to stdout");
    sub_eq->add_option("--config", config_path, "JSON config file (flags take precedence)");

    RateArgs ra;
    auto* sub_rate = app.add_subcommand("rate", "tail rate functions along the support");
    sub_rate->add_option("--family", ra.pc.family, "krawtchouk | jack");
    sub_rate->add_option("--m", ra.pc.m_rate, "krawtchouk rate parameter");
    sub_rate->add_option("--t", ra.pc.t, "jack parameter");
    sub_rate->add_option("--theta", ra.pc.theta, "interaction exponent theta > 0");
    sub_rate->add_option("--potential-file", ra.pc.potential_file,
                         "JSON tabulated potential {x, v, slope, xi}");
    sub_rate->add_option("--grid", ra.grid, "equilibrium grid cells");
    sub_rate->add_option("--points", ra.points, "rows in the rate curve");
    sub_rate->add_option("--window", ra.window, "solve window (0 = auto)");
    sub_rate->add_flag("--lower-tail", ra.lower_tail, "also fill the lower-tail rate column");
    sub_rate->add_option("--lower-points", ra.lower_points, "lower-tail evaluation points");
    sub_rate->add_option("--lower-grid", ra.lower_grid, "grid cells per lower-tail solve");
    sub_rate->add_flag("--asymptotic", ra.asymptotic, "fit the small-excess power law");
    sub_rate->add_option("--output", ra.output, "output file prefix");
    sub_rate->add_flag("--json", ra.print_json, "print the JSON summary to stdout");
    sub_rate->add_option("--config", config_path, "JSON config file (flags take precedence)");

    SampleArgs sa;
    auto* sub_sample = app.add_subcommand("sample", "Metropolis sampling of a finite ensemble");
    sub_sample->add_option("--family", sa.family, "krawtchouk | jack");
    sub_sample->add_option("--n", sa.n, "number of particles")->required();
    sub_sample->add_option("--m", sa.m, "krawtchouk integer row cap");
    sub_sample->add_option("--t", sa.t, "jack parameter");
    sub_sample->add_option("--cap", sa.cap, "jack row cap (-1 = automatic truncation)");
    sub_sample->add_option("--theta", sa.theta, "interaction exponent theta > 0");
    sub_sample->add_option("--steps", sa.steps, "Metropolis steps per chain");
    sub_sample->add_option("--burnin", sa.burnin, "steps discarded before retention");
    sub_sample->add_option("--thin", sa.thin, "retain every thin-th state");
    sub_sample->add_option("--chains", sa.chains, "independent chains");
    sub_sample->add_option("--seed", sa.seed, "master seed");
    sub_sample->add_option("--tail", sa.tail, "estimate P(top particle beyond t*n)");
    sub_sample->add_option("--side", sa.side, "upper | lower tail side");
    sub_sample->add_option("--bins", sa.bins, "histogram bins");
    sub_sample->add_option("--output", sa.output, "output file prefix");
    sub_sample->add_flag("--json", sa.print_json, "print the JSON summary to stdout");
    sub_sample->add_option("--config", config_path, "JSON config file (flags take precedence)");

    EnumerateArgs ea;
    auto* sub_enum = app.add_subcommand("enumerate", "exhaustive state listing with weights");
    sub_enum->add_option("--family", ea.family, "krawtchouk | jack");
    sub_enum->add_option("--n", ea.n, "number of particles")->required();
    sub_enum->add_option("--m", ea.m, "krawtchouk integer row cap");
    sub_enum->add_option("--t", ea.t, "jack parameter");
    sub_enum->add_option("--cap", ea.cap, "jack row cap");
    sub_enum->add_option("--theta", ea.theta, "interaction exponent theta > 0");
    sub_enum->add_flag("--pmf", ea.pmf, "append the normalized probability column");
    sub_enum->add_option("--budget", ea.budget, "maximum number of states");
    sub_enum->add_option("--output", ea.output, "output file prefix");
    sub_enum->add_flag("--json", ea.print_json, "print the JSON summary to stdout");
    sub_enum->add_option("--config", config_path, "JSON config file (flags take precedence)");

    VerifyArgs va;
    auto* sub_verify = app.add_subcommand("verify", "run built-in consistency suites");
    sub_verify->add_option("--suite", va.suite, "all | identities | cauchy | sandwich | balance");
    sub_verify->add_option("--seed", va.seed, "seed for randomized draws");
    sub_verify->add_option("--output", va.output, "optional report file prefix");
    sub_verify->add_flag("--json", va.print_json, "print the JSON report to stdout");
    sub_verify->add_option("--config", config_path, "JSON config file (flags take precedence)");

    IdentitiesArgs ia;
    auto* sub_id = app.add_subcommand("identities", "closed-form log integrals vs quadrature");
    sub_id->add_option("--a", ia.a, "parameter a >= 0");
    sub_id->add_option("--b", ia.b, "parameter b >= 0");
    sub_id->add_option("--c", ia.c, "parameter c > 0 (order-1 and j_1 cases)");
    sub_id->add_option("--d", ia.d, "parameter d > 0 (order-1 and j_1 cases)");
    sub_id->add_option("--output", ia.output, "output file prefix");
    sub_id->add_flag("--json", ia.print_json, "print the JSON summary to stdout");
    sub_id->add_option("--config", config_path, "JSON config file (flags take precedence)");

    try {
        apply_config_file(args);
        std::vector<std::string> full;
        full.reserve(args.size() + 1);
        full.push_back("ensemble_lab");
        full.insert(full.end(), args.begin(), args.end());
        std::vector<char*> argv;
        argv.reserve(full.size());
        for (auto& s : full) argv.push_back(s.data());
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (app.got_subcommand(sub_eq)) return cmd_equilibrium(eq, out, err);
        if (app.got_subcommand(sub_rate)) return cmd_rate(ra, out, err);
        if (app.got_subcommand(sub_sample)) return cmd_sample(sa, out, err);
        if (app.got_subcommand(sub_enum)) return cmd_enumerate(ea, out, err);
        if (app.got_subcommand(sub_verify)) return cmd_verify(va, out, err);
        if (app.got_subcommand(sub_id)) return cmd_identities(ia, out, err);
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "no subcommand selected\n";
    return 2;
}

}  // namespace cli
}  // namespace ensemble_lab
