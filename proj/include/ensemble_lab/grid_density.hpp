#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ensemble_lab {

// Piecewise-constant density on [0, support_right], equal cells.
struct GridDensity {
    double support_right = 0.0;
    std::vector<double> values;

    GridDensity() = default;
    GridDensity(double right, std::vector<double> v) : support_right(right), values(std::move(v)) {
        validate();
    }

    std::size_t cells() const { return values.size(); }
    double h() const { return support_right / double(values.size()); }

    double mass() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * h();
    }

    double value_at(double x) const {
        if (x < 0.0 || x >= support_right) return 0.0;
        auto j = std::size_t(x / h());
        if (j >= values.size()) j = values.size() - 1;
        return values[j];
    }

    // CDF at x, exact for the piecewise-constant density.
    double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        double step = h();
        double full = std::min(x, support_right);
        auto j = std::size_t(full / step);
        if (j > values.size()) j = values.size();
        double s = 0.0;
        for (std::size_t k = 0; k < j && k < values.size(); ++k) s += values[k] * step;
        if (j < values.size()) s += values[j] * (full - double(j) * step);
        return s;
    }

    void validate() const {
        if (!(support_right > 0.0) || values.empty())
            throw std::invalid_argument("grid density needs positive support and at least one cell");
        for (double v : values)
            if (!std::isfinite(v) || v < 0.0)
                throw std::invalid_argument("grid density values must be finite and nonnegative");
    }
};

// Membership in the constrained class: 0 <= phi <= 1/theta, unit mass, support in [0, s].
inline bool is_admissible(const GridDensity& phi, double theta, double s,
                          double tol = 1e-9) {
    if (phi.support_right > s + tol) {
        double step = phi.h();
        for (std::size_t j = 0; j < phi.cells(); ++j)
            if (phi.values[j] > tol && (double(j) + 1.0) * step > s + tol) return false;
    }
    double ceiling = 1.0 / theta;
    for (double v : phi.values)
        if (v < -tol || v > ceiling * (1.0 + 1e-12) + tol) return false;
    return std::fabs(phi.mass() - 1.0) <= tol;
}

}  // namespace ensemble_lab
