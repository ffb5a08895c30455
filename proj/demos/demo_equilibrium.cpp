// Solves the constrained equilibrium problem for both built-in potential
// families, prints the recovered support edges, and sketches the density
// profile next to its closed form.
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ensemble_lab/equilibrium.hpp"
#include "ensemble_lab/measures.hpp"

using namespace ensemble_lab;

namespace {

void sketch(const EquilibriumSolution& sol, double (*closed)(double, double, double),
            double param, double theta) {
    const double h = sol.density.h();
    const std::size_t cells = sol.density.cells();
    const int rows = 16;
    std::printf("      x    density   closed    profile (# numeric, . closed form)\n");
    for (int r = 0; r < rows; ++r) {
        const std::size_t j = std::size_t((double(r) + 0.5) / rows * double(cells));
        const double x = (double(j) + 0.5) * h;
        const double num = sol.density.values[j];
        const double ref = closed(x, param, theta);
        std::string bar(std::size_t(num * 40.0 + 0.5), '#');
        const std::size_t ref_col = std::size_t(ref * 40.0 + 0.5);
        if (ref_col >= bar.size()) bar.resize(ref_col + 1, ' ');
        bar[ref_col] = '.';
        std::printf("  %7.3f  %8.5f  %8.5f  |%s\n", x, num, ref, bar.c_str());
    }
}

}  // namespace

int main() {
    const double theta = 1.0;

    {
        const double m_rate = 4.0;
        Potential v = krawtchouk_potential(m_rate, theta);
        auto sol = solve(v, theta, m_rate + theta, 1024);
        const double mid = 0.5 * (m_rate + theta), half = std::sqrt(m_rate * theta);
        std::printf("bounded family (rate parameter %.2f, theta %.2f)\n", m_rate, theta);
        std::printf("  support edges: [%.4f, %.4f]   closed form: [%.4f, %.4f]\n",
                    sol.edge_left, sol.edge_right, mid - half, mid + half);
        std::printf("  total mass %.12f, multiplier level %.6f, %zu iterations\n\n",
                    sol.density.mass(), sol.kappa, sol.iterations);
        sketch(sol, &krawtchouk_density, m_rate, theta);
    }

    std::printf("\n");

    {
        const double t = 1.0;
        Potential v = jack_potential(t, theta);
        auto sol = solve(v, theta, 6.0, 1024);
        const double r = std::sqrt(t) + 1.0;
        std::printf("unbounded family (shape parameter %.2f, theta %.2f)\n", t, theta);
        std::printf("  support edges: [%.4f, %.4f]   closed-form right edge: %.4f\n",
                    sol.edge_left, sol.edge_right, theta * r * r);
        std::printf("  total mass %.12f, multiplier level %.6f, %zu iterations\n\n",
                    sol.density.mass(), sol.kappa, sol.iterations);
        sketch(sol, &jack_density, t, theta);
    }

    return 0;
}
