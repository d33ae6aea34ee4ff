#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "twowall/coefficients.hpp"
#include "twowall/drift.hpp"
#include "twowall/error.hpp"
#include "twowall/grid.hpp"
#include "twowall/heat_operator.hpp"
#include "twowall/spde.hpp"

namespace twowall {

struct WeakFormOptions {
    /// Drop the reflection-measure terms (ablation).
    bool include_ledger = true;
};

/**
 * sup over t_k of
 *
 *   | (X(t_k), psi) - (X_0, psi) - sum_{j<k} dt [ (X_j, psi'') + (f_j, psi) + (g_j, psi) ]
 *     - sum_{j<k} sum_i psi_i chi_ji xi_ji sqrt(dt dx) - sum_{j<=k} sum_i psi_i (Ups_ji - Gam_ji) |
 *
 * with (u, w) = sum_i u_i w_i dx and psi'' the three-point Laplacian (zero
 * Dirichlet ends on the interval, so psi should vanish there).
 */
inline double weak_form_residual(const SolutionPath& path, std::span<const double> psi, const CoefficientSpec& coeff,
                                 const SingularDriftSpec& spec, const SpaceTimeField& noise, const Grid& grid,
                                 const WeakFormOptions& opts = {}) {
    if (psi.size() != grid.nx) throw ConfigError("weak_form_residual: psi length does not match the grid");
    if (path.X.cols() != grid.nx) throw ConfigError("weak_form_residual: path is not on the grid");
    if (!path.walls) throw ConfigError("weak_form_residual: path has no walls");
    const std::size_t steps = path.steps();
    const bool chi_zero = coeff.chi.is_zero();
    if (!chi_zero && (noise.rows() < steps || noise.cols() != grid.nx)) {
        throw ConfigError("weak_form_residual: noise record does not cover the path");
    }
    const WallPair& w = *path.walls;
    const DriftEvaluator drift(spec);
    const double dx = grid.dx;
    const double dt = grid.dt;
    const double sdt = std::sqrt(dt * dx);

    std::vector<double> lap_psi(grid.nx);
    discrete_laplacian(grid, psi, lap_psi);

    auto inner = [&](std::span<const double> u, std::span<const double> v) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
        return s * dx;
    };

    const double base = inner(path.X.row(0), psi);
    double acc = 0.0;
    double worst = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const auto xk = path.X.row(k);
        const double t = grid.time(k);
        double s = inner(xk, lap_psi) * dt;
        for (std::size_t i = 0; i < grid.nx; ++i) {
            const double x = grid.x_coords[i];
            const double u = xk[i];
            double r = coeff.f(x, t, u);
            if (!spec.inactive()) r += drift(u, w.lambda1(k, i), w.lambda2(k, i)).value;
            s += psi[i] * r * dt * dx;
            if (!chi_zero) s += psi[i] * coeff.chi(x, t, u) * noise(k, i) * sdt;
            if (opts.include_ledger) {
                s += psi[i] * (path.ledger.upsilon_mass(k + 1, i) - path.ledger.gamma_mass(k + 1, i));
            }
        }
        acc += s;
        const double res = inner(path.X.row(k + 1), psi) - base - acc;
        worst = std::max(worst, std::fabs(res));
    }
    return worst;
}

inline double weak_form_residual(const SolutionPath& path, std::span<const double> psi,
                                 const WeakFormOptions& opts = {}) {
    if (!path.noise && !path.coeff.chi.is_zero()) {
        throw ConfigError("weak_form_residual: path was simulated without record_noise");
    }
    static const SpaceTimeField empty;
    return weak_form_residual(path, psi, path.coeff, path.drift, path.noise ? *path.noise : empty, path.grid, opts);
}

/// sin(pi m x) on the interval nodes, sin(2 pi m x) on the circle.
inline std::vector<double> sine_test_function(const Grid& grid, int mode = 1) {
    std::vector<double> psi(grid.nx);
    const double k = (grid.is_circle() ? 2.0 : 1.0) * std::numbers::pi * mode;
    for (std::size_t i = 0; i < grid.nx; ++i) psi[i] = std::sin(k * grid.x_coords[i]);
    return psi;
}

}  // namespace twowall
