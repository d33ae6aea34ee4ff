#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "twowall/coefficients.hpp"
#include "twowall/drift.hpp"
#include "twowall/grid.hpp"
#include "twowall/noise.hpp"
#include "twowall/obstacle.hpp"
#include "twowall/spde.hpp"
#include "twowall/walls.hpp"

namespace twowall {

/**
 * Heat semigroup over a fixed time t on the grid nodes, as a dense matrix.
 *
 * Built from the sampled eigenfunctions (sines on the interval, Fourier modes
 * on the circle) with the continuum decay exp(-lambda t). It maps every grid
 * eigenvector exactly to its continuum image, and P / dx approximates the
 * Green's function once sqrt(t) is resolved by the grid.
 */
class HeatPropagator {
public:
    HeatPropagator(const Grid& grid, double t) : n_(grid.nx), m_(grid.nx * grid.nx, 0.0) {
        if (!(t > 0.0)) throw DomainError("HeatPropagator: t must be positive");
        const double pi = std::numbers::pi;
        const std::size_t n = n_;
        if (grid.is_circle()) {
            // P_ij depends on (i - j) mod n only.
            std::vector<double> row(n, 0.0);
            for (std::size_t d = 0; d < n; ++d) {
                double s = 1.0;
                for (std::size_t m = 1; 2 * m < n; ++m) {
                    s += 2.0 * std::exp(-4.0 * pi * pi * double(m * m) * t) *
                         std::cos(2.0 * pi * double(m) * double(d) / double(n));
                }
                if (n % 2 == 0) {
                    const double m = double(n / 2);
                    s += std::exp(-4.0 * pi * pi * m * m * t) * ((d % 2 == 0) ? 1.0 : -1.0);
                }
                row[d] = s / double(n);
            }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) m_[i * n + j] = row[(i + n - j) % n];
        } else {
            const double h = grid.dx;
            std::vector<double> decay(n);
            for (std::size_t m = 1; m <= n; ++m) decay[m - 1] = std::exp(-pi * pi * double(m * m) * t);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t m = 1; m <= n; ++m) {
                        s += decay[m - 1] * std::sin(pi * double(m) * double(i + 1) * h) *
                             std::sin(pi * double(m) * double(j + 1) * h);
                    }
                    m_[i * n + j] = m_[j * n + i] = 2.0 * h * s;
                }
        }
    }

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return m_[i * n_ + j]; }

    void apply(std::span<const double> in, std::span<double> out) const {
        for (std::size_t i = 0; i < n_; ++i) {
            const double* r = m_.data() + i * n_;
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j) s += r[j] * in[j];
            out[i] = s;
        }
    }

private:
    std::size_t n_;
    std::vector<double> m_;
};

struct PicardState {
    std::size_t iteration = 0;
    SpaceTimeField v;
    SpaceTimeField xi;
    SpaceTimeField x;
    /// history[n-1] = sup |X_n - X_{n-1}|, with X_0 = x0 at every time.
    std::vector<double> history;
    bool converged = false;
};

/**
 * Fixed-point iteration X_n = Xi_n + v_n. The linear part is
 *
 *   v_n(k+1) = P_dt [ v_n(k) + dt f(X_{n-1}(k)) + chi(X_{n-1}(k)) xi_k sqrt(dt/dx) ],  v_n(0) = x0,
 *
 * on one noise realization drawn up front (same consumption order as the direct
 * integrators), and Xi_n solves the obstacle problem driven by v_n.
 */
inline std::pair<SolutionPath, PicardState> picard_solve(std::span<const double> x0, const WallPair& walls,
                                                         const CoefficientSpec& coeff, const SingularDriftSpec& spec,
                                                         const Grid& grid, NoiseStream& stream, std::size_t max_iter,
                                                         double tol, const SimulationOptions& opts = {}) {
    if (max_iter == 0) throw ConfigError("picard_solve: max_iter must be positive");
    if (x0.size() != grid.nx) throw ConfigError("picard_solve: x0 length does not match the grid");
    auto walls_ptr = std::make_shared<const WallPair>(walls);
    const SingularDriftSpec used = opts.stochastic_floor ? stochastic_drift_spec(spec, grid) : spec;
    used.validate();

    SpaceTimeField noise(grid.nt, grid.nx);
    for (std::size_t k = 0; k < grid.nt; ++k) stream.fill_normals(noise.row(k));

    const HeatPropagator prop(grid, grid.dt);
    const double scale = std::sqrt(grid.dt / grid.dx);
    ObstacleOptions oopts;
    oopts.treatment = opts.treatment;
    oopts.overflow_guard = opts.overflow_guard;

    PicardState st;
    SpaceTimeField prev = make_field(grid);
    for (std::size_t k = 0; k <= grid.nt; ++k)
        for (std::size_t i = 0; i < grid.nx; ++i) prev(k, i) = x0[i];

    std::vector<double> work(grid.nx);
    for (std::size_t n = 1; n <= max_iter; ++n) {
        SpaceTimeField v = make_field(grid);
        for (std::size_t i = 0; i < grid.nx; ++i) v(0, i) = x0[i];
        for (std::size_t k = 0; k < grid.nt; ++k) {
            const double t = grid.time(k);
            for (std::size_t i = 0; i < grid.nx; ++i) {
                const double x = grid.x_coords[i];
                const double u = prev(k, i);
                work[i] = v(k, i) + grid.dt * coeff.f(x, t, u) + coeff.chi(x, t, u) * noise(k, i) * scale;
            }
            prop.apply(work, v.row(k + 1));
        }
        auto sol = solve_obstacle_with(v, *walls_ptr, singular_drift_handle(used, v, *walls_ptr), grid, oopts);
        const double d = sup_distance(sol.x, prev);
        st.history.push_back(d);
        st.iteration = n;
        st.v = std::move(v);
        st.xi = std::move(sol.xi);
        st.x = sol.x;
        prev = std::move(sol.x);

        SolutionPath p;
        p.ledger = std::move(sol.ledger);
        if (d < tol || n == max_iter) {
            st.converged = d < tol;
            p.X = st.x;
            p.grid = grid;
            p.walls = walls_ptr;
            p.mode = SimMode::reflected;
            p.drift = used;
            p.coeff = coeff;
            p.master_seed = stream.master_seed();
            p.path_index = stream.path_index();
            if (opts.record_noise) p.noise = std::move(noise);
            return {std::move(p), std::move(st)};
        }
    }
    throw InvariantError("picard_solve: loop exited without a result");
}

}  // namespace twowall
