#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "twowall/coefficients.hpp"
#include "twowall/drift.hpp"
#include "twowall/error.hpp"
#include "twowall/grid.hpp"
#include "twowall/heat_operator.hpp"
#include "twowall/noise.hpp"
#include "twowall/obstacle.hpp"
#include "twowall/walls.hpp"

namespace twowall {

enum class SimMode {
    /// Two-wall drift plus projection onto [L1, L2] (reflection measures recorded).
    reflected,
    /// Two-wall clipped drift, no projection: the state may cross a wall.
    clipped,
    /// Lower-wall drift only (c2 forced to 0), no projection, stops once min gap <= stop_threshold.
    single_wall,
};

inline std::string_view to_string(SimMode m) {
    switch (m) {
        case SimMode::reflected: return "reflected";
        case SimMode::clipped: return "clipped";
        case SimMode::single_wall: return "single-wall";
    }
    return "reflected";
}

inline SimMode parse_sim_mode(std::string_view s) {
    if (s == "reflected") return SimMode::reflected;
    if (s == "clipped") return SimMode::clipped;
    if (s == "single-wall" || s == "single_wall") return SimMode::single_wall;
    throw ConfigError("unknown mode '" + std::string(s) + "'");
}

struct SimulationOptions {
    DriftTreatment treatment = DriftTreatment::implicit;
    /// Keep the unit normals of every step in the returned path.
    bool record_noise = false;
    /// Raise floors to at least dx/10.
    bool stochastic_floor = true;
    double stop_threshold = 0.0;
    double overflow_guard = 1e12;
};

/**
 * One time step of the scheme, shared by all integrators:
 *
 *   b  = X + dt f(X) + chi(X) xi sqrt(dt/dx)
 *   Y  = b + dt g(Y)            (drift, walls at t_k)
 *   X~ = (I - dt Lap_h)^{-1} Y
 *   X' = clamp(X~, L1(t_k+1), L2(t_k+1))   (reflected mode only)
 *
 * With treatment = explicit_euler the drift line is Y = b + dt g(X).
 */
class Integrator {
public:
    Integrator(const Grid& grid, const WallPair& walls, const CoefficientSpec& coeff, const SingularDriftSpec& drift,
               SimMode mode, const SimulationOptions& opts = {})
        : grid_(grid), walls_(&walls), coeff_(coeff), mode_(mode), opts_(opts), heat_(grid, grid.dt) {
        if (walls.lambda1.rows() != grid.nt + 1 || walls.lambda1.cols() != grid.nx) {
            throw ConfigError("walls are not sampled on the simulation grid");
        }
        SingularDriftSpec s = drift;
        if (mode == SimMode::single_wall) s.c2 = 0.0;
        if (opts.stochastic_floor) s = stochastic_drift_spec(s, grid);
        s.validate();
        drift_ = DriftEvaluator(s);
        noise_scale_ = std::sqrt(grid.dt / grid.dx);
        f_zero_ = coeff.f.is_zero();
        chi_zero_ = coeff.chi.is_zero();
    }

    const Grid& grid() const noexcept { return grid_; }
    const WallPair& walls() const noexcept { return *walls_; }
    const SingularDriftSpec& drift() const noexcept { return drift_.spec(); }
    const CoefficientSpec& coefficients() const noexcept { return coeff_; }
    SimMode mode() const noexcept { return mode_; }
    const SimulationOptions& options() const noexcept { return opts_; }

    /// Advances `state` from step k to k+1. `up`/`down` receive the ledger masses (zero outside reflected mode).
    void step(std::span<double> state, std::size_t k, std::span<const double> noise, std::span<double> up,
              std::span<double> down) const {
        const std::size_t n = grid_.nx;
        const double dt = grid_.dt;
        const double t = grid_.time(k);
        const auto& spec = drift_.spec();
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid_.x_coords[i];
            const double u = state[i];
            double b = u;
            if (!f_zero_) b += dt * coeff_.f(x, t, u);
            if (!chi_zero_) b += coeff_.chi(x, t, u) * noise[i] * noise_scale_;
            if (spec.inactive()) {
                state[i] = b;
                continue;
            }
            const double l1 = walls_->lambda1(k, i);
            const double l2 = walls_->lambda2(k, i);
            if (opts_.treatment == DriftTreatment::explicit_euler) {
                state[i] = b + dt * drift_(u, l1, l2).value;
            } else {
                const std::array<double, 2> probes{l1 + spec.floor_delta, l2 - spec.floor_delta_tilde};
                state[i] = resolve_implicit(b, dt, [&](double y) { return drift_(y, l1, l2); }, probes);
            }
        }
        heat_.solve_in_place(state);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(state[i]) || std::fabs(state[i]) > opts_.overflow_guard) {
                throw DivergenceError("integrator diverged at step " + std::to_string(k + 1) + ", cell " +
                                          std::to_string(i) + "; retry with dt <= " + brief(dt / 10.0),
                                      dt / 10.0);
            }
        }
        std::fill(up.begin(), up.end(), 0.0);
        std::fill(down.begin(), down.end(), 0.0);
        if (mode_ != SimMode::reflected) return;
        for (std::size_t i = 0; i < n; ++i) {
            const double l1 = walls_->lambda1(k + 1, i);
            const double l2 = walls_->lambda2(k + 1, i);
            if (state[i] < l1) {
                up[i] = (l1 - state[i]) * grid_.dx;
                state[i] = l1;
            } else if (state[i] > l2) {
                down[i] = (state[i] - l2) * grid_.dx;
                state[i] = l2;
            }
        }
    }

    /// Smallest X - L1 over the cells at step k.
    double min_lower_gap(std::span<const double> state, std::size_t k) const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < state.size(); ++i) m = std::min(m, state[i] - walls_->lambda1(k, i));
        return m;
    }

    void check_initial(std::span<const double> x0) const {
        if (x0.size() != grid_.nx) throw ConfigError("x0 length does not match the grid");
        for (std::size_t i = 0; i < grid_.nx; ++i) {
            const double l1 = walls_->lambda1(0, i);
            const double l2 = walls_->lambda2(0, i);
            if (!std::isfinite(x0[i])) throw ConfigError("x0 is not finite");
            if (mode_ == SimMode::single_wall) {
                if (!(x0[i] > l1)) throw ConfigError("x0 must lie strictly above the lower wall at cell " + std::to_string(i));
            } else if (x0[i] < l1 || x0[i] > l2) {
                throw ConfigError("x0 lies outside the walls at cell " + std::to_string(i));
            }
        }
    }

private:
    Grid grid_;
    const WallPair* walls_;
    CoefficientSpec coeff_;
    SimMode mode_;
    SimulationOptions opts_;
    ImplicitHeatOperator heat_;
    DriftEvaluator drift_;
    double noise_scale_ = 0.0;
    bool f_zero_ = false;
    bool chi_zero_ = false;
};

struct StepResult {
    std::vector<double> state;
    std::vector<double> upsilon;
    std::vector<double> gamma;
};

/// Single reflected step from t_k; builds a one-off integrator (use Integrator directly inside loops).
inline StepResult step_reflected(std::span<const double> state, std::size_t k, const WallPair& walls,
                                 const CoefficientSpec& coeff, const SingularDriftSpec& spec,
                                 std::span<const double> noise, const Grid& grid, const SimulationOptions& opts = {}) {
    if (k >= grid.nt) throw ConfigError("step_reflected: step index past the horizon");
    if (state.size() != grid.nx || noise.size() != grid.nx) throw ConfigError("step_reflected: size mismatch");
    const Integrator integ(grid, walls, coeff, spec, SimMode::reflected, opts);
    StepResult r{std::vector<double>(state.begin(), state.end()), std::vector<double>(grid.nx),
                 std::vector<double>(grid.nx)};
    integ.step(r.state, k, noise, r.upsilon, r.gamma);
    return r;
}

/**
 * Runs one path. `observer(k, state, up, down)` is called for k = 0 (zero increments)
 * and after every step; returning false stops the run. Returns the stop step, if any.
 * `noise_sink(k, xi)` sees the normals used in step k -> k+1.
 */
template <typename Observer, typename NoiseSink>
std::optional<std::size_t> run_path(const Integrator& integ, std::span<const double> x0, NoiseStream& stream,
                                    Observer&& observer, NoiseSink&& noise_sink) {
    integ.check_initial(x0);
    const Grid& g = integ.grid();
    std::vector<double> state(x0.begin(), x0.end());
    std::vector<double> up(g.nx, 0.0);
    std::vector<double> down(g.nx, 0.0);
    std::vector<double> xi(g.nx, 0.0);
    const bool single = integ.mode() == SimMode::single_wall;
    const double threshold = integ.options().stop_threshold;
    if (!observer(std::size_t{0}, std::span<const double>(state), std::span<const double>(up),
                  std::span<const double>(down))) {
        return std::size_t{0};
    }
    for (std::size_t k = 0; k < g.nt; ++k) {
        stream.fill_normals(xi);
        noise_sink(k, std::span<const double>(xi));
        integ.step(state, k, xi, up, down);
        const bool go = observer(k + 1, std::span<const double>(state), std::span<const double>(up),
                                 std::span<const double>(down));
        if (single && integ.min_lower_gap(state, k + 1) <= threshold) return k + 1;
        if (!go) return k + 1;
    }
    return std::nullopt;
}

template <typename Observer>
std::optional<std::size_t> run_path(const Integrator& integ, std::span<const double> x0, NoiseStream& stream,
                                    Observer&& observer) {
    return run_path(integ, x0, stream, std::forward<Observer>(observer), [](std::size_t, std::span<const double>) {});
}

/// Full trajectory of one path with its ledger and provenance.
struct SolutionPath {
    SpaceTimeField X;
    ReflectionLedger ledger;
    Grid grid;
    std::shared_ptr<const WallPair> walls;
    SimMode mode = SimMode::reflected;
    /// Drift actually used (floors raised, c2 zeroed in single-wall mode).
    SingularDriftSpec drift;
    CoefficientSpec coeff;
    /// Single-wall runs: step at which the min gap reached the threshold.
    std::optional<std::size_t> stop_step;
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
    /// Row k: unit normals used in step k -> k+1 (nt rows).
    std::optional<SpaceTimeField> noise;

    bool reflected() const noexcept { return mode == SimMode::reflected; }
    std::size_t steps() const noexcept { return X.rows() == 0 ? 0 : X.rows() - 1; }
};

inline SolutionPath simulate(SimMode mode, std::span<const double> x0, std::shared_ptr<const WallPair> walls,
                             const CoefficientSpec& coeff, const SingularDriftSpec& spec, const Grid& grid,
                             NoiseStream& stream, const SimulationOptions& opts = {}) {
    if (!walls) throw ConfigError("simulate: walls missing");
    const Integrator integ(grid, *walls, coeff, spec, mode, opts);
    SolutionPath p;
    p.X = make_field(grid);
    p.ledger = ReflectionLedger::zeros(grid);
    p.grid = grid;
    p.walls = walls;
    p.mode = mode;
    p.drift = integ.drift();
    p.coeff = coeff;
    p.master_seed = stream.master_seed();
    p.path_index = stream.path_index();
    if (opts.record_noise) p.noise = SpaceTimeField(grid.nt, grid.nx);
    auto observe = [&](std::size_t k, std::span<const double> s, std::span<const double> up,
                       std::span<const double> down) {
        std::copy(s.begin(), s.end(), p.X.row(k).begin());
        std::copy(up.begin(), up.end(), p.ledger.upsilon_mass.row(k).begin());
        std::copy(down.begin(), down.end(), p.ledger.gamma_mass.row(k).begin());
        return true;
    };
    auto sink = [&](std::size_t k, std::span<const double> xi) {
        if (p.noise) std::copy(xi.begin(), xi.end(), p.noise->row(k).begin());
    };
    p.stop_step = run_path(integ, x0, stream, observe, sink);
    if (p.stop_step) {
        p.X.truncate_rows(*p.stop_step + 1);
        p.ledger.upsilon_mass.truncate_rows(*p.stop_step + 1);
        p.ledger.gamma_mass.truncate_rows(*p.stop_step + 1);
        if (p.noise) p.noise->truncate_rows(*p.stop_step);
    }
    return p;
}

inline SolutionPath simulate_reflected(std::span<const double> x0, const WallPair& walls, const CoefficientSpec& coeff,
                                       const SingularDriftSpec& spec, const Grid& grid, NoiseStream& stream,
                                       const SimulationOptions& opts = {}) {
    return simulate(SimMode::reflected, x0, std::make_shared<const WallPair>(walls), coeff, spec, grid, stream, opts);
}

/// Unreflected run with the clipped drift; spec floors are the clip levels delta/2, delta~/2.
inline SolutionPath simulate_clipped(std::span<const double> x0, const WallPair& walls, const CoefficientSpec& coeff,
                                     const SingularDriftSpec& spec, const Grid& grid, NoiseStream& stream,
                                     const SimulationOptions& opts = {}) {
    if (spec.theta > 0.0 && ((spec.c1 > 0.0 && !(spec.floor_delta > 0.0)) ||
                             (spec.c2 > 0.0 && !(spec.floor_delta_tilde > 0.0)))) {
        throw ConfigError("simulate_clipped: floors must be positive");
    }
    return simulate(SimMode::clipped, x0, std::make_shared<const WallPair>(walls), coeff, spec, grid, stream, opts);
}

/// Lower-wall equation; stops at the first step with min_x (v - L1) <= opts.stop_threshold.
inline SolutionPath simulate_single_wall(std::span<const double> x0, const WallPair& walls,
                                         const CoefficientSpec& coeff, const SingularDriftSpec& spec, const Grid& grid,
                                         NoiseStream& stream, const SimulationOptions& opts = {}) {
    return simulate(SimMode::single_wall, x0, std::make_shared<const WallPair>(walls), coeff, spec, grid, stream,
                    opts);
}

/// Convenience: the same value at every node.
inline std::vector<double> constant_state(const Grid& grid, double value) { return std::vector<double>(grid.nx, value); }

}  // namespace twowall
