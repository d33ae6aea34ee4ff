#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "twowall/drift.hpp"
#include "twowall/error.hpp"
#include "twowall/grid.hpp"
#include "twowall/heat_operator.hpp"
#include "twowall/walls.hpp"

namespace twowall {

/// Cellwise masses of the reflection measures: entry (k, i) is the mass pushed in during step k-1 -> k.
struct ReflectionLedger {
    SpaceTimeField upsilon_mass;
    SpaceTimeField gamma_mass;

    static ReflectionLedger zeros(const Grid& grid) { return {make_field(grid), make_field(grid)}; }

    double total_upsilon() const {
        double s = 0.0;
        for (double v : upsilon_mass.values()) s += v;
        return s;
    }
    double total_gamma() const {
        double s = 0.0;
        for (double v : gamma_mass.values()) s += v;
        return s;
    }
    /// All entries finite and >= 0.
    bool well_formed() const {
        for (const SpaceTimeField* f : {&upsilon_mass, &gamma_mass})
            for (double v : f->values())
                if (!(v >= 0.0) || !std::isfinite(v)) return false;
        return true;
    }
};

/**
 * State-dependent drift for the obstacle solvers: value(cell, step, state) and,
 * optionally, its state-derivative. Must be nonincreasing in the state.
 */
struct DriftHandle {
    std::function<double(std::size_t cell, std::size_t step, double state)> value;
    std::function<double(std::size_t cell, std::size_t step, double state)> slope;
};

inline DriftHandle zero_drift() {
    return {[](std::size_t, std::size_t, double) { return 0.0; }, [](std::size_t, std::size_t, double) { return 0.0; }};
}

/// Regularized singular drift seen by Xi: g(Xi + v) against the walls at the same step.
inline DriftHandle singular_drift_handle(const SingularDriftSpec& spec, const SpaceTimeField& v, const WallPair& walls) {
    auto eval = std::make_shared<DriftEvaluator>(spec);
    return {[eval, &v, &walls](std::size_t i, std::size_t k, double xi) {
                return (*eval)(xi + v(k, i), walls.lambda1(k, i), walls.lambda2(k, i)).value;
            },
            [eval, &v, &walls](std::size_t i, std::size_t k, double xi) {
                return (*eval)(xi + v(k, i), walls.lambda1(k, i), walls.lambda2(k, i)).slope;
            }};
}

struct ObstacleOptions {
    DriftTreatment treatment = DriftTreatment::implicit;
    double overflow_guard = 1e12;
};

namespace detail {

inline void check_obstacle_inputs(const SpaceTimeField& v, const WallPair& walls, const Grid& grid) {
    if (v.rows() != grid.nt + 1 || v.cols() != grid.nx) throw ConfigError("obstacle: v is not sampled on the grid");
    if (walls.lambda1.rows() != grid.nt + 1 || walls.lambda1.cols() != grid.nx) {
        throw ConfigError("obstacle: walls are not sampled on the grid");
    }
    for (std::size_t i = 0; i < grid.nx; ++i) {
        if (!(walls.lambda1(0, i) < walls.lambda2(0, i))) throw ConfigError("obstacle: walls fail H1 at t = 0");
        if (v(0, i) < walls.lambda1(0, i) || v(0, i) > walls.lambda2(0, i)) {
            throw ConfigError("obstacle: v(x, 0) lies outside the walls at cell " + std::to_string(i));
        }
    }
}

/// Drift sub-step in place on row `xi` at step k.
inline void apply_drift(std::span<double> xi, std::size_t k, double dt, const DriftHandle& g, DriftTreatment treatment) {
    for (std::size_t i = 0; i < xi.size(); ++i) {
        const double b = xi[i];
        if (treatment == DriftTreatment::explicit_euler) {
            xi[i] = b + dt * g.value(i, k, b);
            continue;
        }
        if (g.slope) {
            xi[i] = resolve_implicit(b, dt, [&](double u) { return DriftSample{g.value(i, k, u), g.slope(i, k, u)}; });
        } else {
            xi[i] = resolve_implicit(b, dt, [&](double u) { return DriftSample{g.value(i, k, u), 0.0}; });
        }
    }
}

inline void guard(std::span<const double> row, double limit, double dt) {
    for (double x : row)
        if (!std::isfinite(x) || std::fabs(x) > limit) {
            throw DivergenceError("obstacle solver diverged; retry with dt <= " + brief(dt / 10.0), dt / 10.0);
        }
}

}  // namespace detail

struct PenalizedSolution {
    SpaceTimeField xi;
    /// xi + v after the penalty sub-step.
    SpaceTimeField x;
    /// max over nodes and steps of (L1 - X)^+ and (X - L2)^+.
    double max_lower_violation = 0.0;
    double max_upper_violation = 0.0;
};

/**
 * Penalized solver: dXi/dt = Lap Xi + g(Xi) + rho (L1 - (Xi+v))^+ - rho ((Xi+v) - L2)^+, Xi(.,0) = 0.
 *
 * Per step: drift sub-step, implicit heat solve, then the penalty ODE integrated
 * exactly over dt at each node (violations decay by exp(-rho dt)).
 */
inline PenalizedSolution solve_penalized(const SpaceTimeField& v, const WallPair& walls, const DriftHandle& g, double rho,
                                         const Grid& grid, const ObstacleOptions& opts = {}) {
    if (!(rho > 0.0)) throw ConfigError("solve_penalized: rho must be positive");
    detail::check_obstacle_inputs(v, walls, grid);
    // Spot-check monotonicity of g in the state.
    for (std::size_t i = 0; i < grid.nx; i += std::max<std::size_t>(1, grid.nx / 4)) {
        const double a = g.value(i, 0, -0.5);
        const double b = g.value(i, 0, 0.0);
        if (b > a + 1e-12 * std::max(1.0, std::fabs(a))) throw ConfigError("solve_penalized: drift handle is increasing in the state");
    }
    const ImplicitHeatOperator heat(grid, grid.dt);
    const double decay = std::exp(-rho * grid.dt);
    PenalizedSolution sol{make_field(grid), make_field(grid), 0.0, 0.0};
    for (std::size_t i = 0; i < grid.nx; ++i) sol.x(0, i) = v(0, i);
    std::vector<double> work(grid.nx);
    for (std::size_t k = 0; k < grid.nt; ++k) {
        auto cur = sol.xi.row(k);
        std::copy(cur.begin(), cur.end(), work.begin());
        detail::apply_drift(work, k, grid.dt, g, opts.treatment);
        heat.solve_in_place(work);
        for (std::size_t i = 0; i < grid.nx; ++i) {
            double u = work[i] + v(k + 1, i);
            const double l1 = walls.lambda1(k + 1, i);
            const double l2 = walls.lambda2(k + 1, i);
            if (u < l1) u = l1 - (l1 - u) * decay;
            if (u > l2) u = l2 + (u - l2) * decay;
            sol.x(k + 1, i) = u;
            sol.xi(k + 1, i) = u - v(k + 1, i);
            sol.max_lower_violation = std::max(sol.max_lower_violation, l1 - u);
            sol.max_upper_violation = std::max(sol.max_upper_violation, u - l2);
        }
        detail::guard(sol.xi.row(k + 1), opts.overflow_guard, grid.dt);
    }
    return sol;
}

/**
 * Two-level regularization schedule: first eps1 is lowered through eps1_levels
 * with eps2 = eps2_levels.front(), then eps2 through eps2_levels with eps1 held
 * at its last level. A phase stops early once min_levels levels are done and
 * successive solutions differ by less than stop_tolerance in sup-norm.
 */
struct EpsSchedule {
    std::vector<double> eps1_levels;
    std::vector<double> eps2_levels;
    double stop_tolerance = 1e-4;
    std::size_t min_levels = 3;

    static EpsSchedule halving(double eps1, double eps2, std::size_t levels = 6) {
        EpsSchedule s;
        for (std::size_t i = 0; i < levels; ++i) {
            s.eps1_levels.push_back(std::ldexp(eps1, -static_cast<int>(i)));
            s.eps2_levels.push_back(std::ldexp(eps2, -static_cast<int>(i)));
        }
        return s;
    }
};

struct ScheduleLevel {
    double eps1 = 0.0;
    double eps2 = 0.0;
    /// Which regularizer changed from the previous level: 0 none (first), 1 or 2.
    int changed = 0;
    /// sup |Xi_level - Xi_previous|.
    double sup_change = 0.0;
    /// For a drop in eps1: Xi nondecreasing and Xi + eps1 nonincreasing (within tol).
    /// For a drop in eps2: Xi nonincreasing and Xi - eps2 nondecreasing.
    bool monotone = true;
    double worst_violation = 0.0;
};

struct ScheduleReport {
    std::vector<ScheduleLevel> levels;
    bool monotone() const {
        for (const auto& l : levels)
            if (!l.monotone) return false;
        return true;
    }
};

struct ObstacleSolution {
    SpaceTimeField xi;
    /// xi + v as stored after projection; lies in [L1, L2] exactly.
    SpaceTimeField x;
    ReflectionLedger ledger;
    std::optional<ScheduleReport> schedule;
};

/**
 * Obstacle problem for Xi with drift handle g:
 * per step, drift sub-step, implicit heat solve, then projection of Xi + v onto
 * [L1, L2] at the new time. Upward corrections times dx go to upsilon_mass,
 * downward ones to gamma_mass.
 */
inline ObstacleSolution solve_obstacle_with(const SpaceTimeField& v, const WallPair& walls, const DriftHandle& g,
                                            const Grid& grid, const ObstacleOptions& opts = {}) {
    detail::check_obstacle_inputs(v, walls, grid);
    const ImplicitHeatOperator heat(grid, grid.dt);
    ObstacleSolution sol{make_field(grid), make_field(grid), ReflectionLedger::zeros(grid), std::nullopt};
    for (std::size_t i = 0; i < grid.nx; ++i) sol.x(0, i) = v(0, i);
    std::vector<double> work(grid.nx);
    for (std::size_t k = 0; k < grid.nt; ++k) {
        auto cur = sol.xi.row(k);
        std::copy(cur.begin(), cur.end(), work.begin());
        detail::apply_drift(work, k, grid.dt, g, opts.treatment);
        heat.solve_in_place(work);
        detail::guard(work, opts.overflow_guard, grid.dt);
        for (std::size_t i = 0; i < grid.nx; ++i) {
            const double u = work[i] + v(k + 1, i);
            const double l1 = walls.lambda1(k + 1, i);
            const double l2 = walls.lambda2(k + 1, i);
            double x = u;
            if (u < l1) {
                sol.ledger.upsilon_mass(k + 1, i) = (l1 - u) * grid.dx;
                x = l1;
            } else if (u > l2) {
                sol.ledger.gamma_mass(k + 1, i) = (u - l2) * grid.dx;
                x = l2;
            }
            if (!(x >= l1 && x <= l2)) throw InvariantError("obstacle: state outside the walls after projection");
            sol.x(k + 1, i) = x;
            sol.xi(k + 1, i) = x - v(k + 1, i);
        }
    }
    return sol;
}

/// Single regularization level (spec.eps1, spec.eps2).
inline ObstacleSolution solve_obstacle(const SpaceTimeField& v, const WallPair& walls, const SingularDriftSpec& spec,
                                       const Grid& grid, const ObstacleOptions& opts = {}) {
    spec.validate();
    return solve_obstacle_with(v, walls, singular_drift_handle(spec, v, walls), grid, opts);
}

/// Runs the eps schedule and returns the last level's solution with the monotone-limit diagnostics.
inline ObstacleSolution solve_obstacle(const SpaceTimeField& v, const WallPair& walls, const SingularDriftSpec& spec,
                                       const Grid& grid, const EpsSchedule& schedule, const ObstacleOptions& opts = {},
                                       double tol = 1e-8) {
    if (schedule.eps1_levels.empty() || schedule.eps2_levels.empty()) throw ConfigError("EpsSchedule: empty level list");
    ScheduleReport report;
    std::optional<ObstacleSolution> prev;
    double prev_e1 = 0.0;
    double prev_e2 = 0.0;

    auto run_level = [&](double e1, double e2, int changed) -> bool {
        SingularDriftSpec s = spec;
        s.eps1 = e1;
        s.eps2 = e2;
        ObstacleSolution cur = solve_obstacle(v, walls, s, grid, opts);
        ScheduleLevel lvl{e1, e2, changed, 0.0, true, 0.0};
        if (prev) {
            lvl.sup_change = sup_distance(cur.xi, prev->xi);
            auto a = cur.xi.values();
            auto b = prev->xi.values();
            for (std::size_t j = 0; j < a.size(); ++j) {
                double v1 = 0.0;
                double v2 = 0.0;
                if (changed == 1) {
                    v1 = b[j] - a[j];                  // Xi must not decrease
                    v2 = (a[j] + e1) - (b[j] + prev_e1);  // Xi + eps1 must not increase
                } else {
                    v1 = a[j] - b[j];                  // Xi must not increase
                    v2 = (b[j] - prev_e2) - (a[j] - e2);  // Xi - eps2 must not decrease
                }
                lvl.worst_violation = std::max({lvl.worst_violation, v1, v2});
            }
            lvl.monotone = lvl.worst_violation <= tol;
        }
        report.levels.push_back(lvl);
        prev = std::move(cur);
        prev_e1 = e1;
        prev_e2 = e2;
        return lvl.changed != 0 && lvl.sup_change < schedule.stop_tolerance;
    };

    const double e2_first = schedule.eps2_levels.front();
    std::size_t done = 0;
    for (double e1 : schedule.eps1_levels) {
        const bool small = run_level(e1, e2_first, done == 0 ? 0 : 1);
        ++done;
        if (small && done >= schedule.min_levels) break;
    }
    const double e1_last = prev_e1;
    done = 1;
    for (std::size_t j = 1; j < schedule.eps2_levels.size(); ++j) {
        const bool small = run_level(e1_last, schedule.eps2_levels[j], 2);
        ++done;
        if (small && done >= schedule.min_levels) break;
    }
    prev->schedule = std::move(report);
    return std::move(*prev);
}

struct ComplementarityResidual {
    double r1 = 0.0;
    double r2 = 0.0;
};

/// r1 = sum (X - L1) * upsilon_mass, r2 = sum (L2 - X) * gamma_mass over all cells and steps.
inline ComplementarityResidual complementarity_residual(const SpaceTimeField& x, const WallPair& walls,
                                                        const ReflectionLedger& ledger, const Grid& grid) {
    (void)grid;
    const std::size_t rows = std::min({x.rows(), ledger.upsilon_mass.rows(), walls.lambda1.rows()});
    if (x.cols() != walls.lambda1.cols() || x.cols() != ledger.upsilon_mass.cols()) {
        throw ConfigError("complementarity_residual: shape mismatch");
    }
    ComplementarityResidual r;
    for (std::size_t k = 0; k < rows; ++k)
        for (std::size_t i = 0; i < x.cols(); ++i) {
            const double up = ledger.upsilon_mass(k, i);
            const double dn = ledger.gamma_mass(k, i);
            if (up != 0.0) r.r1 += (x(k, i) - walls.lambda1(k, i)) * up;
            if (dn != 0.0) r.r2 += (walls.lambda2(k, i) - x(k, i)) * dn;
        }
    return r;
}

struct ContractionResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

/// Solves with v and v_hat and compares sup|Xi - Xi_hat| against sup|v - v_hat|.
inline ContractionResult contraction_check(const SpaceTimeField& v, const SpaceTimeField& v_hat, const WallPair& walls,
                                           const SingularDriftSpec& spec, const Grid& grid, double tol = 1e-8,
                                           const ObstacleOptions& opts = {}) {
    const auto a = solve_obstacle(v, walls, spec, grid, opts);
    const auto b = solve_obstacle(v_hat, walls, spec, grid, opts);
    ContractionResult r;
    r.lhs = sup_distance(a.xi, b.xi);
    r.rhs = sup_distance(v, v_hat);
    r.pass = r.lhs <= r.rhs + tol;
    return r;
}

}  // namespace twowall
