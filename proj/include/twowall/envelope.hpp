#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "twowall/coefficients.hpp"
#include "twowall/drift.hpp"
#include "twowall/error.hpp"
#include "twowall/grid.hpp"
#include "twowall/heat_operator.hpp"
#include "twowall/noise.hpp"
#include "twowall/spde.hpp"
#include "twowall/walls.hpp"

namespace twowall {

struct EnvelopeOptions {
    /// Defaults to the midpoint of (1/(theta+1), 1/4).
    std::optional<double> kappa;
    /// Multiplies delta^{1 - kappa(1+theta)} 2^{-3 - 2 theta + kappa(theta+2)}.
    double threshold_constant = 1.0;
    /// L: chi is clipped to chi ^ L inside the block convolution N.
    double chi_clip = std::numeric_limits<double>::infinity();
    SimulationOptions sim{};
};

struct EnvelopeBlock {
    /// min / max over the block of w - L1.
    double min_gap = 0.0;
    double max_gap = 0.0;
    bool left_corridor = false;
    /// sup over the block of |N| / (t - k beta)^kappa.
    double n_ratio = 0.0;
    bool n_exceeds = false;
};

struct EnvelopeReport {
    double delta = 0.0;
    double beta = 0.0;
    double kappa = 0.0;
    double threshold = 0.0;
    std::size_t blocks = 0;
    std::size_t steps_per_block = 0;
    double T_used = 0.0;
    double dt_used = 0.0;
    std::vector<EnvelopeBlock> per_block;
    double corridor_exit_fraction = 0.0;
    double n_exceed_fraction = 0.0;
};

/// Block length 2^{-theta-2} delta^{1+theta}.
inline double restart_beta(double theta, double delta) {
    return std::pow(2.0, -theta - 2.0) * std::pow(delta, 1.0 + theta);
}

/**
 * Restarted clipped-drift run: w := L1 + delta at every t = k beta, beta = 2^{-theta-2} delta^{1+theta}.
 *
 * The horizon is cut to M beta with M = floor(T / beta); each block gets
 * floor(beta / dt) >= 10 steps of size beta / steps. Alongside w the block
 * stochastic convolution N (zero at the block start, same noise) is advanced
 * with the same implicit heat step.
 */
inline EnvelopeReport simulate_restart_envelope(const WallProfile& walls, const CoefficientSpec& coeff,
                                                const SingularDriftSpec& spec, double delta, const Grid& grid,
                                                NoiseStream& stream, const EnvelopeOptions& opts = {}) {
    if (!(spec.theta > 3.0)) throw ConfigError("restart envelope needs theta > 3");
    if (!(delta > 0.0)) throw ConfigError("restart envelope needs delta > 0");
    const double theta = spec.theta;
    const double kappa = opts.kappa.value_or(0.5 * (1.0 / (theta + 1.0) + 0.25));
    if (!(kappa > 1.0 / (theta + 1.0) && kappa < 0.25)) throw ConfigError("kappa must lie in (1/(theta+1), 1/4)");

    EnvelopeReport rep;
    rep.delta = delta;
    rep.beta = restart_beta(theta, delta);
    rep.kappa = kappa;
    rep.threshold = opts.threshold_constant * std::pow(delta, 1.0 - kappa * (1.0 + theta)) *
                    std::pow(2.0, -3.0 - 2.0 * theta + kappa * (theta + 2.0));
    if (rep.beta < 10.0 * grid.dt) {
        throw ResolutionError("beta = " + brief(rep.beta) + " is below 10 dt; use dt <= " +
                              brief(rep.beta / 10.0));
    }
    rep.blocks = static_cast<std::size_t>(std::floor(grid.T / rep.beta * (1.0 + 1e-12)));
    if (rep.blocks == 0) throw ResolutionError("T is shorter than one block of length beta");
    rep.steps_per_block = static_cast<std::size_t>(std::floor(rep.beta / grid.dt * (1.0 + 1e-12)));
    rep.T_used = static_cast<double>(rep.blocks) * rep.beta;
    const Grid g = make_grid(grid.domain_kind, static_cast<long long>(grid.nx), rep.T_used,
                             static_cast<long long>(rep.blocks * rep.steps_per_block));
    rep.dt_used = g.dt;
    const WallPair w = sample_walls(walls, g);
    const Integrator integ(g, w, coeff, spec, SimMode::clipped, opts.sim);
    const ImplicitHeatOperator heat(g, g.dt);
    const double scale = std::sqrt(g.dt / g.dx);
    const double clip = opts.chi_clip;

    std::vector<double> state(g.nx), nconv(g.nx), xi(g.nx), up(g.nx), down(g.nx);
    std::size_t exits = 0;
    std::size_t exceed = 0;
    for (std::size_t b = 0; b < rep.blocks; ++b) {
        const std::size_t k0 = b * rep.steps_per_block;
        for (std::size_t i = 0; i < g.nx; ++i) {
            state[i] = w.lambda1(k0, i) + delta;
            nconv[i] = 0.0;
        }
        EnvelopeBlock blk{delta, delta, false, 0.0, false};
        for (std::size_t s = 0; s < rep.steps_per_block; ++s) {
            const std::size_t k = k0 + s;
            const double t = g.time(k);
            stream.fill_normals(xi);
            for (std::size_t i = 0; i < g.nx; ++i) {
                const double c = std::min(coeff.chi(g.x_coords[i], t, state[i]), clip);
                nconv[i] += c * xi[i] * scale;
            }
            heat.solve_in_place(nconv);
            integ.step(state, k, xi, up, down);
            const double elapsed = g.time(k + 1) - g.time(k0);
            const double denom = std::pow(elapsed, kappa);
            for (std::size_t i = 0; i < g.nx; ++i) {
                const double gap = state[i] - w.lambda1(k + 1, i);
                blk.min_gap = std::min(blk.min_gap, gap);
                blk.max_gap = std::max(blk.max_gap, gap);
                blk.n_ratio = std::max(blk.n_ratio, std::fabs(nconv[i]) / denom);
            }
        }
        blk.left_corridor = blk.min_gap < 0.5 * delta || blk.max_gap > 2.0 * delta;
        blk.n_exceeds = blk.n_ratio > rep.threshold;
        exits += blk.left_corridor ? 1 : 0;
        exceed += blk.n_exceeds ? 1 : 0;
        rep.per_block.push_back(blk);
    }
    rep.corridor_exit_fraction = static_cast<double>(exits) / static_cast<double>(rep.blocks);
    rep.n_exceed_fraction = static_cast<double>(exceed) / static_cast<double>(rep.blocks);
    return rep;
}

}  // namespace twowall
