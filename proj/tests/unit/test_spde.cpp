#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "twowall/envelope.hpp"
#include "twowall/greens.hpp"
#include "twowall/obstacle.hpp"
#include "twowall/spde.hpp"

using namespace twowall;

namespace {

CoefficientSpec noisy(double chi, Coefficient f = {}) { return {f, Coefficient::parse("constant", chi), std::nullopt}; }

bool bitwise_equal(const SpaceTimeField& a, const SpaceTimeField& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t j = 0; j < a.values().size(); ++j)
        if (std::memcmp(&a.values()[j], &b.values()[j], sizeof(double)) != 0) return false;
    return true;
}

}  // namespace

TEST(StepReflected, Equilibrium) {
    const Grid g = make_grid(DomainKind::circle, 16, 1.0, 100);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const std::vector<double> zero(g.nx, 0.0);
    const auto r = step_reflected(zero, 0, w, deterministic_coefficients(), SingularDriftSpec{}, zero, g);
    for (std::size_t i = 0; i < g.nx; ++i) {
        EXPECT_EQ(r.state[i], 0.0);
        EXPECT_EQ(r.upsilon[i], 0.0);
        EXPECT_EQ(r.gamma[i], 0.0);
    }
}

TEST(StepReflected, ForcedBreachLandsOnUpperWall) {
    const Grid g = make_grid(DomainKind::circle, 16, 1.0, 100);
    const WallPair w = constant_walls(g, -0.1, 0.1);
    const std::vector<double> zero(g.nx, 0.0);
    const auto r = step_reflected(zero, 0, w, deterministic_coefficients(Coefficient::parse("constant", 100.0)),
                                  SingularDriftSpec{}, zero, g);
    // Constant input is a fixed point of the heat solve, so X~ = dt f = 1.
    for (std::size_t i = 0; i < g.nx; ++i) {
        EXPECT_EQ(r.state[i], 0.1);
        EXPECT_NEAR(r.gamma[i], (1.0 - 0.1) * g.dx, 1e-14);
        EXPECT_EQ(r.upsilon[i], 0.0);
    }
}

TEST(StepReflected, LinearInNoise) {
    const Grid g = make_grid(DomainKind::interval_dirichlet, 31, 1.0, 200);
    const WallPair w = constant_walls(g, -1e9, 1e9);
    const auto coeff = noisy(0.7);
    std::vector<double> x(g.nx), xi(g.nx), zero(g.nx, 0.0);
    NoiseStream s = derive_stream(5, 0);
    s.fill_normals(xi);
    for (std::size_t i = 0; i < g.nx; ++i) x[i] = std::sin(std::numbers::pi * g.x_coords[i]);
    const auto a = step_reflected(x, 3, w, coeff, SingularDriftSpec{}, xi, g);
    const auto b = step_reflected(x, 3, w, coeff, SingularDriftSpec{}, zero, g);
    std::vector<double> image(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) image[i] = 0.7 * xi[i] * std::sqrt(g.dt / g.dx);
    ImplicitHeatOperator(g, g.dt).solve_in_place(image);
    for (std::size_t i = 0; i < g.nx; ++i) EXPECT_NEAR(a.state[i] - b.state[i], image[i], 1e-12);
}

TEST(StepReflected, RejectsBadIndexOrSize) {
    const Grid g = make_grid(DomainKind::circle, 8, 1.0, 10);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const std::vector<double> zero(g.nx, 0.0);
    EXPECT_THROW(step_reflected(zero, 10, w, noisy(1.0), SingularDriftSpec{}, zero, g), ConfigError);
    EXPECT_THROW(step_reflected(std::vector<double>(3), 0, w, noisy(1.0), SingularDriftSpec{}, zero, g), ConfigError);
}

TEST(SimulateReflected, DeterministicHeatMatchesKernel) {
    const Grid g = make_grid(DomainKind::interval_dirichlet, 127, 0.01, 1000);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    std::vector<double> x0(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) x0[i] = 0.5 * std::sin(std::numbers::pi * g.x_coords[i]) * (1.0 + g.x_coords[i]);
    NoiseStream s = derive_stream(1, 0);
    const auto p = simulate_reflected(x0, w, deterministic_coefficients(), SingularDriftSpec{}, g, s);
    const auto ref = heat_convolve(x0, 0.01, g);
    for (std::size_t i = 0; i < g.nx; ++i) EXPECT_NEAR(p.X(g.nt, i), ref[i], 1e-3);
    EXPECT_EQ(p.ledger.total_upsilon() + p.ledger.total_gamma(), 0.0);
}

// Variance of the free stochastic heat equation at t = 0.1 against int_0^t int G^2.
TEST(SimulateReflected, FreeVarianceMatchesKernelIntegral) {
    const Grid g = make_grid(DomainKind::circle, 64, 0.1, 400);
    const WallPair w = constant_walls(g, -1e9, 1e9);
    const auto x0 = constant_state(g, 0.0);
    const Integrator integ(g, w, noisy(1.0), SingularDriftSpec{}, SimMode::reflected);
    const std::size_t mid = g.nx / 2;
    double sq = 0.0;
    const int paths = 500;
    for (int n = 0; n < paths; ++n) {
        NoiseStream s = derive_stream(77, n);
        double last = 0.0;
        run_path(integ, x0, s, [&](std::size_t k, std::span<const double> st, auto, auto) {
            if (k == g.nt) last = st[mid];
            return true;
        });
        sq += last * last;
    }
    const double expected = green_power_integral(2.0, 0.1, g);
    EXPECT_NEAR(sq / paths, expected, 0.15 * expected);
}

TEST(SimulateReflected, StaysBetweenWalls) {
    const Grid g = make_grid(DomainKind::circle, 32, 0.2, 2000);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const SingularDriftSpec spec{1.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0};
    for (int n = 0; n < 5; ++n) {
        NoiseStream s = derive_stream(3, n);
        const auto p = simulate_reflected(constant_state(g, 0.0), w, noisy(2.0), spec, g, s);
        for (std::size_t k = 0; k <= g.nt; ++k)
            for (std::size_t i = 0; i < g.nx; ++i) {
                ASSERT_GE(p.X(k, i), -1.0);
                ASSERT_LE(p.X(k, i), 1.0);
            }
        EXPECT_TRUE(p.ledger.well_formed());
        const auto r = complementarity_residual(p.X, w, p.ledger, g);
        EXPECT_EQ(r.r1, 0.0);
        EXPECT_EQ(r.r2, 0.0);
        EXPECT_GE(p.drift.floor_delta, g.dx / 10.0);
    }
}

TEST(SimulateReflected, SeedDeterminism) {
    const Grid g = make_grid(DomainKind::circle, 16, 0.1, 500);
    const WallPair w = constant_walls(g, -0.5, 0.5);
    const SingularDriftSpec spec{1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    NoiseStream a = derive_stream(9, 2), b = derive_stream(9, 2), c = derive_stream(9, 3);
    const auto pa = simulate_reflected(constant_state(g, 0.0), w, noisy(1.0), spec, g, a);
    const auto pb = simulate_reflected(constant_state(g, 0.0), w, noisy(1.0), spec, g, b);
    const auto pc = simulate_reflected(constant_state(g, 0.0), w, noisy(1.0), spec, g, c);
    EXPECT_TRUE(bitwise_equal(pa.X, pb.X));
    EXPECT_TRUE(bitwise_equal(pa.ledger.gamma_mass, pb.ledger.gamma_mass));
    EXPECT_FALSE(bitwise_equal(pa.X, pc.X));
}

TEST(SimulateReflected, InvalidInitialState) {
    const Grid g = make_grid(DomainKind::circle, 8, 1.0, 10);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    NoiseStream s = derive_stream(1, 0);
    EXPECT_THROW(simulate_reflected(constant_state(g, 1.5), w, noisy(1.0), SingularDriftSpec{}, g, s), ConfigError);
    EXPECT_THROW(simulate_reflected(std::vector<double>(3, 0.0), w, noisy(1.0), SingularDriftSpec{}, g, s), ConfigError);
    // Touching a wall is allowed.
    EXPECT_NO_THROW(simulate_reflected(constant_state(g, 1.0), w, noisy(1.0), SingularDriftSpec{}, g, s));
}

TEST(SimulateClipped, SymmetricEnsembleMeanNearZero) {
    const Grid g = make_grid(DomainKind::circle, 32, 0.1, 500);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const SingularDriftSpec spec{1.0, 1.0, 2.0, 0.0, 0.0, 0.025, 0.025};
    const auto x0 = constant_state(g, 0.0);
    const Integrator integ(g, w, noisy(1.0), spec, SimMode::clipped);
    const int paths = 200;
    std::vector<double> sum(g.nx, 0.0), sq(g.nx, 0.0);
    for (int n = 0; n < paths; ++n) {
        NoiseStream s = derive_stream(21, n);
        run_path(integ, x0, s, [&](std::size_t k, std::span<const double> st, auto, auto) {
            if (k == g.nt)
                for (std::size_t i = 0; i < g.nx; ++i) {
                    sum[i] += st[i];
                    sq[i] += st[i] * st[i];
                }
            return true;
        });
    }
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double mean = sum[i] / paths;
        const double se = std::sqrt((sq[i] / paths - mean * mean) / paths);
        EXPECT_LE(std::fabs(mean), 3.0 * se + 1e-12) << "cell " << i;
    }
}

TEST(SimulateClipped, NoDriftMatchesFarWallsBitwise) {
    const Grid g = make_grid(DomainKind::circle, 32, 0.1, 400);
    const WallPair near = constant_walls(g, -1.0, 1.0);
    const WallPair far = constant_walls(g, -1e9, 1e9);
    NoiseStream a = derive_stream(4, 0), b = derive_stream(4, 0);
    const auto pc = simulate_clipped(constant_state(g, 0.0), near, noisy(1.0), SingularDriftSpec{}, g, a);
    const auto pr = simulate_reflected(constant_state(g, 0.0), far, noisy(1.0), SingularDriftSpec{}, g, b);
    EXPECT_TRUE(bitwise_equal(pc.X, pr.X));
    EXPECT_EQ(pc.ledger.total_upsilon() + pc.ledger.total_gamma(), 0.0);
}

TEST(SimulateClipped, RequiresFloors) {
    const Grid g = make_grid(DomainKind::circle, 8, 1.0, 10);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    NoiseStream s = derive_stream(1, 0);
    EXPECT_THROW(simulate_clipped(constant_state(g, 0.0), w, noisy(1.0), SingularDriftSpec{1.0, 1.0, 2.0, 0, 0, 0, 0}, g, s),
                 ConfigError);
}

TEST(SimulateClipped, SteepRepulsionRarelyNearWalls) {
    const Grid g = make_grid(DomainKind::circle, 32, 0.5, 5000);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const SingularDriftSpec spec{1.0, 1.0, 4.0, 0.0, 0.0, 0.025, 0.025};
    const Integrator integ(g, w, noisy(1.0), spec, SimMode::clipped);
    int close = 0;
    const int paths = 100;
    for (int n = 0; n < paths; ++n) {
        NoiseStream s = derive_stream(8, n);
        double m = 1e300;
        run_path(integ, constant_state(g, 0.0), s, [&](std::size_t k, std::span<const double> st, auto, auto) {
            for (std::size_t i = 0; i < g.nx; ++i) m = std::min({m, st[i] - w.lambda1(k, i), w.lambda2(k, i) - st[i]});
            return true;
        });
        close += m < 0.025;
    }
    EXPECT_LE(close, 5);
}

TEST(SimulateSingleWall, StrongRepulsionNeverStops) {
    const Grid g = make_grid(DomainKind::circle, 32, 1.0, 4000);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const SingularDriftSpec spec{10.0, 0.0, 1.0, 0.0, 0.0, 1e-3, 0.0};
    for (int n = 0; n < 5; ++n) {
        NoiseStream s = derive_stream(12, n);
        const auto p = simulate_single_wall(constant_state(g, 0.0), w, noisy(0.1), spec, g, s);
        EXPECT_FALSE(p.stop_step) << "path " << n;
        EXPECT_EQ(p.drift.c2, 0.0);
    }
}

TEST(SimulateSingleWall, DeterministicGapGrows) {
    const Grid g = make_grid(DomainKind::circle, 16, 1.0, 200);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    NoiseStream s = derive_stream(1, 0);
    const auto p = simulate_single_wall(constant_state(g, 0.0), w, deterministic_coefficients(),
                                        SingularDriftSpec{1.0, 1.0, 2.0, 0.0, 0.0, 1e-3, 1e-3}, g, s);
    EXPECT_FALSE(p.stop_step);
    for (std::size_t k = 1; k <= g.nt; ++k) EXPECT_GT(p.X(k, 0), p.X(k - 1, 0));
}

TEST(SimulateSingleWall, StopsAtThresholdAndRequiresStrictGap) {
    const Grid g = make_grid(DomainKind::circle, 16, 1.0, 1000);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    SimulationOptions o;
    o.stop_threshold = 0.5;
    NoiseStream s = derive_stream(1, 0);
    const auto p = simulate_single_wall(constant_state(g, 0.0), w,
                                        deterministic_coefficients(Coefficient::parse("constant", -2.0)),
                                        SingularDriftSpec{}, g, s, o);
    ASSERT_TRUE(p.stop_step);
    EXPECT_EQ(p.X.rows(), *p.stop_step + 1);
    EXPECT_NEAR(g.time(*p.stop_step), 0.25, 2.0 * g.dt);
    EXPECT_THROW(simulate_single_wall(constant_state(g, -1.0), w, noisy(1.0), SingularDriftSpec{}, g, s), ConfigError);
}

TEST(SimulateSingleWall, BoundsTwoWallSolutionFromAbove) {
    const Grid g = make_grid(DomainKind::circle, 32, 0.2, 2000);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const SingularDriftSpec spec{1.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0};
    for (int n = 0; n < 20; ++n) {
        NoiseStream a = derive_stream(30, n), b = derive_stream(30, n);
        const auto x = simulate_reflected(constant_state(g, 0.0), w, noisy(1.0), spec, g, a);
        const auto v = simulate_single_wall(constant_state(g, 0.0), w, noisy(1.0), spec, g, b);
        for (std::size_t k = 0; k < v.X.rows(); ++k)
            for (std::size_t i = 0; i < g.nx; ++i) ASSERT_LE(x.X(k, i), v.X(k, i) + 1e-8) << n << " " << k << " " << i;
    }
}

TEST(SimMode, ParseAndPrint) {
    EXPECT_EQ(parse_sim_mode("reflected"), SimMode::reflected);
    EXPECT_EQ(parse_sim_mode("clipped"), SimMode::clipped);
    EXPECT_EQ(parse_sim_mode("single-wall"), SimMode::single_wall);
    EXPECT_EQ(to_string(SimMode::single_wall), "single-wall");
    EXPECT_THROW(parse_sim_mode("bouncy"), ConfigError);
}

TEST(RestartEnvelope, BlockArithmetic) {
    const double theta = 4.0, delta = 0.2;
    const double beta = restart_beta(theta, delta);
    EXPECT_NEAR(beta, std::pow(2.0, -6.0) * std::pow(0.2, 5.0), 1e-18);
    const Grid g = make_grid(DomainKind::circle, 16, 7.5 * beta, 7500);
    NoiseStream s = derive_stream(1, 0);
    const SingularDriftSpec spec{1.0, 1.0, theta, 0.0, 0.0, delta / 2, delta / 2};
    const auto rep = simulate_restart_envelope(constant_wall_profile(-1.0, 1.0), deterministic_coefficients(), spec,
                                               delta, g, s);
    EXPECT_EQ(rep.blocks, 7u);
    EXPECT_EQ(rep.per_block.size(), 7u);
    EXPECT_NEAR(rep.T_used, 7.0 * beta, 1e-18);
    EXPECT_EQ(rep.steps_per_block, 1000u);
    EXPECT_DOUBLE_EQ(rep.kappa, 0.5 * (0.2 + 0.25));
}

TEST(RestartEnvelope, DeterministicCorridor) {
    for (double delta : {0.2, 0.1, 0.05}) {
        const double beta = restart_beta(4.0, delta);
        const Grid g = make_grid(DomainKind::circle, 16, 20.0 * beta, 400);
        NoiseStream s = derive_stream(1, 0);
        const SingularDriftSpec spec{1.0, 1.0, 4.0, 0.0, 0.0, delta / 2, delta / 2};
        const auto rep = simulate_restart_envelope(constant_wall_profile(-1.0, 1.0), deterministic_coefficients(), spec,
                                                   delta, g, s);
        EXPECT_EQ(rep.corridor_exit_fraction, 0.0) << "delta=" << delta;
        for (const auto& b : rep.per_block) {
            EXPECT_GE(b.min_gap, delta / 2);
            EXPECT_LE(b.max_gap, 2 * delta);
            EXPECT_EQ(b.n_ratio, 0.0);
        }
    }
}

TEST(RestartEnvelope, ExitFractionDoesNotGrowAsDeltaShrinks) {
    double prev = 2.0;
    for (double delta : {0.05, 0.025}) {
        const double beta = restart_beta(4.0, delta);
        const Grid g = make_grid(DomainKind::circle, 16, 10.0 * beta, 200);
        const SingularDriftSpec spec{1.0, 1.0, 4.0, 0.0, 0.0, delta / 2, delta / 2};
        double total = 0.0;
        for (int n = 0; n < 50; ++n) {
            NoiseStream s = derive_stream(50, n);
            total += simulate_restart_envelope(constant_wall_profile(-1.0, 1.0), noisy(1.0), spec, delta, g, s)
                         .corridor_exit_fraction;
        }
        EXPECT_LE(total / 50, prev);
        prev = total / 50;
    }
}

TEST(RestartEnvelope, Errors) {
    const Grid g = make_grid(DomainKind::circle, 16, 1.0, 100);
    NoiseStream s = derive_stream(1, 0);
    const SingularDriftSpec spec{1.0, 1.0, 4.0, 0.0, 0.0, 0.01, 0.01};
    EXPECT_THROW(simulate_restart_envelope(constant_wall_profile(-1.0, 1.0), noisy(1.0), spec, 0.05, g, s),
                 ResolutionError);
    SingularDriftSpec low = spec;
    low.theta = 2.0;
    EXPECT_THROW(simulate_restart_envelope(constant_wall_profile(-1.0, 1.0), noisy(1.0), low, 0.05, g, s), ConfigError);
    EnvelopeOptions o;
    o.kappa = 0.3;
    EXPECT_THROW(simulate_restart_envelope(constant_wall_profile(-1.0, 1.0), noisy(1.0), spec, 0.05, g, s, o),
                 ConfigError);
}
