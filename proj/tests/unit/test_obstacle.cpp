#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "twowall/obstacle.hpp"

using namespace twowall;

namespace {

SpaceTimeField field_from(const Grid& g, auto fn) {
    SpaceTimeField v = make_field(g);
    for (std::size_t k = 0; k <= g.nt; ++k)
        for (std::size_t i = 0; i < g.nx; ++i) v(k, i) = fn(g.x_coords[i], g.time(k));
    return v;
}

// Sum of up to four Fourier modes in x, growing linearly in t, with sup <= amplitude.
SpaceTimeField random_smooth_v(const Grid& g, std::mt19937_64& rng, double amplitude) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> modes(1, 4);
    const int m = modes(rng);
    std::vector<double> a(m), phase(m);
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
        a[j] = u(rng);
        phase[j] = std::numbers::pi * u(rng);
        total += std::fabs(a[j]);
    }
    const double scale = amplitude * std::fabs(u(rng)) / total;
    return field_from(g, [&](double x, double t) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += a[j] * std::sin(2.0 * std::numbers::pi * (j + 1) * x + phase[j]);
        return scale * s * t / g.T;
    });
}

double max_diff_above(const SpaceTimeField& a, const SpaceTimeField& b) {
    double worst = -1e300;
    for (std::size_t j = 0; j < a.values().size(); ++j) worst = std::max(worst, a.values()[j] - b.values()[j]);
    return worst;
}

}  // namespace

TEST(SolveObstacle, NoForcingStaysAtZero) {
    const Grid g = make_grid(DomainKind::circle, 32, 1.0, 200);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const auto sol = solve_obstacle(make_field(g), w, SingularDriftSpec{}, g);
    for (double v : sol.xi.values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(sol.ledger.total_upsilon(), 0.0);
    EXPECT_EQ(sol.ledger.total_gamma(), 0.0);
}

TEST(SolveObstacle, UniformRiseIsCappedAtUpperWall) {
    const Grid g = make_grid(DomainKind::circle, 16, 1.0, 1000);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const auto v = field_from(g, [](double, double t) { return 2.0 * t; });
    const auto sol = solve_obstacle(v, w, SingularDriftSpec{}, g);
    for (std::size_t k = 0; k <= g.nt; ++k) {
        const double t = g.time(k);
        for (std::size_t i = 0; i < g.nx; ++i) {
            EXPECT_NEAR(sol.x(k, i), std::min(2.0 * t, 1.0), 1e-12);
            EXPECT_EQ(sol.ledger.upsilon_mass(k, i), 0.0);
            if (2.0 * t <= 1.0 + 1e-12) {
                EXPECT_EQ(sol.ledger.gamma_mass(k, i), 0.0);
            } else {
                EXPECT_GT(sol.ledger.gamma_mass(k, i), 0.0);
            }
        }
    }
    // Mass pushed down equals the rise suppressed after t = 0.5.
    EXPECT_NEAR(sol.ledger.total_gamma(), 1.0, 1e-9);
    EXPECT_TRUE(sol.ledger.well_formed());
}

TEST(SolveObstacle, ProjectionLedgerIsComplementary) {
    const Grid g = make_grid(DomainKind::interval_dirichlet, 31, 0.5, 500);
    const WallPair w = constant_walls(g, -0.2, 0.2);
    const auto v = field_from(g, [](double x, double t) { return 3.0 * t * std::sin(2.0 * std::numbers::pi * x); });
    const auto sol = solve_obstacle(v, w, SingularDriftSpec{1.0, 1.0, 1.0, 1e-3, 1e-3, 0.0, 0.0}, g);
    EXPECT_GT(sol.ledger.total_upsilon(), 0.0);
    EXPECT_GT(sol.ledger.total_gamma(), 0.0);
    const auto r = complementarity_residual(sol.x, w, sol.ledger, g);
    EXPECT_EQ(r.r1, 0.0);
    EXPECT_EQ(r.r2, 0.0);
    for (std::size_t k = 0; k <= g.nt; ++k)
        for (std::size_t i = 0; i < g.nx; ++i) {
            EXPECT_GE(sol.x(k, i), w.lambda1(k, i));
            EXPECT_LE(sol.x(k, i), w.lambda2(k, i));
        }
}

TEST(SolveObstacle, RejectsBadInputs) {
    const Grid g = make_grid(DomainKind::circle, 8, 1.0, 10);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const auto outside = field_from(g, [](double, double) { return 2.0; });
    EXPECT_THROW(solve_obstacle(outside, w, SingularDriftSpec{}, g), ConfigError);
    EXPECT_THROW(solve_obstacle(SpaceTimeField(3, 8), w, SingularDriftSpec{}, g), ConfigError);
    EXPECT_THROW(solve_obstacle(make_field(g), w, SingularDriftSpec{1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0}, g), ConfigError);
}

TEST(Complementarity, EmptyAndHandBuilt) {
    const Grid g = make_grid(DomainKind::circle, 4, 1.0, 2);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    SpaceTimeField x = make_field(g);
    auto ledger = ReflectionLedger::zeros(g);
    auto r = complementarity_residual(x, w, ledger, g);
    EXPECT_EQ(r.r1, 0.0);
    EXPECT_EQ(r.r2, 0.0);
    x(1, 2) = -0.7;
    ledger.upsilon_mass(1, 2) = 1.0;
    x(2, 0) = 0.5;
    ledger.gamma_mass(2, 0) = 2.0;
    r = complementarity_residual(x, w, ledger, g);
    EXPECT_NEAR(r.r1, 0.3, 1e-15);
    EXPECT_NEAR(r.r2, 1.0, 1e-15);
}

TEST(EpsSchedule, ThreeLevelMonotoneLimit) {
    const Grid g = make_grid(DomainKind::circle, 32, 0.2, 400);
    const WallPair w = constant_walls(g, -0.5, 0.5);
    const auto v = field_from(g, [](double x, double t) { return 2.0 * t * std::sin(2.0 * std::numbers::pi * x); });
    EpsSchedule sched;
    sched.eps1_levels = {0.1, 0.05, 0.025};
    sched.eps2_levels = {0.1};
    sched.stop_tolerance = 0.0;
    const SingularDriftSpec spec{0.05, 0.05, 1.0, 0.0, 0.0, 0.0, 0.0};
    const auto sol = solve_obstacle(v, w, spec, g, sched);
    ASSERT_TRUE(sol.schedule);
    ASSERT_EQ(sol.schedule->levels.size(), 3u);
    EXPECT_EQ(sol.schedule->levels[1].changed, 1);
    for (const auto& l : sol.schedule->levels) EXPECT_LE(l.worst_violation, 1e-8) << "eps1=" << l.eps1;
    EXPECT_TRUE(sol.schedule->monotone());
    EXPECT_GT(sol.schedule->levels[2].sup_change, 0.0);
}

TEST(EpsSchedule, DirectionsOfBothRegularizers) {
    const Grid g = make_grid(DomainKind::interval_dirichlet, 31, 0.2, 400);
    const WallPair w = constant_walls(g, -0.4, 0.4);
    const auto v = field_from(g, [](double x, double t) { return 1.5 * t * std::sin(3.0 * std::numbers::pi * x); });
    const SingularDriftSpec base{0.02, 0.02, 2.0, 0.0, 0.0, 0.0, 0.0};
    auto at = [&](double e1, double e2) {
        SingularDriftSpec s = base;
        s.eps1 = e1;
        s.eps2 = e2;
        return solve_obstacle(v, w, s, g).xi;
    };
    const auto a = at(0.1, 0.1), b = at(0.05, 0.1), c = at(0.05, 0.05);
    // eps1 down: Xi up, Xi + eps1 down.
    EXPECT_LE(max_diff_above(a, b), 1e-8);
    EXPECT_LE(max_diff_above(b, a) - 0.05, 1e-8);
    // eps2 down: Xi down, Xi - eps2 up.
    EXPECT_LE(max_diff_above(c, b), 1e-8);
    EXPECT_LE(max_diff_above(b, c) - 0.05, 1e-8);

    const auto sched = solve_obstacle(v, w, base, g, EpsSchedule::halving(0.1, 0.1, 4));
    EXPECT_TRUE(sched.schedule->monotone());
    bool saw_two = false;
    for (const auto& l : sched.schedule->levels) saw_two |= l.changed == 2;
    EXPECT_TRUE(saw_two);
}

TEST(EpsSchedule, EmptyLevelsRejected) {
    const Grid g = make_grid(DomainKind::circle, 8, 1.0, 10);
    EXPECT_THROW(solve_obstacle(make_field(g), constant_walls(g, -1.0, 1.0), SingularDriftSpec{}, g, EpsSchedule{}),
                 ConfigError);
}

TEST(Contraction, IdentityAndConstantShift) {
    const Grid g = make_grid(DomainKind::circle, 32, 0.5, 250);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const SingularDriftSpec spec{1.0, 1.0, 1.0, 1e-3, 1e-3, 0.0, 0.0};
    const auto v = field_from(g, [](double x, double t) { return 0.3 * t * std::cos(2.0 * std::numbers::pi * x); });
    const auto same = contraction_check(v, v, w, spec, g);
    EXPECT_EQ(same.lhs, 0.0);
    EXPECT_TRUE(same.pass);
    const auto shifted = field_from(g, [&](double x, double t) { return 0.1 + 0.3 * t * std::cos(2.0 * std::numbers::pi * x); });
    const auto r = contraction_check(v, shifted, w, spec, g);
    EXPECT_NEAR(r.rhs, 0.1, 1e-12);
    EXPECT_LE(r.lhs, 0.1 + 1e-8);
    EXPECT_TRUE(r.pass);
}

TEST(Contraction, RandomSmoothPairs) {
    const Grid g = make_grid(DomainKind::circle, 32, 0.5, 200);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const SingularDriftSpec spec{1.0, 1.0, 1.0, 1e-3, 1e-3, 0.0, 0.0};
    std::mt19937_64 rng(2718);
    for (int n = 0; n < 10; ++n) {
        const auto v = random_smooth_v(g, rng, 0.3);
        const auto vh = random_smooth_v(g, rng, 0.3);
        const auto r = contraction_check(v, vh, w, spec, g);
        EXPECT_TRUE(r.pass) << "pair " << n << ": " << r.lhs << " > " << r.rhs;
    }
}

TEST(Comparison, OrderedDriftsGiveOrderedSolutions) {
    const Grid g = make_grid(DomainKind::interval_dirichlet, 31, 0.3, 300);
    const WallPair w = constant_walls(g, -0.5, 0.5);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 5; ++n) {
        const auto v = random_smooth_v(g, rng, 0.4);
        SingularDriftSpec lo{0.5 * u(rng), 0.5 * u(rng), 1.0 + u(rng), 0.01, 0.01, 0.0, 0.0};
        SingularDriftSpec hi = lo;
        hi.c1 += 0.5 * u(rng);
        hi.c2 *= u(rng);
        const auto a = solve_obstacle(v, w, lo, g);
        const auto b = solve_obstacle(v, w, hi, g);
        EXPECT_LE(max_diff_above(a.xi, b.xi), 1e-8) << "pair " << n;
    }
}

TEST(Penalized, ZeroCase) {
    const Grid g = make_grid(DomainKind::circle, 16, 1.0, 100);
    const auto sol = solve_penalized(make_field(g), constant_walls(g, -1.0, 1.0), zero_drift(), 100.0, g);
    for (double v : sol.xi.values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(sol.max_lower_violation, 0.0);
    EXPECT_EQ(sol.max_upper_violation, 0.0);
}

TEST(Penalized, LargerPenaltyPushesHigherAtLowerWall) {
    const Grid g = make_grid(DomainKind::circle, 32, 1.0, 1000);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const auto v = field_from(g, [](double x, double t) { return -2.0 * t * (1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * x)); });
    const auto a = solve_penalized(v, w, zero_drift(), 100.0, g);
    const auto b = solve_penalized(v, w, zero_drift(), 1000.0, g);
    EXPECT_LE(max_diff_above(a.xi, b.xi), 1e-8);
}

TEST(Penalized, ViolationShrinksLikeInversePenalty) {
    const Grid g = make_grid(DomainKind::circle, 32, 1.0, 2000);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    const auto v = field_from(g, [](double x, double t) { return 2.0 * t * (1.0 + 0.3 * std::cos(2.0 * std::numbers::pi * x)); });
    const auto proj = solve_obstacle_with(v, w, zero_drift(), g);
    double prev = 1e300;
    for (double rho : {1e2, 1e3, 1e4}) {
        const auto s = solve_penalized(v, w, zero_drift(), rho, g);
        EXPECT_LT(s.max_upper_violation, prev);
        // C bounds the push rate past the wall: sup |dv/dt| + sup |Lap v| = 2.6 + 0.6 (2 pi)^2.
        EXPECT_LE(s.max_upper_violation, 30.0 / rho);
        EXPECT_EQ(s.max_lower_violation, 0.0);
        prev = s.max_upper_violation;
        if (rho == 1e4) {
            EXPECT_LE(sup_distance(s.x, proj.x), 0.01);
        }
    }
}

TEST(Penalized, RejectsIncreasingDriftAndBadPenalty) {
    const Grid g = make_grid(DomainKind::circle, 8, 1.0, 10);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    DriftHandle up{[](std::size_t, std::size_t, double u) { return u; }, {}};
    EXPECT_THROW(solve_penalized(make_field(g), w, up, 10.0, g), ConfigError);
    EXPECT_THROW(solve_penalized(make_field(g), w, zero_drift(), 0.0, g), ConfigError);
}

TEST(Obstacle, DivergenceSuggestsSmallerStep) {
    const Grid g = make_grid(DomainKind::circle, 8, 1.0, 10);
    const WallPair w = constant_walls(g, -1.0, 1.0);
    DriftHandle big{[](std::size_t, std::size_t, double) { return 1e15; }, {}};
    ObstacleOptions o;
    o.treatment = DriftTreatment::explicit_euler;
    try {
        solve_penalized(make_field(g), w, big, 10.0, g, o);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_NEAR(e.suggested_dt(), g.dt / 10.0, 1e-15);
    }
}
