#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "twowall/greens.hpp"

using namespace twowall;

namespace {

// Composite Simpson on [a, b] with n (even) panels.
template <typename F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace

TEST(GaussKernel, UnitAtOrigin) { EXPECT_NEAR(gauss_kernel(1.0 / (4.0 * std::numbers::pi), 0.0), 1.0, 1e-15); }

TEST(GaussKernel, EvenAndNormalized) {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> ut(1e-4, 2.0), ux(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double t = ut(rng), x = ux(rng);
        EXPECT_EQ(gauss_kernel(t, x), gauss_kernel(t, -x));
    }
    for (double t : {1e-4, 0.1, 3.0}) {
        const double r = 12.0 * std::sqrt(t);
        EXPECT_NEAR(simpson([&](double x) { return gauss_kernel(t, x); }, -r, r, 4000), 1.0, 1e-10);
    }
    EXPECT_THROW(gauss_kernel(0.0, 0.0), DomainError);
}

TEST(CircleGreen, ShiftInvariant) {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double t = 1e-3 + u(rng), x = u(rng), y = u(rng), s = u(rng);
        const double a = circle_green(t, x, y);
        const double b = circle_green(t, std::fmod(x + s, 1.0), std::fmod(y + s, 1.0));
        EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, a));
    }
}

TEST(CircleGreen, UnitMass) {
    for (double t : {1e-4, 1e-2, 1.0}) EXPECT_NEAR(circle_kernel_mass(t), 1.0, 1e-8) << "t=" << t;
}

TEST(CircleGreen, EquilibriumAtLargeTime) {
    for (double x : {0.0, 0.2, 0.5, 0.9}) EXPECT_NEAR(circle_green(10.0, x, 0.3), 1.0, 1e-6);
}

TEST(CircleGreen, RejectsNonpositiveTime) { EXPECT_THROW(circle_green(0.0, 0.1, 0.2), DomainError); }

TEST(DirichletGreen, VanishesAtBoundary) { EXPECT_LT(dirichlet_green(0.01, 1e-9, 0.5), 1e-6); }

TEST(DirichletGreen, Symmetric) {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6), ut(1e-4, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double t = ut(rng), x = u(rng), y = u(rng);
        const double a = dirichlet_green(t, x, y);
        EXPECT_NEAR(a, dirichlet_green(t, y, x), 1e-12 * std::max(1.0, a));
        EXPECT_GE(a, 0.0);
    }
}

TEST(DirichletGreen, SubMarkovMass) {
    auto mass = [](double t, double x, int n) {
        return simpson([&](double y) { return dirichlet_green(t, x, y); }, 0.0, 1.0, n);
    };
    EXPECT_GE(mass(1e-5, 0.5, 200000), 0.999);
    for (double t : {1e-3, 1e-2, 0.1, 1.0})
        for (double x : {0.01, 0.3, 0.5}) EXPECT_LE(mass(t, x, 20000), 1.0 + 1e-10);
    EXPECT_GT(mass(1e-3, 0.5, 20000), mass(0.1, 0.5, 20000));
}

TEST(HeatConvolve, CircleConstantPreserved) {
    const Grid g = make_grid(DomainKind::circle, 64, 1.0, 1);
    const std::vector<double> c(g.nx, 2.5);
    for (double t : {1e-3, 0.05, 1.0})
        for (double v : heat_convolve(c, t, g)) EXPECT_NEAR(v, 2.5, 1e-8);
}

TEST(HeatConvolve, CircleEigenfunction) {
    const Grid g = make_grid(DomainKind::circle, 256, 1.0, 1);
    std::vector<double> f(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) f[i] = std::sin(2.0 * std::numbers::pi * g.x_coords[i]);
    for (double t : {0.005, 0.02, 0.1}) {
        const auto out = heat_convolve(f, t, g);
        const double decay = std::exp(-4.0 * std::numbers::pi * std::numbers::pi * t);
        for (std::size_t i = 0; i < g.nx; ++i) EXPECT_NEAR(out[i], decay * f[i], 1e-6);
    }
}

TEST(HeatConvolve, DirichletEigenfunction) {
    const Grid g = make_grid(DomainKind::interval_dirichlet, 255, 1.0, 1);
    std::vector<double> f(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) f[i] = std::sin(std::numbers::pi * g.x_coords[i]);
    for (double t : {0.005, 0.02, 0.1}) {
        const auto out = heat_convolve(f, t, g);
        const double decay = std::exp(-std::numbers::pi * std::numbers::pi * t);
        for (std::size_t i = 0; i < g.nx; ++i) EXPECT_NEAR(out[i], decay * f[i], 1e-6);
    }
}

TEST(HeatConvolve, SizeMismatch) {
    const Grid g = make_grid(DomainKind::circle, 16, 1.0, 1);
    EXPECT_THROW(heat_convolve(std::vector<double>(15, 0.0), 0.1, g), ConfigError);
}

TEST(HeatConvolve, SemigroupComposition) {
    for (DomainKind kind : {DomainKind::circle, DomainKind::interval_dirichlet}) {
        const Grid g = make_grid(kind, 128, 1.0, 1);
        std::vector<double> f(g.nx);
        for (std::size_t i = 0; i < g.nx; ++i) f[i] = std::exp(-50.0 * std::pow(g.x_coords[i] - 0.4, 2));
        const auto two = heat_convolve(heat_convolve(f, 0.01, g), 0.02, g);
        const auto one = heat_convolve(f, 0.03, g);
        for (std::size_t i = 0; i < g.nx; ++i) EXPECT_NEAR(two[i], one[i], 1e-6);
    }
}

TEST(ChapmanKolmogorov, BothKernels) {
    EXPECT_LE(chapman_kolmogorov_error(make_grid(DomainKind::circle, 256, 1.0, 1), 0.01, 0.01), 1e-6);
    EXPECT_LE(chapman_kolmogorov_error(make_grid(DomainKind::interval_dirichlet, 256, 1.0, 1), 0.01, 0.01), 1e-6);
}

TEST(KernelConfig, Ranges) {
    EXPECT_NO_THROW(KernelConfig{}.validate());
    EXPECT_THROW((KernelConfig{1e-3, 16}.validate()), ConfigError);
    EXPECT_THROW((KernelConfig{1e-12, 8}.validate()), ConfigError);
    EXPECT_EQ(image_count(1.0, 1e-12), static_cast<int>(std::ceil(std::sqrt(4.0 * std::log(1e12)))) + 2);
}

// Reference values of int_0^t int_S G(t-s,0,y)^2 dy ds = int_0^t G(2 tau, 0, 0) d tau,
// computed independently with 40-digit arithmetic.
TEST(GreenPowerIntegral, SquareMatchesReference) {
    const Grid g = make_grid(DomainKind::circle, 256, 1.0, 1);
    const std::vector<std::pair<double, double>> ref = {{1e-3, 0.0126156626101008},
                                                         {1e-2, 0.039894238732474336},
                                                         {0.04, 0.080590132336601598},
                                                         {0.1, 0.14165723499922321},
                                                         {0.16, 0.20166658403292675}};
    for (const auto& [t, v] : ref) EXPECT_NEAR(green_power_integral(2.0, t, g), v, 1e-6 * v) << "t=" << t;
}

TEST(GreenPowerIntegral, IncreasingInTime) {
    const Grid g = make_grid(DomainKind::circle, 128, 1.0, 1);
    const double a = green_power_integral(2.0, 0.01, g);
    const double b = green_power_integral(2.0, 0.04, g);
    const double c = green_power_integral(2.0, 0.16, g);
    EXPECT_TRUE(std::isfinite(a));
    EXPECT_LT(a, b);
    EXPECT_LT(b, c);
}

TEST(GreenPowerIntegral, NearCriticalExponentFinite) {
    // At t = 0.01 the wrap-around images are negligible, so the line-kernel closed form applies.
    const Grid g = make_grid(DomainKind::circle, 128, 1.0, 1);
    const double v = green_power_integral(2.9, 0.01, g);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(v, 0.84252272918158391, 1e-4 * 0.84252272918158391);
}

TEST(GreenPowerIntegral, DomainErrors) {
    const Grid g = make_grid(DomainKind::circle, 64, 1.0, 1);
    EXPECT_THROW(green_power_integral(1.0, 0.1, g), DomainError);
    EXPECT_THROW(green_power_integral(3.0, 0.1, g), DomainError);
    EXPECT_THROW(green_power_integral(2.0, 0.0, g), DomainError);
    EXPECT_THROW(green_power_integral(2.0, 1.5, g), DomainError);
}

// Slope of the least-squares fit of the reference integral on 9 log-spaced times in [1e-3, 1e-1].
TEST(GreenExponentStudy, SquareSlopeAndStability) {
    const auto coarse = green_exponent_study(2.0, make_grid(DomainKind::circle, 128, 1.0, 1));
    const auto fine = green_exponent_study(2.0, make_grid(DomainKind::circle, 256, 1.0, 1));
    EXPECT_NEAR(fine.fitted_exponent, 0.5163458226800696, 1e-4);
    EXPECT_LE(std::fabs(coarse.fitted_exponent - fine.fitted_exponent), 0.05);
    EXPECT_DOUBLE_EQ(fine.stated_exponent, 2.5);
    EXPECT_DOUBLE_EQ(fine.scaling_exponent, 0.5);
    EXPECT_EQ(fine.ts.size(), 9u);
}

TEST(FitPowerLaw, ExactPower) {
    std::vector<double> t, v;
    for (int i = 1; i <= 5; ++i) {
        t.push_back(0.01 * i);
        v.push_back(3.0 * std::pow(0.01 * i, 1.7));
    }
    EXPECT_NEAR(fit_power_law(t, v), 1.7, 1e-12);
}
