#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "twowall/error.hpp"
#include "twowall/grid.hpp"

namespace twowall {

struct KernelConfig {
    /// Relative truncation tolerance for the image / wrap sums.
    double image_tolerance = 1e-12;
    /// Gauss-Legendre nodes per geometric time panel in the kernel-power integral.
    int quadrature_n = 16;

    void validate() const {
        if (!(image_tolerance > 0.0 && image_tolerance <= 1e-6)) {
            throw ConfigError("KernelConfig: image_tolerance must lie in (0, 1e-6]");
        }
        if (quadrature_n < 16) throw ConfigError("KernelConfig: quadrature_n must be >= 16");
    }
};

/// Number of images kept on each side: ceil(sqrt(4 t ln(1/tol))) + 2.
inline int image_count(double t, double tol) {
    return static_cast<int>(std::ceil(std::sqrt(4.0 * t * std::log(1.0 / tol)))) + 2;
}

/// Heat kernel on the line, (4 pi t)^{-1/2} exp(-x^2 / 4t).
inline double gauss_kernel(double t, double x) {
    if (!(t > 0.0)) throw DomainError("gauss_kernel: t must be positive");
    return std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * std::numbers::pi * t);
}

namespace detail {

inline double wrapped_sum(double t, double rho, int m_max) {
    const double norm = 1.0 / std::sqrt(4.0 * std::numbers::pi * t);
    const double inv4t = 1.0 / (4.0 * t);
    double s = 0.0;
    // Sum from the smallest terms outward so the dominant m = 0 term is added last.
    for (int m = m_max; m >= 1; --m) {
        const double a = rho + m;
        const double b = rho - m;
        s += std::exp(-a * a * inv4t) + std::exp(-b * b * inv4t);
    }
    s += std::exp(-rho * rho * inv4t);
    return norm * s;
}

inline double dirichlet_sum(double t, double x, double y, int m_max) {
    const double norm = 1.0 / std::sqrt(4.0 * std::numbers::pi * t);
    const double inv4t = 1.0 / (4.0 * t);
    double s = 0.0;
    for (int m = -m_max; m <= m_max; ++m) {
        const double d1 = x - y + 2.0 * m;
        const double d2 = x + y + 2.0 * m;
        s += std::exp(-d1 * d1 * inv4t) - std::exp(-d2 * d2 * inv4t);
    }
    return std::max(0.0, norm * s);
}

}  // namespace detail

/// Heat kernel on the unit circle, the wrapped sum of line kernels at rho(x,y) + m.
inline double circle_green(double t, double x, double y, const KernelConfig& cfg = {}) {
    if (!(t > 0.0)) throw DomainError("circle_green: t must be positive");
    const double rho = circle_distance(x, y);
    return detail::wrapped_sum(t, rho, image_count(t, cfg.image_tolerance));
}

/**
 * Dirichlet heat kernel on [0,1] by the method of images:
 * sum_m [Gbar(t, x - y + 2m) - Gbar(t, x + y + 2m)].
 * Vanishes at x = 0 and x = 1 and is symmetric in (x, y).
 */
inline double dirichlet_green(double t, double x, double y, const KernelConfig& cfg = {}) {
    if (!(t > 0.0)) throw DomainError("dirichlet_green: t must be positive");
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) throw DomainError("dirichlet_green: positions must lie in [0,1]");
    return detail::dirichlet_sum(t, x, y, image_count(t, cfg.image_tolerance));
}

/// Kernel for the grid's domain.
inline double domain_green(const Grid& grid, double t, double x, double y, const KernelConfig& cfg = {}) {
    return grid.is_circle() ? circle_green(t, x, y, cfg) : dirichlet_green(t, x, y, cfg);
}

/// Dense dx-weighted kernel matrix K[i][j] = G(t, x_i, y_j) * dx on the grid nodes.
inline std::vector<double> kernel_matrix(const Grid& grid, double t, const KernelConfig& cfg = {}) {
    if (!(t > 0.0)) throw DomainError("kernel_matrix: t must be positive");
    const std::size_t n = grid.nx;
    std::vector<double> k(n * n);
    if (grid.is_circle()) {
        // Translation invariant: one evaluation per lattice distance.
        std::vector<double> by_offset(n);
        for (std::size_t d = 0; d < n; ++d) by_offset[d] = circle_green(t, 0.0, grid.x_coords[d], cfg) * grid.dx;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) k[i * n + j] = by_offset[(i + n - j) % n];
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const double v = dirichlet_green(t, grid.x_coords[i], grid.x_coords[j], cfg) * grid.dx;
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
    }
    return k;
}

/// Trapezoid quadrature of int G_t(x, y) field(y) dy at every node.
inline std::vector<double> heat_convolve(std::span<const double> field, double t, const Grid& grid,
                                         const KernelConfig& cfg = {}) {
    if (field.size() != grid.nx) throw ConfigError("heat_convolve: field length does not match grid");
    if (!(t > 0.0)) throw DomainError("heat_convolve: t must be positive");
    const auto k = kernel_matrix(grid, t, cfg);
    const std::size_t n = grid.nx;
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += k[i * n + j] * field[j];
        out[i] = s;
    }
    return out;
}

/// max_{i,j} | sum_z G(s,x_i,z) G(t,z,y_j) dz - G(s+t,x_i,y_j) | with trapezoid in z.
inline double chapman_kolmogorov_error(const Grid& grid, double s, double t, const KernelConfig& cfg = {}) {
    const auto ks = kernel_matrix(grid, s, cfg);
    const auto kt = kernel_matrix(grid, t, cfg);
    const auto kst = kernel_matrix(grid, s + t, cfg);
    const std::size_t n = grid.nx;
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t z = 0; z < n; ++z) acc += ks[i * n + z] * kt[z * n + j];
            // Entries carry one dx factor each; divide one out to compare densities.
            err = std::max(err, std::fabs(acc - kst[i * n + j]) / grid.dx);
        }
    return err;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::fabs(dz) < 1e-16) break;
        }
        nodes[static_cast<std::size_t>(i)] = -z;
        nodes[static_cast<std::size_t>(n - 1 - i)] = z;
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
}

/// int_S G(tau, 0, y)^a dy by trapezoid, step min(dx, sigma/4) with sigma = sqrt(2 tau).
inline double circle_kernel_power_slice(double a, double tau, const Grid& grid, const KernelConfig& cfg) {
    const double sigma = std::sqrt(2.0 * tau);
    const double half_width = std::min(0.5, 14.0 * sigma);
    const double step = std::min(grid.dx, sigma / 4.0);
    const auto n = static_cast<std::size_t>(std::ceil(half_width / step));
    const double h = half_width / static_cast<double>(n);
    const int m_max = image_count(tau, cfg.image_tolerance);
    double s = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        const double y = h * static_cast<double>(j);
        double w = (j == 0) ? 1.0 : 2.0;  // symmetric about 0
        if (j == n) w *= 0.5;
        s += w * std::pow(detail::wrapped_sum(tau, y, m_max), a);
    }
    return s * h;
}

/**
 * Estimate of int_0^t int_S |G(t-s, x, y)|^a dy ds on the circle (x-independent; x = 0).
 *
 * Substituting tau = t - s, the integrand behaves like tau^{(1-a)/2} near tau = 0.
 * The range is split into geometric panels [t 2^{-j-1}, t 2^{-j}] with Gauss-Legendre
 * nodes in each, down to tau_min = min(t, 1e-2) 2^{-24}; below tau_min wrap-around is
 * below e^{-25} and the line-kernel slice (4 pi tau)^{(1-a)/2} / sqrt(a) is integrated
 * in closed form.
 */
inline double green_power_integral(double a, double t, const Grid& grid, const KernelConfig& cfg = {}) {
    if (!(a > 1.0 && a < 3.0)) throw DomainError("green_power_integral: a must lie in (1, 3)");
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("green_power_integral: t must lie in (0, 1]");
    cfg.validate();
    std::vector<double> nodes;
    std::vector<double> weights;
    gauss_legendre(cfg.quadrature_n, nodes, weights);

    const double tau_min = std::min(t, 1e-2) * std::ldexp(1.0, -24);
    double total = 0.0;
    double hi = t;
    while (hi > tau_min) {
        const double lo = std::max(hi * 0.5, tau_min);
        const double mid = 0.5 * (hi + lo);
        const double half = 0.5 * (hi - lo);
        double panel = 0.0;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            panel += weights[q] * circle_kernel_power_slice(a, mid + half * nodes[q], grid, cfg);
        }
        total += panel * half;
        hi = lo;
    }
    const double e = 0.5 * (3.0 - a);
    total += std::pow(4.0 * std::numbers::pi, 0.5 * (1.0 - a)) / std::sqrt(a) * std::pow(tau_min, e) / e;
    return total;
}

/// Least-squares slope of log(value) against log(t).
inline double fit_power_law(std::span<const double> ts, std::span<const double> values) {
    if (ts.size() != values.size() || ts.size() < 2) throw ConfigError("fit_power_law: need >= 2 matching samples");
    double mx = 0.0;
    double my = 0.0;
    const auto n = static_cast<double>(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        mx += std::log(ts[i]);
        my += std::log(values[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double dxl = std::log(ts[i]) - mx;
        sxy += dxl * (std::log(values[i]) - my);
        sxx += dxl * dxl;
    }
    return sxy / sxx;
}

struct ExponentStudy {
    double a = 0.0;
    std::vector<double> ts;
    std::vector<double> values;
    double fitted_exponent = 0.0;
    /// (3a - 1)/2, the exponent stated in the kernel-power bound being studied.
    double stated_exponent = 0.0;
    /// (3 - a)/2, from the line-kernel scaling tau^{(1-a)/2}.
    double scaling_exponent = 0.0;
};

/// Fits the power-law exponent of green_power_integral(a, .) on n log-spaced times in [t_lo, t_hi].
inline ExponentStudy green_exponent_study(double a, const Grid& grid, const KernelConfig& cfg = {},
                                          double t_lo = 1e-3, double t_hi = 1e-1, int n_points = 9) {
    if (n_points < 2) throw ConfigError("green_exponent_study: need at least two times");
    ExponentStudy st;
    st.a = a;
    st.stated_exponent = 0.5 * (3.0 * a - 1.0);
    st.scaling_exponent = 0.5 * (3.0 - a);
    for (int i = 0; i < n_points; ++i) {
        const double frac = static_cast<double>(i) / (n_points - 1);
        const double t = t_lo * std::pow(t_hi / t_lo, frac);
        st.ts.push_back(t);
        st.values.push_back(green_power_integral(a, t, grid, cfg));
    }
    st.fitted_exponent = fit_power_law(st.ts, st.values);
    return st;
}

/// Fine periodic-trapezoid mass of the circle kernel, int_S G(t, 0, y) dy.
inline double circle_kernel_mass(double t, const KernelConfig& cfg = {}, std::size_t n = 4096) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += circle_green(t, 0.0, static_cast<double>(j) / n, cfg);
    return s / static_cast<double>(n);
}

}  // namespace twowall
