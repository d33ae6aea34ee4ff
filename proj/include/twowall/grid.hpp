#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twowall/error.hpp"

namespace twowall {

enum class DomainKind { interval_dirichlet, circle };

inline std::string_view to_string(DomainKind kind) {
    return kind == DomainKind::circle ? "circle" : "interval";
}

inline DomainKind parse_domain_kind(std::string_view name) {
    if (name == "circle") return DomainKind::circle;
    if (name == "interval" || name == "interval_dirichlet") return DomainKind::interval_dirichlet;
    throw ConfigError("unknown domain kind '" + std::string(name) + "'");
}

/**
 * Uniform space-time grid on [0,1] x [0,T].
 *
 * Interval grids carry only the nx interior nodes x_i = (i+1)/(nx+1); the
 * Dirichlet values at x = 0 and x = 1 are the constant 0 and are never stored.
 * Circle grids carry x_i = i/nx, i = 0..nx-1, with node nx-1 adjacent to node 0.
 */
struct Grid {
    DomainKind domain_kind = DomainKind::circle;
    std::size_t nx = 0;
    double dx = 0.0;
    double T = 0.0;
    std::size_t nt = 0;
    double dt = 0.0;
    std::vector<double> x_coords;

    bool is_circle() const noexcept { return domain_kind == DomainKind::circle; }
    double time(std::size_t step) const noexcept { return static_cast<double>(step) * dt; }
    /// Number of spacings spanning [0,1]: nx on the circle, nx+1 on the interval.
    std::size_t spacing_count() const noexcept { return is_circle() ? nx : nx + 1; }
};

/// Builds a grid. Circle grids need nx >= 4 (the periodic stencil wraps); interval grids nx >= 1.
inline Grid make_grid(DomainKind kind, long long nx, double T, long long nt) {
    if (nx <= 0) throw ConfigError("nx must be positive");
    if (nt <= 0) throw ConfigError("nt must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("T must be positive and finite");
    if (kind == DomainKind::circle && nx < 4) throw ConfigError("circle grid needs nx >= 4");

    Grid g;
    g.domain_kind = kind;
    g.nx = static_cast<std::size_t>(nx);
    g.T = T;
    g.nt = static_cast<std::size_t>(nt);
    g.dt = T / static_cast<double>(nt);
    g.dx = 1.0 / static_cast<double>(g.spacing_count());
    g.x_coords.resize(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double k = static_cast<double>(kind == DomainKind::circle ? i : i + 1);
        g.x_coords[i] = k / static_cast<double>(g.spacing_count());
    }
    return g;
}

/// Same spatial layout and time step, different horizon (rounded to a whole number of steps).
inline Grid with_horizon(const Grid& g, double T) {
    const auto nt = static_cast<long long>(std::llround(T / g.dt));
    return make_grid(g.domain_kind, static_cast<long long>(g.nx), static_cast<double>(nt) * g.dt,
                     std::max(1LL, nt));
}

/// Arc-length distance on the unit circle: min over k of |x - y + k|.
inline double circle_distance(double x, double y) {
    if (!(x >= 0.0 && x < 1.0) || !(y >= 0.0 && y < 1.0)) {
        throw DomainError("circle_distance: positions must lie in [0,1)");
    }
    const double d = std::fabs(x - y);
    return std::min(d, 1.0 - d);
}

/// Row-major (step, cell) array. Row k holds the field at t = k*dt.
class SpaceTimeField {
public:
    SpaceTimeField() = default;
    SpaceTimeField(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> row(std::size_t k) { return {data_.data() + k * cols_, cols_}; }
    std::span<const double> row(std::size_t k) const { return {data_.data() + k * cols_, cols_}; }

    double& operator()(std::size_t k, std::size_t i) { return data_[k * cols_ + i]; }
    double operator()(std::size_t k, std::size_t i) const { return data_[k * cols_ + i]; }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }

    /// Drops rows past `rows` (used when a run stops early).
    void truncate_rows(std::size_t rows) {
        rows_ = std::min(rows_, rows);
        data_.resize(rows_ * cols_);
    }

    friend bool operator==(const SpaceTimeField&, const SpaceTimeField&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Space-time field shaped for `g`: nt+1 rows of nx cells.
inline SpaceTimeField make_field(const Grid& g, double fill = 0.0) {
    return SpaceTimeField(g.nt + 1, g.nx, fill);
}

/// Largest |a - b| over all entries. Shapes must agree.
inline double sup_distance(const SpaceTimeField& a, const SpaceTimeField& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("sup_distance: shape mismatch");
    double m = 0.0;
    auto va = a.values();
    auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) m = std::max(m, std::fabs(va[i] - vb[i]));
    return m;
}

inline double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace twowall
