#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "twowall/error.hpp"
#include "twowall/grid.hpp"

namespace twowall {

/**
 * Prefactored solver for (I - dt * Lap_h) u = rhs on a grid.
 *
 * Lap_h is the three-point Laplacian: with zero Dirichlet values on the
 * interval, periodic on the circle. The interval system is tridiagonal
 * (Thomas); the circle system is cyclic tridiagonal, reduced to two Thomas
 * sweeps with Sherman-Morrison. The inverse is entrywise positive with row
 * sums <= 1 (== 1 on the circle), which the comparison arguments rely on.
 */
class ImplicitHeatOperator {
public:
    ImplicitHeatOperator() = default;

    ImplicitHeatOperator(const Grid& grid, double dt)
        : n_(grid.nx), circle_(grid.is_circle()), r_(dt / (grid.dx * grid.dx)) {
        if (!(dt > 0.0)) throw ConfigError("ImplicitHeatOperator: dt must be positive");
        const double diag = 1.0 + 2.0 * r_;
        const double off = -r_;
        off_ = off;
        // Circle: A = T' + u v^T with u = (gamma,0..0,off), v = (1,0..0,off/gamma).
        gamma_ = -diag;
        std::vector<double> b(n_, diag);
        if (circle_) {
            b[0] = diag - gamma_;
            b[n_ - 1] = diag - off * off / gamma_;
        }
        cprime_.assign(n_, 0.0);
        inv_denom_.assign(n_, 0.0);
        inv_denom_[0] = 1.0 / b[0];
        cprime_[0] = off * inv_denom_[0];
        for (std::size_t i = 1; i < n_; ++i) {
            inv_denom_[i] = 1.0 / (b[i] - off * cprime_[i - 1]);
            cprime_[i] = off * inv_denom_[i];
        }
        if (circle_) {
            std::vector<double> u(n_, 0.0);
            u[0] = gamma_;
            u[n_ - 1] = off;
            z_.assign(n_, 0.0);
            thomas(u, z_);
            zfactor_ = 1.0 / (1.0 + z_[0] + off / gamma_ * z_[n_ - 1]);
        }
    }

    std::size_t size() const noexcept { return n_; }
    double courant() const noexcept { return r_; }

    /// Solves in place: u <- (I - dt Lap_h)^{-1} u.
    void solve_in_place(std::span<double> u) const {
        if (u.size() != n_) throw ConfigError("ImplicitHeatOperator: size mismatch");
        thomas(u, u);
        if (circle_) {
            const double fact = (u[0] + off_ / gamma_ * u[n_ - 1]) * zfactor_;
            for (std::size_t i = 0; i < n_; ++i) u[i] -= fact * z_[i];
        }
    }

private:
    // rhs and out may alias.
    void thomas(std::span<const double> rhs, std::span<double> out) const {
        out[0] = rhs[0] * inv_denom_[0];
        for (std::size_t i = 1; i < n_; ++i) out[i] = (rhs[i] - off_ * out[i - 1]) * inv_denom_[i];
        for (std::size_t i = n_ - 1; i-- > 0;) out[i] -= cprime_[i] * out[i + 1];
    }

    std::size_t n_ = 0;
    bool circle_ = false;
    double r_ = 0.0;
    double off_ = 0.0;
    double gamma_ = 0.0;
    double zfactor_ = 0.0;
    std::vector<double> cprime_;
    std::vector<double> inv_denom_;
    std::vector<double> z_;
};

/// Three-point Laplacian of a grid vector (zero Dirichlet ends on the interval).
inline void discrete_laplacian(const Grid& grid, std::span<const double> u, std::span<double> out) {
    const std::size_t n = grid.nx;
    const double inv = 1.0 / (grid.dx * grid.dx);
    for (std::size_t i = 0; i < n; ++i) {
        double left = 0.0;
        double right = 0.0;
        if (grid.is_circle()) {
            left = u[(i + n - 1) % n];
            right = u[(i + 1) % n];
        } else {
            left = i > 0 ? u[i - 1] : 0.0;
            right = i + 1 < n ? u[i + 1] : 0.0;
        }
        out[i] = (left - 2.0 * u[i] + right) * inv;
    }
}

}  // namespace twowall
