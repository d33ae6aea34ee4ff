#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twowall/error.hpp"
#include "twowall/grid.hpp"

namespace twowall {

enum class WallProvenance { analytic, tabulated };

/// Lower/upper wall pair sampled on a grid, with the heat-operator forcings f_i = dL_i/dt - d2L_i/dx2.
struct WallPair {
    SpaceTimeField lambda1;
    SpaceTimeField lambda2;
    SpaceTimeField forcing1;
    SpaceTimeField forcing2;
    WallProvenance provenance = WallProvenance::analytic;
    /// Interval only: wall values at x = 0 and x = 1 per step, when known.
    std::optional<std::vector<double>> lower_left, lower_right, upper_left, upper_right;
};

using SpaceTimeFn = std::function<double(double x, double t)>;

/// Analytic wall description, sampled onto any grid.
struct WallProfile {
    std::string kind;
    SpaceTimeFn lower;
    SpaceTimeFn upper;
    SpaceTimeFn lower_forcing;
    SpaceTimeFn upper_forcing;
};

inline WallProfile constant_wall_profile(double lower, double upper) {
    return {"constant", [lower](double, double) { return lower; }, [upper](double, double) { return upper; },
            [](double, double) { return 0.0; }, [](double, double) { return 0.0; }};
}

/// L1 = lower + lower_rate t, L2 = upper + upper_rate t. The gap grows iff upper_rate >= lower_rate.
inline WallProfile affine_wall_profile(double lower, double upper, double lower_rate, double upper_rate) {
    return {"affine", [=](double, double t) { return lower + lower_rate * t; },
            [=](double, double t) { return upper + upper_rate * t; }, [=](double, double) { return lower_rate; },
            [=](double, double) { return upper_rate; }};
}

/// Both walls shifted by amplitude sin(2 pi mode x); vanishes at x = 0, 1 so the interval ends stay fixed.
inline WallProfile sinusoidal_wall_profile(double lower, double upper, double amplitude, int mode) {
    const double k = 2.0 * std::numbers::pi * mode;
    auto bump = [=](double x) { return amplitude * std::sin(k * x); };
    auto forcing = [=](double x, double) { return k * k * amplitude * std::sin(k * x); };
    return {"sinusoidal", [=](double x, double) { return lower + bump(x); },
            [=](double x, double) { return upper + bump(x); }, forcing, forcing};
}

inline WallPair sample_walls(const WallProfile& profile, const Grid& grid) {
    WallPair w;
    w.provenance = WallProvenance::analytic;
    w.lambda1 = make_field(grid);
    w.lambda2 = make_field(grid);
    w.forcing1 = make_field(grid);
    w.forcing2 = make_field(grid);
    for (std::size_t k = 0; k <= grid.nt; ++k) {
        const double t = grid.time(k);
        for (std::size_t i = 0; i < grid.nx; ++i) {
            const double x = grid.x_coords[i];
            w.lambda1(k, i) = profile.lower(x, t);
            w.lambda2(k, i) = profile.upper(x, t);
            w.forcing1(k, i) = profile.lower_forcing(x, t);
            w.forcing2(k, i) = profile.upper_forcing(x, t);
        }
    }
    if (!grid.is_circle()) {
        std::vector<double> ll(grid.nt + 1), lr(grid.nt + 1), ul(grid.nt + 1), ur(grid.nt + 1);
        for (std::size_t k = 0; k <= grid.nt; ++k) {
            const double t = grid.time(k);
            ll[k] = profile.lower(0.0, t);
            lr[k] = profile.lower(1.0, t);
            ul[k] = profile.upper(0.0, t);
            ur[k] = profile.upper(1.0, t);
        }
        w.lower_left = std::move(ll);
        w.lower_right = std::move(lr);
        w.upper_left = std::move(ul);
        w.upper_right = std::move(ur);
    }
    return w;
}

inline WallPair constant_walls(const Grid& grid, double lower, double upper) {
    return sample_walls(constant_wall_profile(lower, upper), grid);
}

namespace detail {

/// dL/dt - d2L/dx2 by second-order finite differences.
inline SpaceTimeField fd_forcing(const Grid& grid, const SpaceTimeField& lam,
                                 const std::optional<std::vector<double>>& left,
                                 const std::optional<std::vector<double>>& right) {
    const std::size_t nt = grid.nt;
    const std::size_t n = grid.nx;
    SpaceTimeField f = make_field(grid);
    const double dt = grid.dt;
    const double inv_dx2 = 1.0 / (grid.dx * grid.dx);
    for (std::size_t k = 0; k <= nt; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            double dldt = 0.0;
            if (nt == 1) {
                dldt = (lam(1, i) - lam(0, i)) / dt;
            } else if (k == 0) {
                dldt = (-3.0 * lam(0, i) + 4.0 * lam(1, i) - lam(2, i)) / (2.0 * dt);
            } else if (k == nt) {
                dldt = (3.0 * lam(nt, i) - 4.0 * lam(nt - 1, i) + lam(nt - 2, i)) / (2.0 * dt);
            } else {
                dldt = (lam(k + 1, i) - lam(k - 1, i)) / (2.0 * dt);
            }
            double d2 = 0.0;
            if (grid.is_circle()) {
                d2 = (lam(k, (i + n - 1) % n) - 2.0 * lam(k, i) + lam(k, (i + 1) % n)) * inv_dx2;
            } else {
                auto at = [&](long j) -> std::optional<double> {
                    if (j < 0) return left ? std::optional<double>((*left)[k]) : std::nullopt;
                    if (j >= static_cast<long>(n)) return right ? std::optional<double>((*right)[k]) : std::nullopt;
                    return lam(k, static_cast<std::size_t>(j));
                };
                const auto li = static_cast<long>(i);
                auto lft = at(li - 1);
                auto rgt = at(li + 1);
                if (lft && rgt) {
                    d2 = (*lft - 2.0 * lam(k, i) + *rgt) * inv_dx2;
                } else if (n >= 4) {
                    // One-sided second-order stencil into the interior.
                    const int s = lft ? -1 : 1;
                    auto v = [&](int m) { return lam(k, static_cast<std::size_t>(li + s * m)); };
                    d2 = (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) * inv_dx2;
                }
            }
            f(k, i) = dldt - d2;
        }
    }
    return f;
}

}  // namespace detail

/**
 * Reads tabulated walls from CSV with header `t,x,lambda1,lambda2`.
 *
 * Every (t_k, x_i) grid pair must be present. On the interval, rows at x = 0 and
 * x = 1 are optional and, when given for every step, feed the endpoint checks.
 * Forcings are second-order finite differences.
 */
inline WallPair load_walls_csv(std::istream& in, const Grid& grid) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("walls CSV: empty input");
    {
        std::string header;
        for (char c : line)
            if (c != ' ' && c != '\r') header += c;
        if (header != "t,x,lambda1,lambda2") throw ConfigError("walls CSV: header must be t,x,lambda1,lambda2");
    }
    WallPair w;
    w.provenance = WallProvenance::tabulated;
    w.lambda1 = make_field(grid, std::nan(""));
    w.lambda2 = make_field(grid, std::nan(""));
    std::vector<double> ll(grid.nt + 1, std::nan("")), lr = ll, ul = ll, ur = ll;
    const double steps_per_unit = static_cast<double>(grid.spacing_count());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string cell;
        double vals[4];
        for (double& v : vals) {
            if (!std::getline(ss, cell, ',')) throw ConfigError("walls CSV: short row at line " + std::to_string(lineno));
            try {
                v = std::stod(cell);
            } catch (const std::exception&) {
                throw ConfigError("walls CSV: bad number at line " + std::to_string(lineno));
            }
        }
        const double kf = vals[0] / grid.dt;
        const double kr = std::round(kf);
        const double jf = vals[1] * steps_per_unit;
        const double jr = std::round(jf);
        if (std::fabs(kf - kr) > 1e-6 || std::fabs(jf - jr) > 1e-6 || kr < 0 || kr > static_cast<double>(grid.nt) ||
            jr < 0 || jr > steps_per_unit) {
            throw ConfigError("walls CSV: row off the grid at line " + std::to_string(lineno));
        }
        const auto k = static_cast<std::size_t>(kr);
        const auto j = static_cast<std::size_t>(jr);
        if (grid.is_circle()) {
            if (j == grid.nx) continue;  // x = 1 duplicates x = 0
            w.lambda1(k, j) = vals[2];
            w.lambda2(k, j) = vals[3];
        } else if (j == 0) {
            ll[k] = vals[2];
            ul[k] = vals[3];
        } else if (j == grid.nx + 1) {
            lr[k] = vals[2];
            ur[k] = vals[3];
        } else {
            w.lambda1(k, j - 1) = vals[2];
            w.lambda2(k, j - 1) = vals[3];
        }
    }
    for (double v : w.lambda1.values())
        if (std::isnan(v)) throw ConfigError("walls CSV: missing grid nodes");
    for (double v : w.lambda2.values())
        if (std::isnan(v)) throw ConfigError("walls CSV: missing grid nodes");
    auto complete = [](const std::vector<double>& v) {
        for (double x : v)
            if (std::isnan(x)) return false;
        return true;
    };
    if (!grid.is_circle()) {
        if (complete(ll) && complete(ul)) {
            w.lower_left = ll;
            w.upper_left = ul;
        }
        if (complete(lr) && complete(ur)) {
            w.lower_right = lr;
            w.upper_right = ur;
        }
    }
    w.forcing1 = detail::fd_forcing(grid, w.lambda1, w.lower_left, w.lower_right);
    w.forcing2 = detail::fd_forcing(grid, w.lambda2, w.upper_left, w.upper_right);
    return w;
}

enum class CheckStatus { pass, fail, skipped };

struct ConditionResult {
    std::string name;
    CheckStatus status = CheckStatus::pass;
    bool fatal = false;
    std::string message;
    std::size_t first_step = 0;
    std::size_t first_cell = 0;
};

struct ValidationReport {
    std::vector<ConditionResult> conditions;

    /// True when no fatal condition failed.
    bool ok() const {
        for (const auto& c : conditions)
            if (c.fatal && c.status == CheckStatus::fail) return false;
        return true;
    }
    bool all_pass() const {
        for (const auto& c : conditions)
            if (c.status == CheckStatus::fail) return false;
        return true;
    }
    const ConditionResult* find(const std::string& name) const {
        for (const auto& c : conditions)
            if (c.name == name) return &c;
        return nullptr;
    }
};

inline std::string_view to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::pass: return "pass";
        case CheckStatus::fail: return "fail";
        case CheckStatus::skipped: return "skipped";
    }
    return "?";
}

/**
 * Checks the wall hypotheses on the sampled data.
 *
 *  H0  interval only: L1 <= 0 <= L2 at both endpoints for all t. The hypothesis is
 *      read as the endpoint compatibility with X(0,t) = X(1,t) = 0 (the printed form
 *      lists x = 1 twice). Skipped when endpoint values are unknown.
 *  H1  L1 < L2 at every node and step. Fatal.
 *  H2  forcings finite (their grid L2 norm is reported).
 *  H3  dL_i/dt = 0 at the endpoints (interval) or at node x = 0 (circle).
 *  H4  L2 - L1 nondecreasing in t at every node. Fatal unless `allow_gap_decrease`.
 */
inline ValidationReport validate_walls(const WallPair& walls, const Grid& grid, bool allow_gap_decrease = false) {
    const std::size_t rows = grid.nt + 1;
    if (walls.lambda1.rows() != rows || walls.lambda1.cols() != grid.nx || walls.lambda2.rows() != rows ||
        walls.lambda2.cols() != grid.nx) {
        throw ConfigError("validate_walls: walls are not sampled on this grid");
    }
    constexpr double kTol = 1e-12;
    ValidationReport rep;

    ConditionResult h0;
    h0.name = "H0";
    if (grid.is_circle()) {
        h0.status = CheckStatus::skipped;
        h0.message = "not applicable on the circle";
    } else if (!walls.lower_left || !walls.lower_right) {
        h0.status = CheckStatus::skipped;
        h0.message = "endpoint wall values unavailable";
    } else {
        for (std::size_t k = 0; k < rows && h0.status == CheckStatus::pass; ++k) {
            const bool left_ok = (*walls.lower_left)[k] <= 0.0 && (*walls.upper_left)[k] >= 0.0;
            const bool right_ok = (*walls.lower_right)[k] <= 0.0 && (*walls.upper_right)[k] >= 0.0;
            if (!left_ok || !right_ok) {
                h0.status = CheckStatus::fail;
                h0.first_step = k;
                h0.message = std::string("endpoint ") + (left_ok ? "x=1" : "x=0") + " violates L1 <= 0 <= L2 at step " +
                             std::to_string(k);
            }
        }
    }
    rep.conditions.push_back(h0);

    ConditionResult h1;
    h1.name = "H1";
    h1.fatal = true;
    for (std::size_t k = 0; k < rows && h1.status == CheckStatus::pass; ++k)
        for (std::size_t i = 0; i < grid.nx; ++i)
            if (!(walls.lambda1(k, i) < walls.lambda2(k, i))) {
                h1.status = CheckStatus::fail;
                h1.first_step = k;
                h1.first_cell = i;
                h1.message = "L1 >= L2 at step " + std::to_string(k) + ", cell " + std::to_string(i);
                break;
            }
    rep.conditions.push_back(h1);

    ConditionResult h2;
    h2.name = "H2";
    {
        double norm2 = 0.0;
        bool finite = true;
        for (const SpaceTimeField* f : {&walls.forcing1, &walls.forcing2}) {
            for (double v : f->values()) {
                if (!std::isfinite(v)) finite = false;
                norm2 += v * v * grid.dx * grid.dt;
            }
        }
        if (!finite || walls.forcing1.empty() || walls.forcing2.empty()) {
            h2.status = CheckStatus::fail;
            h2.message = "wall forcing is not finite";
        } else {
            std::ostringstream os;
            os << "forcing L2 norm " << std::sqrt(norm2);
            h2.message = os.str();
        }
    }
    rep.conditions.push_back(h2);

    ConditionResult h3;
    h3.name = "H3";
    {
        auto check_series = [&](auto value_at, const std::string& where) {
            for (std::size_t k = 1; k < rows; ++k)
                if (std::fabs(value_at(k) - value_at(0)) > kTol) {
                    h3.status = CheckStatus::fail;
                    h3.first_step = k;
                    h3.message = "wall moves in time at " + where + " (step " + std::to_string(k) + ")";
                    return;
                }
        };
        if (grid.is_circle()) {
            check_series([&](std::size_t k) { return walls.lambda1(k, 0); }, "x=0 (lower)");
            if (h3.status == CheckStatus::pass) check_series([&](std::size_t k) { return walls.lambda2(k, 0); }, "x=0 (upper)");
        } else if (walls.lower_left && walls.lower_right) {
            const std::vector<const std::vector<double>*> series{&*walls.lower_left, &*walls.lower_right,
                                                                 &*walls.upper_left, &*walls.upper_right};
            const char* names[] = {"x=0 (lower)", "x=1 (lower)", "x=0 (upper)", "x=1 (upper)"};
            for (std::size_t s = 0; s < series.size() && h3.status == CheckStatus::pass; ++s)
                check_series([&](std::size_t k) { return (*series[s])[k]; }, names[s]);
        } else {
            h3.status = CheckStatus::skipped;
            h3.message = "endpoint wall values unavailable";
        }
    }
    rep.conditions.push_back(h3);

    ConditionResult h4;
    h4.name = "H4";
    h4.fatal = !allow_gap_decrease;
    for (std::size_t k = 1; k < rows && h4.status == CheckStatus::pass; ++k)
        for (std::size_t i = 0; i < grid.nx; ++i) {
            const double now = walls.lambda2(k, i) - walls.lambda1(k, i);
            const double before = walls.lambda2(k - 1, i) - walls.lambda1(k - 1, i);
            if (now < before - kTol) {
                h4.status = CheckStatus::fail;
                h4.first_step = k;
                h4.first_cell = i;
                h4.message = "gap L2 - L1 decreases at step " + std::to_string(k) + ", cell " + std::to_string(i);
                break;
            }
        }
    if (allow_gap_decrease && h4.status == CheckStatus::fail) h4.message += " (override active)";
    rep.conditions.push_back(h4);
    return rep;
}

/// Throws ConfigError when a fatal hypothesis fails.
inline void require_valid_walls(const WallPair& walls, const Grid& grid, bool allow_gap_decrease = false) {
    const auto rep = validate_walls(walls, grid, allow_gap_decrease);
    for (const auto& c : rep.conditions)
        if (c.fatal && c.status == CheckStatus::fail) throw ConfigError("walls fail " + c.name + ": " + c.message);
}

}  // namespace twowall
