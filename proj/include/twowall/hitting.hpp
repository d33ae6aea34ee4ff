#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "twowall/coefficients.hpp"
#include "twowall/drift.hpp"
#include "twowall/error.hpp"
#include "twowall/grid.hpp"
#include "twowall/noise.hpp"
#include "twowall/spde.hpp"
#include "twowall/walls.hpp"

namespace twowall {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

enum class WallHit { none, lower, upper, both };

inline std::string_view to_string(WallHit w) {
    switch (w) {
        case WallHit::none: return "none";
        case WallHit::lower: return "lower";
        case WallHit::upper: return "upper";
        case WallHit::both: return "both";
    }
    return "none";
}

struct HittingRecord {
    double tau1 = kNever;
    double tau2 = kNever;
    double tau = kNever;
    WallHit wall_hit = WallHit::none;
    double min_gap_lower = kNever;
    double min_gap_upper = kNever;
};

/**
 * Online contact detection, one step at a time.
 *
 * Contact with a wall at step k >= 1 means gap <= eta, or (reflected runs) a
 * positive ledger increment for that wall at step k. Step 0 only feeds the gap
 * minima. The `<=` makes a gap exactly equal to eta count as contact.
 */
class ContactTracker {
public:
    ContactTracker(double dt, double eta, bool reflected) : dt_(dt), eta_(eta), reflected_(reflected) {
        if (!(eta >= 0.0)) throw ConfigError("eta must be nonnegative");
    }

    void observe(std::size_t k, std::span<const double> x, std::span<const double> l1, std::span<const double> l2,
                 std::span<const double> up, std::span<const double> down) {
        double lo = kNever;
        double hi = kNever;
        bool push_up = false;
        bool push_down = false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            lo = std::min(lo, x[i] - l1[i]);
            hi = std::min(hi, l2[i] - x[i]);
            if (reflected_) {
                push_up = push_up || up[i] > 0.0;
                push_down = push_down || down[i] > 0.0;
            }
        }
        rec_.min_gap_lower = std::min(rec_.min_gap_lower, lo);
        rec_.min_gap_upper = std::min(rec_.min_gap_upper, hi);
        if (k == 0) return;
        const double t = static_cast<double>(k) * dt_;
        if (rec_.tau1 == kNever && (push_up || lo <= eta_)) rec_.tau1 = t;
        if (rec_.tau2 == kNever && (push_down || hi <= eta_)) rec_.tau2 = t;
    }

    bool hit() const noexcept { return rec_.tau1 != kNever || rec_.tau2 != kNever; }

    HittingRecord record() const {
        HittingRecord r = rec_;
        r.tau = std::min(r.tau1, r.tau2);
        const bool a = r.tau1 != kNever;
        const bool b = r.tau2 != kNever;
        r.wall_hit = a && b ? WallHit::both : a ? WallHit::lower : b ? WallHit::upper : WallHit::none;
        return r;
    }

private:
    double dt_;
    double eta_;
    bool reflected_;
    HittingRecord rec_{};
};

inline HittingRecord detect_contact(const SolutionPath& path, double eta) {
    if (!path.walls) throw ConfigError("detect_contact: path has no walls");
    ContactTracker tr(path.grid.dt, eta, path.reflected());
    for (std::size_t k = 0; k < path.X.rows(); ++k) {
        const bool led = path.reflected() && path.ledger.upsilon_mass.rows() > k;
        tr.observe(k, path.X.row(k), path.walls->lambda1.row(k), path.walls->lambda2.row(k),
                   led ? path.ledger.upsilon_mass.row(k) : std::span<const double>(),
                   led ? path.ledger.gamma_mass.row(k) : std::span<const double>());
    }
    return tr.record();
}

struct GapSample {
    double lower = 0.0;
    double upper = 0.0;
};

/// Per step: (min_x (X - L1), min_x (L2 - X)).
inline std::vector<GapSample> min_gap_series(const SolutionPath& path) {
    if (!path.walls) throw ConfigError("min_gap_series: path has no walls");
    std::vector<GapSample> out(path.X.rows());
    for (std::size_t k = 0; k < path.X.rows(); ++k) {
        double lo = kNever;
        double hi = kNever;
        for (std::size_t i = 0; i < path.X.cols(); ++i) {
            lo = std::min(lo, path.X(k, i) - path.walls->lambda1(k, i));
            hi = std::min(hi, path.walls->lambda2(k, i) - path.X(k, i));
        }
        out[k] = {lo, hi};
    }
    return out;
}

inline constexpr double kWilsonZ95 = 1.959963984540054;

struct Interval {
    double low = 0.0;
    double high = 1.0;
};

inline Interval wilson_interval(std::size_t hits, std::size_t n, double z = kWilsonZ95) {
    if (n == 0) return {0.0, 1.0};
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(hits) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double centre = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    Interval ci{std::max(0.0, centre - half), std::min(1.0, centre + half)};
    // Keep low <= p <= high exactly despite rounding at p = 0 or 1.
    ci.low = std::min(ci.low, p);
    ci.high = std::max(ci.high, p);
    return ci;
}

/// Everything an estimate needs apart from theta, the path count and the seed.
struct HittingConfig {
    DomainKind domain = DomainKind::circle;
    std::size_t nx = 64;
    double T = 1.0;
    std::size_t nt = 10000;
    WallProfile walls = constant_wall_profile(-1.0, 1.0);
    /// Initial state: x0_value + x0_amplitude sin(pi x) (interval) or sin(2 pi x) (circle).
    double x0_value = 0.0;
    double x0_amplitude = 0.0;
    CoefficientSpec coeff{Coefficient(Coefficient::Kind::zero), Coefficient(Coefficient::Kind::constant, 1.0), {}};
    SingularDriftSpec drift{1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    SimMode mode = SimMode::reflected;
    SimulationOptions sim{};
    /// Worker threads; 0 = hardware concurrency.
    std::size_t threads = 0;
    /// Fingerprint of the resolved configuration, copied into every row.
    std::uint64_t config_hash = 0;
};

struct HittingRow {
    double theta = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_hits = 0;
    std::size_t n_failed = 0;
    double p_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
    double eta = 0.0;
    double T = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

struct HittingTable {
    std::vector<HittingRow> rows;
};

inline Grid hitting_grid(const HittingConfig& cfg) {
    return make_grid(cfg.domain, static_cast<long long>(cfg.nx), cfg.T, static_cast<long long>(cfg.nt));
}

inline std::vector<double> hitting_initial_state(const HittingConfig& cfg, const Grid& grid) {
    std::vector<double> x0(grid.nx);
    const double k = (grid.is_circle() ? 2.0 : 1.0) * std::numbers::pi;
    for (std::size_t i = 0; i < grid.nx; ++i) x0[i] = cfg.x0_value + cfg.x0_amplitude * std::sin(k * grid.x_coords[i]);
    return x0;
}

/// Outcome of one path of an estimate: hit by T, or failed (diverged).
struct PathOutcome {
    bool hit = false;
    bool failed = false;
};

/**
 * P(tau <= T) over n_paths paths with streams (master_seed, 0..n_paths-1).
 * Paths stop at their first contact. If T differs from cfg.T the grid keeps its
 * dt and only the horizon changes. Diverged paths are excluded and counted.
 */
inline HittingRow estimate_hitting_probability(const HittingConfig& cfg, double theta, std::size_t n_paths,
                                               std::uint64_t master_seed, double T, double eta) {
    if (n_paths == 0) throw ConfigError("n_paths must be at least 1");
    if (!(eta >= 0.0)) throw ConfigError("eta must be nonnegative");
    Grid grid = hitting_grid(cfg);
    if (T != grid.T) grid = with_horizon(grid, T);
    const WallPair walls = sample_walls(cfg.walls, grid);
    SingularDriftSpec spec = cfg.drift;
    spec.theta = theta;
    const Integrator integ(grid, walls, cfg.coeff, spec, cfg.mode, cfg.sim);
    const std::vector<double> x0 = hitting_initial_state(cfg, grid);
    integ.check_initial(x0);

    std::vector<PathOutcome> out(n_paths);
    auto run_one = [&](std::size_t p) {
        NoiseStream stream = derive_stream(master_seed, static_cast<long long>(p));
        ContactTracker tr(grid.dt, eta, cfg.mode == SimMode::reflected);
        try {
            run_path(integ, x0, stream,
                     [&](std::size_t k, std::span<const double> s, std::span<const double> up,
                         std::span<const double> down) {
                         tr.observe(k, s, walls.lambda1.row(k), walls.lambda2.row(k), up, down);
                         return !tr.hit();
                     });
            out[p].hit = tr.hit();
        } catch (const DivergenceError&) {
            out[p].failed = true;
        }
    };

    std::size_t nthreads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min(nthreads, n_paths);
    if (nthreads <= 1) {
        for (std::size_t p = 0; p < n_paths; ++p) run_one(p);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex mu;
        for (std::size_t w = 0; w < nthreads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t p = w; p < n_paths; p += nthreads) run_one(p);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (err) std::rethrow_exception(err);
    }

    HittingRow row;
    row.theta = theta;
    row.eta = eta;
    row.T = grid.T;
    row.seed = master_seed;
    row.config_hash = cfg.config_hash;
    for (const auto& o : out) {
        if (o.failed) {
            ++row.n_failed;
            continue;
        }
        ++row.n_paths;
        row.n_hits += o.hit ? 1 : 0;
    }
    row.p_hat = row.n_paths ? static_cast<double>(row.n_hits) / static_cast<double>(row.n_paths) : 0.0;
    const Interval ci = wilson_interval(row.n_hits, row.n_paths);
    row.ci_low = ci.low;
    row.ci_high = ci.high;
    return row;
}

/// One row per theta; row j uses master_seed + j.
inline HittingTable exponent_sweep(const HittingConfig& cfg, const std::vector<double>& thetas, std::size_t n_paths,
                                   std::uint64_t master_seed, double eta = 0.0) {
    if (thetas.empty()) throw ConfigError("exponent_sweep: theta list is empty");
    HittingTable table;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        table.rows.push_back(estimate_hitting_probability(cfg, thetas[j], n_paths, master_seed + j, cfg.T, eta));
    }
    return table;
}

/// p_hat nonincreasing in table order, allowing violations whose CIs overlap.
inline bool monotone_trend(const HittingTable& table) {
    for (std::size_t j = 1; j < table.rows.size(); ++j) {
        const auto& a = table.rows[j - 1];
        const auto& b = table.rows[j];
        if (b.p_hat > a.p_hat && b.ci_low > a.ci_high) return false;
    }
    return true;
}

}  // namespace twowall
