#pragma once

#include <zlib.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "twowall/config.hpp"
#include "twowall/envelope.hpp"
#include "twowall/greens.hpp"
#include "twowall/hitting.hpp"
#include "twowall/io.hpp"
#include "twowall/obstacle.hpp"
#include "twowall/picard.hpp"
#include "twowall/spde.hpp"
#include "twowall/walls.hpp"
#include "twowall/weak_form.hpp"

namespace twowall::cli {

using json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2 };

/// Validation failure that should end the command with exit code 1.
class CommandFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Context {
    RunConfig cfg;
    std::filesystem::path out_dir;
    std::ostream& out;
    std::ostream& err;
};

inline json number(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

inline json config_json(const RunConfig& cfg) {
    json j = json::object();
    for (const auto& [k, v] : cfg.values()) j[k] = v;
    return j;
}

inline json summary_header(const Context& ctx, std::string_view command) {
    json j;
    j["command"] = command;
    j["config_hash"] = format_hash(ctx.cfg.hash());
    j["seed"] = ctx.cfg.integer("seed");
    j["config"] = config_json(ctx.cfg);
    return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << s;
}

inline void write_gzip(const std::filesystem::path& p, const std::string& s) {
    gzFile f = gzopen(p.string().c_str(), "wb9");
    if (!f) throw std::runtime_error("cannot write " + p.string());
    const int n = gzwrite(f, s.data(), static_cast<unsigned>(s.size()));
    gzclose(f);
    if (n != static_cast<int>(s.size())) throw std::runtime_error("gzip write failed for " + p.string());
}

inline void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

inline void print_report(std::ostream& os, const ValidationReport& rep) {
    for (const auto& c : rep.conditions) {
        os << c.name << ": " << to_string(c.status);
        if (c.status == CheckStatus::fail) {
            os << " at step " << c.first_step << ", cell " << c.first_cell << (c.fatal ? " (fatal)" : "");
        }
        if (!c.message.empty()) os << " - " << c.message;
        os << "\n";
    }
}

inline WallPair checked_walls(const Context& ctx, const Grid& grid) {
    WallPair walls = build_walls(ctx.cfg, grid);
    const auto rep = validate_walls(walls, grid, ctx.cfg.flag("allow_gap_decrease"));
    if (!rep.ok()) {
        print_report(ctx.err, rep);
        throw CommandFailure("wall validation failed");
    }
    return walls;
}

inline int cmd_validate(Context& ctx) {
    const Grid grid = build_grid(ctx.cfg);
    const WallPair walls = build_walls(ctx.cfg, grid);
    const auto rep = validate_walls(walls, grid, ctx.cfg.flag("allow_gap_decrease"));
    print_report(ctx.out, rep);
    bool ok = rep.ok();
    const CoefficientSpec coeff = build_coefficients(ctx.cfg);
    ctx.out << "coefficients: " << coeff.lipschitz_note() << "\n";
    if (coeff.chi_lower_bound) {
        std::vector<double> us;
        for (int j = 0; j <= 20; ++j) us.push_back(-2.0 + 0.2 * j);
        const auto msg = check_chi_lower_bound(coeff, grid.x_coords, {0.0, grid.T}, us);
        ctx.out << "condition A: " << (msg ? "fail - " + *msg : std::string("pass")) << "\n";
        ok = ok && !msg;
    }
    const auto x0 = build_x0(ctx.cfg, grid);
    for (std::size_t i = 0; i < grid.nx; ++i) {
        if (x0[i] < walls.lambda1(0, i) || x0[i] > walls.lambda2(0, i)) {
            ctx.out << "x0: fail at cell " << i << "\n";
            ok = false;
            break;
        }
    }
    ctx.out << (ok ? "valid" : "invalid") << "\n";
    return ok ? kOk : kFailure;
}

inline int cmd_simulate(Context& ctx) {
    const Grid grid = build_grid(ctx.cfg);
    const auto walls = std::make_shared<const WallPair>(checked_walls(ctx, grid));
    const CoefficientSpec coeff = build_coefficients(ctx.cfg);
    const SingularDriftSpec spec = build_drift(ctx.cfg);
    const SimMode mode = parse_sim_mode(ctx.cfg.str("mode"));
    SimulationOptions opts = build_sim_options(ctx.cfg);
    opts.record_noise = true;
    const auto x0 = build_x0(ctx.cfg, grid);
    NoiseStream stream = derive_stream(static_cast<std::uint64_t>(ctx.cfg.integer("seed")),
                                       static_cast<long long>(ctx.cfg.count("path_index")));
    const SolutionPath path = simulate(mode, x0, walls, coeff, spec, grid, stream, opts);

    std::filesystem::create_directories(ctx.out_dir);
    std::ostringstream traj;
    write_trajectory_csv(traj, path);
    if (ctx.cfg.flag("gzip")) {
        write_gzip(ctx.out_dir / "trajectory.csv.gz", traj.str());
    } else {
        write_text(ctx.out_dir / "trajectory.csv", traj.str());
    }
    std::ostringstream gaps;
    write_min_gap_csv(gaps, path);
    write_text(ctx.out_dir / "min_gap.csv", gaps.str());

    const auto rec = detect_contact(path, ctx.cfg.num("eta"));
    const auto comp = complementarity_residual(path.X, *walls, path.ledger, grid);
    const auto psi = sine_test_function(grid, static_cast<int>(ctx.cfg.integer("psi_mode")));
    const double residual = weak_form_residual(path, psi);

    json j = summary_header(ctx, "simulate");
    j["mode"] = to_string(mode);
    j["path_index"] = path.path_index;
    j["steps"] = path.steps();
    j["stop_step"] = path.stop_step ? json(*path.stop_step) : json(nullptr);
    j["min_gap_lower"] = number(rec.min_gap_lower);
    j["min_gap_upper"] = number(rec.min_gap_upper);
    j["tau1"] = number(rec.tau1);
    j["tau2"] = number(rec.tau2);
    j["tau"] = number(rec.tau);
    j["wall_hit"] = to_string(rec.wall_hit);
    j["upsilon_total"] = path.ledger.total_upsilon();
    j["gamma_total"] = path.ledger.total_gamma();
    j["complementarity_r1"] = comp.r1;
    j["complementarity_r2"] = comp.r2;
    j["weak_form_residual"] = residual;
    j["drift_used"] = {{"c1", path.drift.c1},       {"c2", path.drift.c2},
                       {"theta", path.drift.theta}, {"eps1", path.drift.eps1},
                       {"eps2", path.drift.eps2},   {"floor_delta", path.drift.floor_delta},
                       {"floor_delta_tilde", path.drift.floor_delta_tilde}};
    write_json(ctx.out_dir / "summary.json", j);

    ctx.out << "mode " << to_string(mode) << ", steps " << path.steps() << "\n";
    ctx.out << "min gap lower " << format_number(rec.min_gap_lower) << ", upper " << format_number(rec.min_gap_upper)
            << "\n";
    ctx.out << "contact " << to_string(rec.wall_hit) << ", tau " << format_number(rec.tau) << "\n";
    return kOk;
}

inline int cmd_obstacle(Context& ctx) {
    const Grid grid = build_grid(ctx.cfg);
    const WallPair walls = checked_walls(ctx, grid);
    const SingularDriftSpec spec = build_drift(ctx.cfg);
    spec.validate();
    ObstacleOptions oopts;
    oopts.treatment = build_treatment(ctx.cfg);
    oopts.overflow_guard = ctx.cfg.num("overflow_guard");
    const SpaceTimeField v = build_obstacle_v(ctx.cfg, grid);
    const std::string& task = ctx.cfg.str("obstacle_task");
    std::filesystem::create_directories(ctx.out_dir);
    json j = summary_header(ctx, "obstacle");
    j["task"] = task;
    int code = kOk;

    if (task == "single" || task == "schedule") {
        ObstacleSolution sol;
        if (task == "schedule") {
            if (!(spec.eps1 > 0.0) || !(spec.eps2 > 0.0)) throw ConfigError("schedule needs eps1 > 0 and eps2 > 0");
            const auto sched = EpsSchedule::halving(spec.eps1, spec.eps2, ctx.cfg.count("eps_levels"));
            sol = solve_obstacle(v, walls, spec, grid, sched, oopts);
            json levels = json::array();
            for (const auto& l : sol.schedule->levels) {
                levels.push_back({{"eps1", l.eps1},
                                  {"eps2", l.eps2},
                                  {"changed", l.changed},
                                  {"sup_change", l.sup_change},
                                  {"worst_violation", l.worst_violation},
                                  {"monotone", l.monotone}});
            }
            j["levels"] = levels;
            j["monotone"] = sol.schedule->monotone();
            ctx.out << "eps schedule: " << sol.schedule->levels.size() << " levels, monotone "
                    << (sol.schedule->monotone() ? "yes" : "no") << "\n";
            if (!sol.schedule->monotone()) code = kFailure;
        } else {
            sol = solve_obstacle(v, walls, spec, grid, oopts);
        }
        const auto comp = complementarity_residual(sol.x, walls, sol.ledger, grid);
        std::ostringstream xs;
        write_xi_csv(xs, sol, grid);
        write_text(ctx.out_dir / "xi.csv", xs.str());
        std::ostringstream ls;
        write_ledger_csv(ls, sol.ledger, grid);
        write_text(ctx.out_dir / "ledger.csv", ls.str());
        j["r1"] = comp.r1;
        j["r2"] = comp.r2;
        j["upsilon_total"] = sol.ledger.total_upsilon();
        j["gamma_total"] = sol.ledger.total_gamma();
        ctx.out << "r1 " << format_number(comp.r1) << ", r2 " << format_number(comp.r2) << "\n";
    } else if (task == "contraction") {
        const SpaceTimeField v_hat = build_obstacle_v(ctx.cfg, grid, ctx.cfg.num("obstacle_shift"));
        const auto r = contraction_check(v, v_hat, walls, spec, grid, 1e-8, oopts);
        j["lhs"] = r.lhs;
        j["rhs"] = r.rhs;
        j["pass"] = r.pass;
        ctx.out << "contraction: lhs " << format_number(r.lhs) << (r.pass ? " <= " : " > ") << "rhs "
                << format_number(r.rhs) << "\n";
        if (!r.pass) code = kFailure;
    } else {
        const auto ref = solve_obstacle(v, walls, spec, grid, oopts);
        const auto g = singular_drift_handle(spec, v, walls);
        json rows = json::array();
        for (double rho : ctx.cfg.list("rho_list")) {
            const auto pen = solve_penalized(v, walls, g, rho, grid, oopts);
            const double d = sup_distance(pen.xi, ref.xi);
            rows.push_back({{"rho", rho},
                            {"max_lower_violation", pen.max_lower_violation},
                            {"max_upper_violation", pen.max_upper_violation},
                            {"sup_distance_to_projection", d}});
            ctx.out << "rho " << format_number(rho) << ": violation lower " << format_number(pen.max_lower_violation)
                    << ", upper " << format_number(pen.max_upper_violation) << ", distance to projection "
                    << format_number(d) << "\n";
        }
        j["penalized"] = rows;
    }
    write_json(ctx.out_dir / "obstacle.json", j);
    return code;
}

inline int cmd_hitting(Context& ctx) {
    if (ctx.cfg.str("walls") == "csv") throw ConfigError("hitting needs analytic walls");
    const Grid grid = build_grid(ctx.cfg);
    (void)checked_walls(ctx, grid);
    const HittingConfig hc = build_hitting_config(ctx.cfg);
    const auto thetas = ctx.cfg.list("theta_list");
    const auto seed = static_cast<std::uint64_t>(ctx.cfg.integer("seed"));
    const HittingTable table = exponent_sweep(hc, thetas, ctx.cfg.count("n_paths"), seed, ctx.cfg.num("eta"));

    std::filesystem::create_directories(ctx.out_dir);
    std::ostringstream csv;
    write_hitting_csv(csv, table);
    write_text(ctx.out_dir / "hitting.csv", csv.str());
    const bool trend = monotone_trend(table);
    json j = summary_header(ctx, "hitting");
    json rows = json::array();
    for (const auto& r : table.rows) {
        rows.push_back({{"theta", r.theta},
                        {"n_paths", r.n_paths},
                        {"n_hits", r.n_hits},
                        {"p_hat", r.p_hat},
                        {"ci_low", r.ci_low},
                        {"ci_high", r.ci_high},
                        {"eta", r.eta},
                        {"T", r.T},
                        {"seed", r.seed},
                        {"config_hash", format_hash(r.config_hash)},
                        {"n_failed", r.n_failed}});
        ctx.out << "theta " << format_number(r.theta) << ": p_hat " << format_number(r.p_hat) << " ["
                << format_number(r.ci_low) << ", " << format_number(r.ci_high) << "] over " << r.n_paths << " paths";
        if (r.n_failed) ctx.out << " (" << r.n_failed << " failed)";
        ctx.out << "\n";
    }
    j["rows"] = rows;
    j["monotone_trend"] = trend;
    j["estimand"] = "P(tau <= T)";
    write_json(ctx.out_dir / "hitting.json", j);
    ctx.out << "trend " << (trend ? "nonincreasing in theta (up to CI overlap)" : "NOT monotone") << "\n";
    return kOk;
}

inline int cmd_green_check(Context& ctx) {
    const KernelConfig kc = build_kernel_config(ctx.cfg);
    const auto a_list = ctx.cfg.list("green_a_list");
    const auto nx_list = ctx.cfg.list("green_nx_list");
    for (double a : a_list)
        if (!(a > 1.0 && a < 3.0)) throw ConfigError("green_a_list: a must lie in (1, 3)");
    if (nx_list.empty()) throw ConfigError("green_nx_list is empty");
    const double t_lo = ctx.cfg.num("green_t_min");
    const double t_hi = ctx.cfg.num("green_t_max");
    if (!(t_lo > 0.0 && t_lo < t_hi && t_hi <= 1.0)) throw ConfigError("need 0 < green_t_min < green_t_max <= 1");
    const int points = static_cast<int>(ctx.cfg.integer("green_points"));

    json j = summary_header(ctx, "green-check");
    double worst_mass = 0.0;
    json mass = json::array();
    for (double t : {1e-4, 1e-2, 1.0}) {
        const double e = std::fabs(1.0 - circle_kernel_mass(t, kc));
        worst_mass = std::max(worst_mass, e);
        mass.push_back({{"t", t}, {"mass_error", e}});
        ctx.out << "circle kernel mass error at t=" << format_number(t) << ": " << format_number(e) << "\n";
    }
    j["circle_mass"] = mass;
    const Grid gc = make_grid(DomainKind::circle, 256, 1.0, 1);
    const Grid gi = make_grid(DomainKind::interval_dirichlet, 255, 1.0, 1);
    const double ck_c = chapman_kolmogorov_error(gc, 0.01, 0.01, kc);
    const double ck_i = chapman_kolmogorov_error(gi, 0.01, 0.01, kc);
    j["chapman_kolmogorov"] = {{"circle", ck_c}, {"interval", ck_i}};
    ctx.out << "Chapman-Kolmogorov error (s=t=0.01): circle " << format_number(ck_c) << ", interval "
            << format_number(ck_i) << "\n";

    json studies = json::array();
    for (double a : a_list) {
        std::vector<double> fits;
        json per_grid = json::array();
        ExponentStudy last;
        for (double n : nx_list) {
            const Grid g = make_grid(DomainKind::circle, static_cast<long long>(n), 1.0, 1);
            last = green_exponent_study(a, g, kc, t_lo, t_hi, points);
            fits.push_back(last.fitted_exponent);
            per_grid.push_back({{"nx", n}, {"fitted_exponent", last.fitted_exponent}, {"values", last.values}});
        }
        const auto [lo, hi] = std::minmax_element(fits.begin(), fits.end());
        const double spread = *hi - *lo;
        studies.push_back({{"a", a},
                           {"ts", last.ts},
                           {"grids", per_grid},
                           {"spread", spread},
                           {"stable", spread <= 0.05},
                           {"stated_exponent", last.stated_exponent},
                           {"scaling_exponent", last.scaling_exponent},
                           {"distance_to_stated", std::fabs(fits.back() - last.stated_exponent)},
                           {"distance_to_scaling", std::fabs(fits.back() - last.scaling_exponent)}});
        ctx.out << "a=" << format_number(a) << ": fitted exponent";
        for (double f : fits) ctx.out << " " << format_number(f);
        ctx.out << " (spread " << format_number(spread) << "); (3a-1)/2 = " << format_number(last.stated_exponent)
                << ", (3-a)/2 = " << format_number(last.scaling_exponent) << "\n";
    }
    j["exponent_studies"] = studies;
    if (!ctx.out_dir.empty()) {
        std::filesystem::create_directories(ctx.out_dir);
        write_json(ctx.out_dir / "green.json", j);
    }
    return worst_mass < 1e-8 ? kOk : kFailure;
}

inline int cmd_picard(Context& ctx) {
    const Grid grid = build_grid(ctx.cfg);
    const WallPair walls = checked_walls(ctx, grid);
    const CoefficientSpec coeff = build_coefficients(ctx.cfg);
    const SingularDriftSpec spec = build_drift(ctx.cfg);
    const SimulationOptions opts = build_sim_options(ctx.cfg);
    const auto x0 = build_x0(ctx.cfg, grid);
    const auto seed = static_cast<std::uint64_t>(ctx.cfg.integer("seed"));
    const auto index = static_cast<long long>(ctx.cfg.count("path_index"));
    NoiseStream s1 = derive_stream(seed, index);
    auto [path, state] = picard_solve(x0, walls, coeff, spec, grid, s1, ctx.cfg.count("picard_max_iter"),
                                      ctx.cfg.num("picard_tol"), opts);
    NoiseStream s2 = derive_stream(seed, index);
    const SolutionPath direct = simulate_reflected(x0, walls, coeff, spec, grid, s2, opts);
    const double cross = sup_distance(path.X, direct.X);

    std::filesystem::create_directories(ctx.out_dir);
    std::ostringstream hist;
    write_picard_history_csv(hist, state.history);
    write_text(ctx.out_dir / "picard_history.csv", hist.str());
    json j = summary_header(ctx, "picard");
    j["iterations"] = state.iteration;
    j["converged"] = state.converged;
    j["history"] = state.history;
    j["sup_distance_to_direct"] = cross;
    write_json(ctx.out_dir / "picard.json", j);
    ctx.out << "iterations " << state.iteration << (state.converged ? " (converged)" : " (not converged)") << "\n";
    for (std::size_t n = 0; n < state.history.size(); ++n) {
        ctx.out << "  " << n + 1 << ": " << format_number(state.history[n]) << "\n";
    }
    ctx.out << "sup distance to direct scheme " << format_number(cross) << "\n";
    return kOk;
}

inline int cmd_envelope(Context& ctx) {
    const Grid grid = build_grid(ctx.cfg);
    const WallProfile profile = build_wall_profile(ctx.cfg);
    const CoefficientSpec coeff = build_coefficients(ctx.cfg);
    const SingularDriftSpec spec = build_drift(ctx.cfg);
    EnvelopeOptions eo;
    eo.kappa = ctx.cfg.optional_num("envelope_kappa");
    eo.threshold_constant = ctx.cfg.num("envelope_threshold");
    eo.chi_clip = ctx.cfg.num("envelope_chi_clip");
    eo.sim = build_sim_options(ctx.cfg);
    NoiseStream stream = derive_stream(static_cast<std::uint64_t>(ctx.cfg.integer("seed")),
                                       static_cast<long long>(ctx.cfg.count("path_index")));
    const auto rep = simulate_restart_envelope(profile, coeff, spec, ctx.cfg.num("envelope_delta"), grid, stream, eo);
    json j = summary_header(ctx, "envelope");
    j["delta"] = rep.delta;
    j["beta"] = rep.beta;
    j["kappa"] = rep.kappa;
    j["threshold"] = rep.threshold;
    j["blocks"] = rep.blocks;
    j["steps_per_block"] = rep.steps_per_block;
    j["T_used"] = rep.T_used;
    j["dt_used"] = rep.dt_used;
    j["corridor_exit_fraction"] = rep.corridor_exit_fraction;
    j["n_exceed_fraction"] = rep.n_exceed_fraction;
    std::filesystem::create_directories(ctx.out_dir);
    write_json(ctx.out_dir / "envelope.json", j);
    ctx.out << "blocks " << rep.blocks << " of length " << format_number(rep.beta) << ", corridor exits "
            << format_number(rep.corridor_exit_fraction) << ", N exceedances " << format_number(rep.n_exceed_fraction)
            << "\n";
    return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Reflected stochastic heat equation with two singular walls"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    std::string mode;
    long long seed = 0;
    app.add_option("--config", config_path, "flat key = value config file");
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--mode", mode, "reflected | clipped | single-wall");
    app.allow_extras();
    app.fallthrough();

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"validate", "check walls, coefficients and x0"},
        {"simulate", "one path: trajectory CSV, min-gap CSV, summary JSON"},
        {"obstacle", "deterministic obstacle problem"},
        {"hitting", "hitting-probability sweep over theta_list"},
        {"green-check", "kernel mass, Chapman-Kolmogorov and kernel-power exponent report"},
        {"picard", "Picard iteration against the direct scheme"},
        {"envelope", "restart-envelope block statistics"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->allow_extras();
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        Context ctx{config_path.empty() ? RunConfig() : RunConfig::load(config_path), {}, out, err};
        for (const auto& extra : app.remaining()) ctx.cfg.apply_override(extra);
        for (auto* sub : app.get_subcommands())
            for (const auto& extra : sub->remaining()) ctx.cfg.apply_override(extra);
        if (*seed_opt) ctx.cfg.set("seed", std::to_string(seed));
        if (!mode.empty()) ctx.cfg.set("mode", mode);
        if (!out_dir.empty()) ctx.cfg.set("out", out_dir);
        validate_config(ctx.cfg);
        ctx.out_dir = ctx.cfg.str("out");

        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "validate") return cmd_validate(ctx);
        if (name == "simulate") return cmd_simulate(ctx);
        if (name == "obstacle") return cmd_obstacle(ctx);
        if (name == "hitting") return cmd_hitting(ctx);
        if (name == "green-check") return cmd_green_check(ctx);
        if (name == "picard") return cmd_picard(ctx);
        if (name == "envelope") return cmd_envelope(ctx);
        return kUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const CommandFailure& e) {
        err << "failed: " << e.what() << "\n";
        return kFailure;
    } catch (const DivergenceError& e) {
        err << "diverged: " << e.what() << "\n";
        return kFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace twowall::cli
