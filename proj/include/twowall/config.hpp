#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "twowall/coefficients.hpp"
#include "twowall/drift.hpp"
#include "twowall/error.hpp"
#include "twowall/greens.hpp"
#include "twowall/grid.hpp"
#include "twowall/hitting.hpp"
#include "twowall/obstacle.hpp"
#include "twowall/spde.hpp"
#include "twowall/walls.hpp"

namespace twowall {

struct ConfigKey {
    std::string_view name;
    std::string_view default_value;
    std::string_view doc;
};

/// Every accepted key with its default. Anything else is rejected.
inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"domain", "circle", "circle | interval"},
        {"nx", "64", "spatial cells"},
        {"T", "1", "horizon"},
        {"nt", "10000", "time steps"},
        {"walls", "constant", "constant | affine | sinusoidal | csv"},
        {"wall_lower", "-1", "lower wall level"},
        {"wall_upper", "1", "upper wall level"},
        {"wall_lower_rate", "0", "affine: d(lower)/dt"},
        {"wall_upper_rate", "0", "affine: d(upper)/dt"},
        {"wall_amplitude", "0", "sinusoidal: amplitude"},
        {"wall_mode", "1", "sinusoidal: mode"},
        {"wall_csv", "", "csv: path with columns t,x,lambda1,lambda2"},
        {"allow_gap_decrease", "false", "downgrade H4 to a warning"},
        {"x0", "0", "initial state level"},
        {"x0_amplitude", "0", "adds x0_amplitude sin(pi x) (interval) or sin(2 pi x) (circle)"},
        {"f", "zero", "zero | constant | linear | sine_state | space_sine"},
        {"f_p0", "0", "f parameter p0"},
        {"f_p1", "0", "f parameter p1"},
        {"chi", "constant", "zero | constant | linear | sine_state | space_sine"},
        {"chi_p0", "1", "chi parameter p0"},
        {"chi_p1", "0", "chi parameter p1"},
        {"chi_lower_bound", "", "condition A bound c (empty = unchecked)"},
        {"c1", "1", "lower drift strength"},
        {"c2", "1", "upper drift strength"},
        {"theta", "2", "drift exponent"},
        {"eps1", "0", "lower regularizer"},
        {"eps2", "0", "upper regularizer"},
        {"floor_delta", "0", "lower clip floor"},
        {"floor_delta_tilde", "0", "upper clip floor"},
        {"treatment", "implicit", "implicit | explicit"},
        {"stochastic_floor", "true", "raise floors to dx/10 in stochastic runs"},
        {"overflow_guard", "1e12", "divergence threshold on |X|"},
        {"mode", "reflected", "reflected | clipped | single-wall"},
        {"stop_threshold", "0", "single-wall stop gap"},
        {"seed", "42", "master seed"},
        {"path_index", "0", "stream index for single-path commands"},
        {"n_paths", "200", "paths per hitting estimate"},
        {"threads", "0", "hitting worker threads (0 = all cores)"},
        {"theta_list", "0.5,1,2,4,5", "hitting sweep exponents"},
        {"eta", "0", "contact gap threshold"},
        {"out", "out", "output directory"},
        {"gzip", "false", "gzip the trajectory CSV"},
        {"obstacle_v", "rise", "zero | rise | sine"},
        {"obstacle_v_rate", "2", "rise: v = x0 + rate t"},
        {"obstacle_v_amplitude", "0.3", "sine: v = x0 + amplitude sin(k x) t / T"},
        {"obstacle_v_mode", "1", "sine: mode"},
        {"obstacle_task", "single", "single | contraction | schedule | penalized"},
        {"obstacle_shift", "0.1", "contraction: v_hat = v + shift"},
        {"eps_levels", "3", "schedule: halving levels per regularizer"},
        {"rho_list", "100,1000,10000", "penalized: penalty sweep"},
        {"picard_max_iter", "20", "Picard iteration cap"},
        {"picard_tol", "1e-10", "Picard stopping tolerance"},
        {"green_a_list", "2", "kernel-power exponents a"},
        {"green_nx_list", "128,256", "grids for the exponent stability check"},
        {"green_t_min", "0.001", "exponent fit range start"},
        {"green_t_max", "0.1", "exponent fit range end"},
        {"green_points", "9", "exponent fit points"},
        {"image_tolerance", "1e-12", "image/wrap sum truncation tolerance"},
        {"quadrature_n", "16", "Gauss nodes per time panel"},
        {"envelope_delta", "0.05", "restart envelope delta"},
        {"envelope_kappa", "", "kappa (empty = midpoint)"},
        {"envelope_threshold", "1", "N-threshold constant"},
        {"envelope_chi_clip", "inf", "L clip on chi in N"},
        {"psi_mode", "1", "weak-form test function mode"},
    };
    return keys;
}

inline const ConfigKey* find_config_key(std::string_view name) {
    for (const auto& k : config_keys())
        if (k.name == name) return &k;
    return nullptr;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Flat key=value configuration with defaults for every known key.
class RunConfig {
public:
    RunConfig() {
        for (const auto& k : config_keys()) values_[std::string(k.name)] = std::string(k.default_value);
    }

    /// Lines "key = value"; '#' starts a comment. Unknown keys and lines without '=' are errors.
    static RunConfig parse(std::istream& in, std::string_view source = "config") {
        RunConfig cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            const std::string body = trim(std::string_view(line).substr(0, hash));
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": expected key = value");
            }
            try {
                cfg.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
            } catch (const ConfigError& e) {
                throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        return cfg;
    }

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        return parse(in, path);
    }

    void set(const std::string& key, const std::string& value) {
        if (!find_config_key(key)) throw ConfigError("unknown key '" + key + "'");
        values_[key] = value;
    }

    /// Applies "--key=value" / "key=value" overrides.
    void apply_override(std::string_view arg) {
        if (arg.starts_with("--")) arg.remove_prefix(2);
        const auto eq = arg.find('=');
        if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(arg) + "' needs key=value");
        set(trim(arg.substr(0, eq)), trim(arg.substr(eq + 1)));
    }

    const std::string& str(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
        return it->second;
    }

    double num(const std::string& key) const { return parse_double(key, str(key)); }

    long long integer(const std::string& key) const {
        const std::string& s = str(key);
        long long v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw ConfigError("key '" + key + "': '" + s + "' is not an integer");
        }
        return v;
    }

    std::size_t count(const std::string& key) const {
        const long long v = integer(key);
        if (v < 0) throw ConfigError("key '" + key + "' must be nonnegative");
        return static_cast<std::size_t>(v);
    }

    bool flag(const std::string& key) const {
        const std::string& s = str(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError("key '" + key + "': '" + s + "' is not a boolean");
    }

    std::optional<double> optional_num(const std::string& key) const {
        if (str(key).empty()) return std::nullopt;
        return num(key);
    }

    std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(str(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (!t.empty()) out.push_back(parse_double(key, t));
        }
        return out;
    }

    /// Sorted "key=value" lines of the fully resolved configuration.
    std::string echo() const {
        std::string s;
        for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
        return s;
    }

    std::uint64_t hash() const { return fnv1a64(echo()); }

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    static double parse_double(const std::string& key, const std::string& s) {
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
            throw ConfigError("key '" + key + "': '" + s + "' is not a number");
        }
        return v;
    }

    std::map<std::string, std::string> values_;
};

inline Grid build_grid(const RunConfig& c) {
    return make_grid(parse_domain_kind(c.str("domain")), c.integer("nx"), c.num("T"), c.integer("nt"));
}

inline WallProfile build_wall_profile(const RunConfig& c) {
    const std::string& kind = c.str("walls");
    const double lo = c.num("wall_lower");
    const double hi = c.num("wall_upper");
    if (kind == "constant") return constant_wall_profile(lo, hi);
    if (kind == "affine") return affine_wall_profile(lo, hi, c.num("wall_lower_rate"), c.num("wall_upper_rate"));
    if (kind == "sinusoidal") {
        return sinusoidal_wall_profile(lo, hi, c.num("wall_amplitude"), static_cast<int>(c.integer("wall_mode")));
    }
    if (kind == "csv") throw ConfigError("csv walls have no analytic profile");
    throw ConfigError("unknown walls '" + kind + "'");
}

inline WallPair build_walls(const RunConfig& c, const Grid& grid) {
    if (c.str("walls") == "csv") {
        const std::string& path = c.str("wall_csv");
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open wall CSV '" + path + "'");
        return load_walls_csv(in, grid);
    }
    return sample_walls(build_wall_profile(c), grid);
}

inline CoefficientSpec build_coefficients(const RunConfig& c) {
    CoefficientSpec s;
    s.f = Coefficient::parse(c.str("f"), c.num("f_p0"), c.num("f_p1"));
    s.chi = Coefficient::parse(c.str("chi"), c.num("chi_p0"), c.num("chi_p1"));
    s.chi_lower_bound = c.optional_num("chi_lower_bound");
    return s;
}

inline SingularDriftSpec build_drift(const RunConfig& c) {
    SingularDriftSpec s{c.num("c1"), c.num("c2"), c.num("theta"), c.num("eps1"), c.num("eps2"),
                        c.num("floor_delta"), c.num("floor_delta_tilde")};
    return s;
}

inline DriftTreatment build_treatment(const RunConfig& c) {
    const std::string& t = c.str("treatment");
    if (t == "implicit") return DriftTreatment::implicit;
    if (t == "explicit") return DriftTreatment::explicit_euler;
    throw ConfigError("unknown treatment '" + t + "'");
}

inline SimulationOptions build_sim_options(const RunConfig& c) {
    SimulationOptions o;
    o.treatment = build_treatment(c);
    o.stochastic_floor = c.flag("stochastic_floor");
    o.stop_threshold = c.num("stop_threshold");
    o.overflow_guard = c.num("overflow_guard");
    if (!(o.overflow_guard > 0.0)) throw ConfigError("overflow_guard must be positive");
    return o;
}

inline std::vector<double> build_x0(const RunConfig& c, const Grid& grid) {
    std::vector<double> x0(grid.nx);
    const double k = (grid.is_circle() ? 2.0 : 1.0) * std::numbers::pi;
    const double a = c.num("x0");
    const double b = c.num("x0_amplitude");
    for (std::size_t i = 0; i < grid.nx; ++i) x0[i] = a + b * std::sin(k * grid.x_coords[i]);
    return x0;
}

inline KernelConfig build_kernel_config(const RunConfig& c) {
    KernelConfig k;
    k.image_tolerance = c.num("image_tolerance");
    k.quadrature_n = static_cast<int>(c.integer("quadrature_n"));
    k.validate();
    return k;
}

/// Obstacle input v with v(., 0) = x0.
inline SpaceTimeField build_obstacle_v(const RunConfig& c, const Grid& grid, double shift = 0.0) {
    const auto x0 = build_x0(c, grid);
    const std::string& kind = c.str("obstacle_v");
    SpaceTimeField v = make_field(grid);
    const double rate = c.num("obstacle_v_rate");
    const double amp = c.num("obstacle_v_amplitude");
    const double k = (grid.is_circle() ? 2.0 : 1.0) * std::numbers::pi * static_cast<double>(c.integer("obstacle_v_mode"));
    if (kind != "zero" && kind != "rise" && kind != "sine") throw ConfigError("unknown obstacle_v '" + kind + "'");
    for (std::size_t s = 0; s <= grid.nt; ++s) {
        const double t = grid.time(s);
        for (std::size_t i = 0; i < grid.nx; ++i) {
            double val = x0[i];
            if (kind == "rise") val += rate * t;
            if (kind == "sine") val += amp * std::sin(k * grid.x_coords[i]) * t / grid.T;
            v(s, i) = val + (s > 0 ? shift : 0.0);
        }
    }
    return v;
}

inline HittingConfig build_hitting_config(const RunConfig& c) {
    HittingConfig h;
    h.domain = parse_domain_kind(c.str("domain"));
    const long long nx = c.integer("nx");
    const long long nt = c.integer("nt");
    if (nx <= 0 || nt <= 0) throw ConfigError("nx and nt must be positive");
    h.nx = static_cast<std::size_t>(nx);
    h.nt = static_cast<std::size_t>(nt);
    h.T = c.num("T");
    h.walls = build_wall_profile(c);
    h.x0_value = c.num("x0");
    h.x0_amplitude = c.num("x0_amplitude");
    h.coeff = build_coefficients(c);
    h.drift = build_drift(c);
    h.mode = parse_sim_mode(c.str("mode"));
    h.sim = build_sim_options(c);
    h.threads = c.count("threads");
    h.config_hash = c.hash();
    return h;
}

/// Re-validates every typed value so that bad input fails before any work starts.
inline void validate_config(const RunConfig& c) {
    const Grid grid = build_grid(c);
    if (c.str("walls") != "csv") (void)build_wall_profile(c);
    (void)build_coefficients(c);
    const SimulationOptions sim = build_sim_options(c);
    const SingularDriftSpec drift = build_drift(c);
    (sim.stochastic_floor ? stochastic_drift_spec(drift, grid) : drift).validate();
    (void)parse_sim_mode(c.str("mode"));
    (void)build_kernel_config(c);
    (void)c.flag("allow_gap_decrease");
    (void)c.flag("gzip");
    (void)c.integer("seed");
    (void)c.count("path_index");
    if (c.count("n_paths") == 0) throw ConfigError("n_paths must be at least 1");
    (void)c.count("threads");
    if (!(c.num("eta") >= 0.0)) throw ConfigError("eta must be nonnegative");
    (void)c.list("theta_list");
    (void)c.list("rho_list");
    (void)c.list("green_a_list");
    for (double n : c.list("green_nx_list"))
        if (!(n >= 4.0) || n != std::floor(n)) throw ConfigError("green_nx_list entries must be integers >= 4");
    (void)c.count("picard_max_iter");
    (void)c.num("picard_tol");
    (void)c.optional_num("envelope_kappa");
    (void)c.num("envelope_delta");
    (void)c.num("envelope_threshold");
    (void)c.num("envelope_chi_clip");
    (void)c.integer("psi_mode");
    (void)c.integer("obstacle_v_mode");
    (void)c.count("eps_levels");
    (void)c.num("obstacle_shift");
    (void)build_obstacle_v(c, make_grid(grid.domain_kind, static_cast<long long>(grid.nx), grid.T, 1));
    const std::string& task = c.str("obstacle_task");
    if (task != "single" && task != "contraction" && task != "schedule" && task != "penalized") {
        throw ConfigError("unknown obstacle_task '" + task + "'");
    }
}

}  // namespace twowall
