#pragma once

#include <charconv>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "twowall/grid.hpp"
#include "twowall/hitting.hpp"
#include "twowall/obstacle.hpp"
#include "twowall/spde.hpp"

namespace twowall {

/// Shortest decimal that round-trips; "inf" / "-inf" / "nan" for non-finite values.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_hash(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// RFC 4180 field: quoted when it contains a comma, quote or line break.
inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void header(const std::vector<std::string_view>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << csv_field(cols[i]);
        out_ << "\r\n";
    }
    CsvWriter& field(double v) { return raw(format_number(v)); }
    template <std::unsigned_integral U>
    CsvWriter& field(U v) {
        return raw(std::to_string(v));
    }
    CsvWriter& field(std::string_view s) { return raw(csv_field(s)); }
    void end_row() {
        out_ << "\r\n";
        first_ = true;
    }

private:
    CsvWriter& raw(const std::string& s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
        return *this;
    }
    std::ostream& out_;
    bool first_ = true;
};

/// step,t,cell,x,X,upsilon_mass,gamma_mass; one row per (step, cell).
inline void write_trajectory_csv(std::ostream& out, const SolutionPath& path) {
    CsvWriter w(out);
    w.header({"step", "t", "cell", "x", "X", "upsilon_mass", "gamma_mass"});
    for (std::size_t k = 0; k < path.X.rows(); ++k)
        for (std::size_t i = 0; i < path.X.cols(); ++i) {
            w.field(k).field(path.grid.time(k)).field(i).field(path.grid.x_coords[i]).field(path.X(k, i));
            w.field(path.ledger.upsilon_mass(k, i)).field(path.ledger.gamma_mass(k, i));
            w.end_row();
        }
}

/// step,t,min_gap_lower,min_gap_upper.
inline void write_min_gap_csv(std::ostream& out, const SolutionPath& path) {
    CsvWriter w(out);
    w.header({"step", "t", "min_gap_lower", "min_gap_upper"});
    const auto series = min_gap_series(path);
    for (std::size_t k = 0; k < series.size(); ++k) {
        w.field(k).field(path.grid.time(k)).field(series[k].lower).field(series[k].upper);
        w.end_row();
    }
}

/// step,t,cell,x,xi,X.
inline void write_xi_csv(std::ostream& out, const ObstacleSolution& sol, const Grid& grid) {
    CsvWriter w(out);
    w.header({"step", "t", "cell", "x", "xi", "X"});
    for (std::size_t k = 0; k < sol.xi.rows(); ++k)
        for (std::size_t i = 0; i < sol.xi.cols(); ++i) {
            w.field(k).field(grid.time(k)).field(i).field(grid.x_coords[i]).field(sol.xi(k, i)).field(sol.x(k, i));
            w.end_row();
        }
}

/// step,t,cell,x,upsilon_mass,gamma_mass.
inline void write_ledger_csv(std::ostream& out, const ReflectionLedger& ledger, const Grid& grid) {
    CsvWriter w(out);
    w.header({"step", "t", "cell", "x", "upsilon_mass", "gamma_mass"});
    for (std::size_t k = 0; k < ledger.upsilon_mass.rows(); ++k)
        for (std::size_t i = 0; i < ledger.upsilon_mass.cols(); ++i) {
            w.field(k).field(grid.time(k)).field(i).field(grid.x_coords[i]);
            w.field(ledger.upsilon_mass(k, i)).field(ledger.gamma_mass(k, i));
            w.end_row();
        }
}

/// theta,n_paths,n_hits,p_hat,ci_low,ci_high,eta,T,seed,config_hash.
inline void write_hitting_csv(std::ostream& out, const HittingTable& table) {
    CsvWriter w(out);
    w.header({"theta", "n_paths", "n_hits", "p_hat", "ci_low", "ci_high", "eta", "T", "seed", "config_hash"});
    for (const auto& r : table.rows) {
        w.field(r.theta).field(r.n_paths).field(r.n_hits).field(r.p_hat).field(r.ci_low).field(r.ci_high);
        w.field(r.eta).field(r.T).field(r.seed).field(std::string_view(format_hash(r.config_hash)));
        w.end_row();
    }
}

/// iteration,sup_distance.
inline void write_picard_history_csv(std::ostream& out, const std::vector<double>& history) {
    CsvWriter w(out);
    w.header({"iteration", "sup_distance"});
    for (std::size_t n = 0; n < history.size(); ++n) {
        w.field(n + 1).field(history[n]);
        w.end_row();
    }
}

}  // namespace twowall
