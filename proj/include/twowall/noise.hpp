#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "twowall/error.hpp"
#include "twowall/grid.hpp"

namespace twowall {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

/**
 * Reproducible stream of standard normals for one Monte Carlo path.
 *
 * The Philox key is the master seed; the 128-bit counter is
 * (block index, path index), so streams for distinct path indices are
 * disjoint by construction and any path can be regenerated in isolation.
 * Each block yields two 64-bit words, turned into two normals by Box-Muller.
 */
class NoiseStream {
public:
    NoiseStream(std::uint64_t master_seed, std::uint64_t path_index)
        : master_seed_(master_seed), path_index_(path_index) {}

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t path_index() const noexcept { return path_index_; }
    std::uint64_t blocks_consumed() const noexcept { return block_; }

    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto words = next_block();
        const std::uint64_t w0 = (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
        const std::uint64_t w1 = (static_cast<std::uint64_t>(words[3]) << 32) | words[2];
        constexpr double kInv53 = 1.0 / 9007199254740992.0;
        const double u1 = (static_cast<double>(w0 >> 11) + 1.0) * kInv53;  // (0,1]
        const double u2 = static_cast<double>(w1 >> 11) * kInv53;          // [0,1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phase = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(phase);
        have_spare_ = true;
        return r * std::cos(phase);
    }

    void fill_normals(std::span<double> out) {
        for (double& v : out) v = next_normal();
    }

private:
    std::array<std::uint32_t, 4> next_block() {
        const std::array<std::uint32_t, 4> ctr{
            static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
            static_cast<std::uint32_t>(path_index_), static_cast<std::uint32_t>(path_index_ >> 32)};
        const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(master_seed_),
                                               static_cast<std::uint32_t>(master_seed_ >> 32)};
        ++block_;
        return philox4x32_10(ctr, key);
    }

    std::uint64_t master_seed_;
    std::uint64_t path_index_;
    std::uint64_t block_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline NoiseStream derive_stream(std::uint64_t master_seed, long long path_index) {
    if (path_index < 0) throw ConfigError("path_index must be nonnegative");
    return NoiseStream(master_seed, static_cast<std::uint64_t>(path_index));
}

/// One unit normal per spatial cell, drawn in cell order. Scaling by sqrt(dt/dx) is the integrator's job.
inline std::vector<double> sample_noise_field(NoiseStream& stream, const Grid& grid) {
    std::vector<double> xi(grid.nx);
    stream.fill_normals(xi);
    return xi;
}

}  // namespace twowall
