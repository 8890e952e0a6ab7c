#pragma once

// Counter-based random streams.
//
// Every draw is a pure function of (key, counter), so a stream can be opened
// at any coordinate without replaying its predecessors. Replicate weights are
// keyed by (seed, replicate, batch); simulated datasets by (seed, rep, purpose).
// Results are therefore independent of thread scheduling and of whether a
// run was interrupted and resumed.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace aftsgd {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Stream domains keep weight draws and data generation from ever sharing keys.
enum class StreamDomain : std::uint32_t {
    bootstrap_weights = 1,
    simulation = 2,
    calibration = 3,
    monte_carlo = 4,
    synthetic_seer = 5,
};

/// Sequential reader over the counter space of one (seed, domain, stream,
/// substream) coordinate. Draws are consumed four 32-bit words at a time.
class KeyedStream {
public:
    KeyedStream(std::uint64_t seed, StreamDomain domain, std::uint32_t stream,
                std::uint64_t substream) noexcept {
        const std::uint64_t k = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(domain)));
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
        ctr_ = {0u, static_cast<std::uint32_t>(substream),
                static_cast<std::uint32_t>(substream >> 32), stream};
    }

    std::uint32_t next_u32() noexcept {
        if (used_ == 4) refill();
        return block_[used_++];
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1), safe for log and logit transforms.
    double uniform_open() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard exponential (mean 1, variance 1).
    double exponential() noexcept { return -std::log(uniform_open()); }

    /// Standard normal by Box-Muller; the second deviate of each pair is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_open()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Standard logistic.
    double logistic() noexcept {
        const double u = uniform_open();
        return std::log(u / (1.0 - u));
    }

    /// Standard minimum extreme-value (Gumbel-min): log of a unit exponential,
    /// i.e. the log-Weibull error.
    double extreme_value() noexcept { return std::log(exponential()); }

    /// Poisson with mean 1 (mean 1, variance 1) by CDF inversion.
    double poisson_one() noexcept {
        const double u = uniform();
        double term = std::exp(-1.0);
        double cdf = term;
        int k = 0;
        while (u >= cdf && k < 40) {
            ++k;
            term /= k;
            cdf += term;
        }
        return static_cast<double>(k);
    }

private:
    void refill() noexcept {
        block_ = Philox4x32::generate(ctr_, key_);
        ++ctr_[0];
        used_ = 0;
    }

    Philox4x32::Key key_{};
    Philox4x32::Counter ctr_{};
    Philox4x32::Counter block_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace aftsgd
