#pragma once

#include "boundsplat/core/errors.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace boundsplat::guidance {

/// Cumulative signal levels for discrete noise levels t = 0..T. Level 0 is the
/// clean image (alpha_bar = 1); levels 1..T follow the schedule.
class NoiseSchedule {
public:
    /// Linear-beta schedule, the usual latent-diffusion default.
    static NoiseSchedule linear(int steps = 1000, double beta_start = 8.5e-4, double beta_end = 1.2e-2) {
        if (steps < 1) throw ValidationError("NoiseSchedule: steps must be >= 1");
        if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_end < beta_start)
            throw ValidationError("NoiseSchedule: need 0 < beta_start <= beta_end < 1");
        std::vector<double> ab(steps + 1);
        ab[0] = 1.0;
        double prod = 1.0;
        for (int i = 1; i <= steps; ++i) {
            const double beta = steps == 1 ? beta_start
                                           : beta_start + (beta_end - beta_start) * (i - 1) / static_cast<double>(steps - 1);
            prod *= 1.0 - beta;
            ab[i] = prod;
        }
        return NoiseSchedule(std::move(ab));
    }

    /// Explicit table indexed by t = 0..T. Must be non-increasing, in (0, 1].
    static NoiseSchedule from_alpha_bar(std::vector<double> alpha_bar) { return NoiseSchedule(std::move(alpha_bar)); }

    int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    const std::vector<double>& table() const { return alpha_bar_; }

    double alpha_bar(int t) const {
        check(t);
        return alpha_bar_[t];
    }
    double sigma(int t) const { return std::sqrt(1.0 - alpha_bar(t)); }

    void check(int t) const {
        if (t < 0 || t > steps())
            throw ValidationError("noise level " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
    }

private:
    explicit NoiseSchedule(std::vector<double> ab) : alpha_bar_(std::move(ab)) {
        if (alpha_bar_.size() < 2) throw ValidationError("NoiseSchedule: table needs at least two levels");
        for (std::size_t i = 0; i < alpha_bar_.size(); ++i) {
            const double a = alpha_bar_[i];
            if (!(a > 0.0 && a <= 1.0)) throw ValidationError("NoiseSchedule: alpha_bar must lie in (0, 1]");
            if (i > 0 && a > alpha_bar_[i - 1]) throw ValidationError("NoiseSchedule: alpha_bar must be non-increasing");
        }
    }

    std::vector<double> alpha_bar_;
};

/// 64-bit FNV-1a over the little-endian float32 bytes of the table; used to check
/// that a remote model serves the schedule the client expects.
inline std::string schedule_checksum(const std::vector<double>& table) {
    std::uint64_t h = 1469598103934665603ull;
    for (double v : table) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[i] = hex[h & 0xf];
    return out;
}

} // namespace boundsplat::guidance
