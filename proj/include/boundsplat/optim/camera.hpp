#pragma once

#include "boundsplat/core/camera.hpp"
#include "boundsplat/optim/config.hpp"

#include <cstdint>
#include <random>

namespace boundsplat::optim {

/// Generator for one (iteration, view) slot. Every random draw of a run is keyed
/// this way, so a resumed run reproduces the uninterrupted one.
inline std::mt19937_64 slot_rng(std::uint64_t seed, std::uint64_t iteration, std::uint64_t view, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32),
                      static_cast<std::uint32_t>(view), tag};
    return std::mt19937_64(seq);
}

namespace detail {
inline double draw(std::mt19937_64& rng, const Range& r) {
    if (r.lo == r.hi) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}
} // namespace detail

/// Orbit camera with radius, azimuth and elevation drawn uniformly from the ranges.
inline CameraPose sample_camera(const StageConfig& cfg, std::mt19937_64& rng, int resolution) {
    const double r = detail::draw(rng, cfg.radius);
    const double az = detail::draw(rng, cfg.azimuth);
    const double el = detail::draw(rng, cfg.elevation);
    return CameraPose::orbit(r, az, el, cfg.fov_deg, resolution, resolution);
}

inline CameraPose sample_camera(const StageConfig& cfg, std::uint64_t iteration, std::uint64_t view) {
    auto rng = slot_rng(cfg.seed, iteration, view, 0xca3u);
    return sample_camera(cfg, rng, cfg.render_resolution);
}

} // namespace boundsplat::optim
