#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

namespace boundsplat::optim {

struct Range {
    double lo;
    double hi;
};

enum class GuidanceKind { SDS, ISM, Photometric };

/// Stage-2 ablations: Gaussians bound to the mesh, bound with frozen vertices, or
/// released as free 3D Gaussians (no geometry constraint).
enum class BindingMode { Bound, FrozenPositions, Free };

struct LearningRates {
    double surfel_position = 1.6e-5;
    double vertex_position = 1.6e-4;
    double color = 5e-3;
    double opacity = 5e-2;
    double scale = 5e-4;
    double rotation = 5e-4;
};

struct StageConfig {
    int iterations = 5000;
    int batch_size = 4;
    int render_resolution = 1024;
    int guidance_resolution = 512;
    double fov_deg = 45.0;
    Range radius{3.5, 5.5};
    Range azimuth{-180.0, 180.0};
    Range elevation{30.0, 150.0};
    LearningRates lr;
    GuidanceKind guidance = GuidanceKind::ISM;
    double cfg = 7.5;
    Range t_range{0.02, 0.5};
    double ism_delta = 0.1;
    int ism_strides = 1;
    bool anneal_t = false;
    std::string prompt;
    std::uint64_t seed = 0;
    Vec3 background = Vec3::Zero();
    double cutoff_sigma = 3.0; // kernel support while training and for exported renders

    // Stage 1.
    double prune_threshold = 0.05;
    int prune_interval = 500;
    double init_scale_factor = 0.7;
    double init_opacity = 0.5;
    double max_log_scale = 0.0; // scale cap of 1 scene unit

    // Stage 2.
    BindingMode binding = BindingMode::Bound;
    std::size_t per_triangle = 3;
    double laplacian_weight = 1.0;
    double scale_cap = 2.0; // times the host's mean edge length

    double abort_update = 1e3; // mean |update| above this aborts the run
    int checkpoint_interval = 0; // 0: only at the end

    int downsample_factor() const { return render_resolution / guidance_resolution; }

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError(m); };
        auto pow2 = [](int v) { return v >= 64 && (v & (v - 1)) == 0; };
        if (iterations < 0) fail("iterations must be >= 0");
        if (batch_size < 1) fail("batch_size must be >= 1");
        if (!pow2(render_resolution)) fail("render_resolution must be a power of two >= 64");
        if (!pow2(guidance_resolution)) fail("guidance_resolution must be a power of two >= 64");
        if (guidance_resolution > render_resolution) fail("guidance_resolution must not exceed render_resolution");
        if (!(cutoff_sigma >= 2.0 && cutoff_sigma <= 8.0)) fail("cutoff_sigma must be in [2, 8]");
        if (!(fov_deg > 0.0 && fov_deg < 180.0)) fail("fov must be in (0, 180)");
        for (const auto& [name, r] : {std::pair{"radius", radius}, std::pair{"azimuth", azimuth},
                                      std::pair{"elevation", elevation}, std::pair{"t_range", t_range}})
            if (!(r.lo <= r.hi)) fail(std::string(name) + " range is empty");
        if (!(radius.lo > 0.0)) fail("radius must be positive");
        if (!(t_range.lo >= 0.0 && t_range.hi <= 1.0)) fail("t_range must lie in [0, 1]");
        // A zero rate freezes a group (used by the frozen-geometry ablation).
        for (double v : {lr.surfel_position, lr.vertex_position, lr.color, lr.opacity, lr.scale, lr.rotation})
            if (!(v >= 0.0) || !std::isfinite(v)) fail("learning rates must be finite and >= 0");
        if (!(cfg >= 0.0)) fail("cfg must be >= 0");
        if (!(prune_threshold >= 0.0 && prune_threshold < 1.0)) fail("prune_threshold must be in [0, 1)");
        if (prune_interval < 0) fail("prune_interval must be >= 0");
        if (!(init_opacity > 0.0 && init_opacity < 1.0)) fail("init_opacity must be in (0, 1)");
        if (!(init_scale_factor > 0.0)) fail("init_scale_factor must be positive");
        if (per_triangle != 1 && per_triangle != 3 && per_triangle != 6) fail("per_triangle must be 1, 3 or 6");
        if (!(laplacian_weight >= 0.0)) fail("laplacian_weight must be >= 0");
        if (!(scale_cap > 0.0)) fail("scale_cap must be positive");
        if (!(abort_update > 0.0)) fail("abort_update must be positive");
        if (checkpoint_interval < 0) fail("checkpoint_interval must be >= 0");
    }
};

} // namespace boundsplat::optim
