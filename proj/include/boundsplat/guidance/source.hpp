#pragma once

#include "boundsplat/core/camera.hpp"
#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/image.hpp"
#include "boundsplat/guidance/provider.hpp"
#include "boundsplat/guidance/updates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>

namespace boundsplat::guidance {

/// Where in training an update is requested; all randomness derives from it.
struct GuidanceContext {
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;
    std::uint64_t total_iterations = 1;
    std::uint64_t view = 0;
};

/// Anything that turns a rendered image into an image-space update direction.
class GuidanceSource {
public:
    virtual ~GuidanceSource() = default;
    virtual GuidanceUpdate compute(const Image& x, const CameraPose& camera, const GuidanceContext& ctx) const = 0;
    virtual std::string name() const = 0;
};

/// Reconstruction oracle: update = x - x_ref, the gradient of 0.5 ||x - x_ref||^2.
/// References come from a callback (usually a render of a known asset); when the
/// reference is larger than x it is area-downsampled to match.
class PhotometricGuidance : public GuidanceSource {
public:
    using ReferenceFn = std::function<Image(const CameraPose&)>;

    explicit PhotometricGuidance(ReferenceFn reference) : reference_(std::move(reference)) {}

    GuidanceUpdate compute(const Image& x, const CameraPose& camera, const GuidanceContext&) const override {
        Image ref = reference_(camera);
        if (ref.data.empty())
            throw ProviderError("photometric oracle: no reference image for camera (azimuth " +
                                std::to_string(camera.azimuth_deg) + ", elevation " +
                                std::to_string(camera.elevation_deg) + ")");
        if (ref.width != x.width && x.width > 0 && ref.width % x.width == 0) ref = downsample_area(ref, ref.width / x.width);
        require_same_shape(x, ref, "photometric oracle");
        Image g(x.width, x.height, x.channels);
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = x.data[i] - ref.data[i];
        return detail::finish(std::move(g), -1, -1, "photometric oracle");
    }
    std::string name() const override { return "photometric"; }

private:
    ReferenceFn reference_;
};

enum class DistillMode { SDS, ISM };

struct DistillSettings {
    DistillMode mode = DistillMode::ISM;
    std::string prompt;
    double cfg = 7.5;
    double t_min = 0.02; // fractions of T
    double t_max = 0.5;
    double delta = 0.1;  // ISM interval, fraction of T
    int strides = 1;
    Weighting weighting = Weighting::Unit;
    bool anneal = false; // shrink t_max linearly toward t_min over training
};

/// Score distillation through a ScoreProvider. Noise level and noise image are
/// drawn from a generator keyed on (seed, iteration, view).
class DistillGuidance : public GuidanceSource {
public:
    DistillGuidance(std::shared_ptr<const ScoreProvider> provider, DistillSettings settings)
        : provider_(std::move(provider)), settings_(std::move(settings)) {
        if (!provider_) throw ValidationError("DistillGuidance: provider is null");
        const auto& s = settings_;
        if (!(s.t_min >= 0.0 && s.t_min <= s.t_max && s.t_max <= 1.0))
            throw ValidationError("DistillGuidance: need 0 <= t_min <= t_max <= 1");
        if (!(s.delta >= 0.0 && s.delta <= 1.0)) throw ValidationError("DistillGuidance: delta must be in [0, 1]");
    }

    /// Integer level drawn for the given context.
    int sample_level(std::mt19937_64& rng, const GuidanceContext& ctx) const {
        const int T = provider_->schedule().steps();
        double hi = settings_.t_max;
        if (settings_.anneal && ctx.total_iterations > 1)
            hi = settings_.t_max - (settings_.t_max - settings_.t_min) * static_cast<double>(ctx.iteration) /
                                       static_cast<double>(ctx.total_iterations - 1);
        int lo_t = static_cast<int>(std::ceil(settings_.t_min * T));
        int hi_t = static_cast<int>(std::floor(hi * T));
        lo_t = std::clamp(lo_t, 1, T);
        hi_t = std::clamp(hi_t, lo_t, T);
        return std::uniform_int_distribution<int>(lo_t, hi_t)(rng);
    }

    GuidanceUpdate compute(const Image& x, const CameraPose&, const GuidanceContext& ctx) const override {
        std::seed_seq seq{static_cast<std::uint32_t>(ctx.seed), static_cast<std::uint32_t>(ctx.seed >> 32),
                          static_cast<std::uint32_t>(ctx.iteration), static_cast<std::uint32_t>(ctx.view), 0x5d5u};
        std::mt19937_64 rng(seq);
        const NoiseSchedule& sch = provider_->schedule();
        int t = sample_level(rng, ctx);
        if (settings_.mode == DistillMode::SDS) {
            Image eps(x.width, x.height, x.channels);
            std::normal_distribution<double> n;
            for (double& v : eps.data) v = n(rng);
            return sds_update(x, *provider_, settings_.prompt, t, eps, weight(sch, t, settings_.weighting),
                              settings_.cfg);
        }
        const int delta = static_cast<int>(std::lround(settings_.delta * sch.steps()));
        t = std::max(t, delta);
        IsmOptions opt;
        opt.strides = settings_.strides;
        return ism_update(x, *provider_, settings_.prompt, t, delta, weight(sch, t, settings_.weighting), settings_.cfg,
                          opt);
    }

    std::string name() const override {
        return (settings_.mode == DistillMode::SDS ? "sds:" : "ism:") + provider_->name();
    }
    const DistillSettings& settings() const { return settings_; }

private:
    std::shared_ptr<const ScoreProvider> provider_;
    DistillSettings settings_;
};

} // namespace boundsplat::guidance
