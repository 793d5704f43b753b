#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/image.hpp"
#include "boundsplat/guidance/schedule.hpp"

#include <functional>
#include <memory>
#include <string>
#include <utility>

namespace boundsplat::guidance {

/// Element-wise classifier-free guidance.
inline Image cfg_combine(const Image& cond, const Image& uncond, double scale) {
    require_same_shape(cond, uncond, "cfg_combine");
    Image out = uncond;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += scale * (cond.data[i] - uncond.data[i]);
    return out;
}

/// Source of noise predictions eps_hat(x_t; y, t). An empty prompt is the null
/// condition. Implementations apply classifier-free guidance themselves, so
/// `cfg` is ignored for the null prompt. Must be safe to call concurrently.
class ScoreProvider {
public:
    virtual ~ScoreProvider() = default;
    virtual Image predict_noise(const Image& x_t, int t, const std::string& prompt, double cfg) const = 0;
    virtual const NoiseSchedule& schedule() const = 0;
    virtual std::string name() const = 0;
};

/// Wraps a plain function of (x_t, t, prompt); CFG is applied on top.
class FunctionProvider : public ScoreProvider {
public:
    using Fn = std::function<Image(const Image& x_t, int t, const std::string& prompt)>;

    FunctionProvider(NoiseSchedule schedule, Fn fn, std::string name = "function")
        : schedule_(std::move(schedule)), fn_(std::move(fn)), name_(std::move(name)) {}

    Image predict_noise(const Image& x_t, int t, const std::string& prompt, double cfg) const override {
        schedule_.check(t);
        Image uncond = fn_(x_t, t, "");
        require_same_shape(uncond, x_t, "FunctionProvider");
        if (prompt.empty() || cfg == 0.0) return uncond;
        Image cond = fn_(x_t, t, prompt);
        require_same_shape(cond, x_t, "FunctionProvider");
        return cfg == 1.0 ? cond : cfg_combine(cond, uncond, cfg);
    }
    const NoiseSchedule& schedule() const override { return schedule_; }
    std::string name() const override { return name_; }

private:
    NoiseSchedule schedule_;
    Fn fn_;
    std::string name_;
};

/// Analytic diffusion of per-pixel independent Gaussian data x0 ~ N(m, v). Its
/// exact noise prediction is
///   eps_hat(x_t, t) = sqrt(1 - a) (x_t - sqrt(a) m) / (a v + 1 - a),   a = alpha_bar(t).
/// The conditional and null prompts use separate means. With v = 0 the data is
/// a point mass and deterministic DDIM steps are exactly invertible. The clean
/// level t = 0 predicts zero noise.
class ToyGaussianProvider : public ScoreProvider {
public:
    /// Means are either full images or 1x1 per-channel constants broadcast over any shape.
    ToyGaussianProvider(NoiseSchedule schedule, Image cond_mean, Image uncond_mean, double variance)
        : schedule_(std::move(schedule)), cond_(std::move(cond_mean)), uncond_(std::move(uncond_mean)),
          variance_(variance) {
        if (!(variance >= 0.0)) throw ValidationError("ToyGaussianProvider: variance must be >= 0");
        if (cond_.channels != uncond_.channels) throw ValidationError("ToyGaussianProvider: channel mismatch");
    }

    Image predict_noise(const Image& x_t, int t, const std::string& prompt, double cfg) const override {
        Image uncond = predict(x_t, t, uncond_);
        if (prompt.empty() || cfg == 0.0) return uncond;
        Image cond = predict(x_t, t, cond_);
        return cfg_combine(cond, uncond, cfg);
    }
    const NoiseSchedule& schedule() const override { return schedule_; }
    std::string name() const override { return "toy"; }
    double variance() const { return variance_; }

private:
    static double mean_at(const Image& mean, std::size_t i) {
        return mean.width == 1 && mean.height == 1 ? mean.data[i % mean.channels] : mean.data[i];
    }

    Image predict(const Image& x_t, int t, const Image& mean) const {
        const bool broadcast = mean.width == 1 && mean.height == 1;
        if (x_t.channels != mean.channels || (!broadcast && !mean.same_shape(x_t)))
            throw ValidationError("ToyGaussianProvider: request shape does not match the data mean");
        const double a = schedule_.alpha_bar(t);
        const double sa = std::sqrt(a), s1 = std::sqrt(1.0 - a);
        const double denom = a * variance_ + 1.0 - a;
        Image out(x_t.width, x_t.height, x_t.channels);
        // At the clean level there is no noise to predict (the v = 0 limit is 0/0).
        if (a == 1.0) return out;
        for (std::size_t i = 0; i < x_t.data.size(); ++i)
            out.data[i] = s1 * (x_t.data[i] - sa * mean_at(mean, i)) / denom;
        return out;
    }

    NoiseSchedule schedule_;
    Image cond_;
    Image uncond_;
    double variance_;
};

} // namespace boundsplat::guidance
