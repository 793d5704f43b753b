#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/image.hpp"
#include "boundsplat/guidance/provider.hpp"
#include "boundsplat/guidance/schedule.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace boundsplat::guidance {

/// Image-space update direction dL/dx plus diagnostics.
struct GuidanceUpdate {
    Image gradient;
    double mean_abs = 0.0;
    double loss = 0.0; // mean squared update; equals the MSE for the photometric oracle
    int t = -1;
    int s = -1; // lower ISM level, -1 when unused
};

enum class Weighting { Unit, OneMinusAlphaBar };

inline double weight(const NoiseSchedule& schedule, int t, Weighting w) {
    return w == Weighting::Unit ? 1.0 : 1.0 - schedule.alpha_bar(t);
}

inline double mean_abs(const Image& img) {
    double acc = 0.0;
    for (double v : img.data) acc += std::abs(v);
    return img.data.empty() ? 0.0 : acc / static_cast<double>(img.data.size());
}

namespace detail {

inline GuidanceUpdate finish(Image gradient, int t, int s, const char* what) {
    double sq = 0.0;
    for (double v : gradient.data) {
        if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite update at t = " + std::to_string(t));
        sq += v * v;
    }
    GuidanceUpdate u;
    u.mean_abs = mean_abs(gradient);
    u.loss = gradient.data.empty() ? 0.0 : sq / static_cast<double>(gradient.data.size());
    u.gradient = std::move(gradient);
    u.t = t;
    u.s = s;
    return u;
}

inline Image predict(const ScoreProvider& p, const Image& x, int t, const std::string& prompt, double cfg) {
    Image eps;
    try {
        eps = p.predict_noise(x, t, prompt, cfg);
    } catch (const ProviderError& e) {
        throw ProviderError("provider '" + p.name() + "' failed at t = " + std::to_string(t) + ": " + e.what());
    }
    if (!eps.same_shape(x))
        throw ProviderError("provider '" + p.name() + "' returned a prediction of the wrong shape");
    return eps;
}

/// Levels from `from` to `to` in `strides` near-equal integer steps.
inline std::vector<int> levels(int from, int to, int strides) {
    if (strides < 1) throw ValidationError("DDIM stride count must be >= 1");
    std::vector<int> out{from};
    for (int i = 1; i <= strides; ++i) {
        const int l = from + static_cast<int>(std::lround(static_cast<double>(to - from) * i / strides));
        if (l != out.back()) out.push_back(l);
    }
    return out;
}

/// One deterministic DDIM move from level a to level b using the prediction eps at a.
inline Image ddim_move(const Image& x, const Image& eps, double ab_a, double ab_b) {
    Image out(x.width, x.height, x.channels);
    const double sa = std::sqrt(ab_a), na = std::sqrt(1.0 - ab_a);
    const double sb = std::sqrt(ab_b), nb = std::sqrt(1.0 - ab_b);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double x0 = (x.data[i] - na * eps.data[i]) / sa;
        out.data[i] = sb * x0 + nb * eps.data[i];
    }
    return out;
}

} // namespace detail

/// x_t = sqrt(a_t) x + sqrt(1 - a_t) eps.
inline Image add_noise(const NoiseSchedule& schedule, const Image& x, int t, const Image& eps) {
    require_same_shape(x, eps, "add_noise");
    const double a = schedule.alpha_bar(t);
    const double sa = std::sqrt(a), s1 = std::sqrt(1.0 - a);
    Image out(x.width, x.height, x.channels);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = sa * x.data[i] + s1 * eps.data[i];
    return out;
}

/// w(t) (eps_hat(x_t; y, t) - eps) with x_t built from the given noise.
inline GuidanceUpdate sds_update(const Image& x, const ScoreProvider& provider, const std::string& prompt, int t,
                                 const Image& eps, double w, double cfg) {
    const NoiseSchedule& sch = provider.schedule();
    sch.check(t);
    const Image x_t = add_noise(sch, x, t, eps);
    Image g = detail::predict(provider, x_t, t, prompt, cfg);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = w * (g.data[i] - eps.data[i]);
    return detail::finish(std::move(g), t, -1, "sds_update");
}

/// Result of an inversion, keeping the prediction made at the starting level.
struct Inversion {
    Image x;
    Image eps_start;
};

/// Deterministic DDIM inversion from level s up to s + delta with null-condition
/// predictions, split into `strides` steps.
inline Inversion ddim_invert_traced(const Image& x_s, int s, int delta, const ScoreProvider& provider,
                                    int strides = 1) {
    const NoiseSchedule& sch = provider.schedule();
    sch.check(s);
    if (delta < 0) throw ValidationError("ddim_invert: delta must be >= 0");
    sch.check(s + delta);
    Inversion out{x_s, {}};
    const auto lv = detail::levels(s, s + delta, strides);
    for (std::size_t i = 0; i + 1 < lv.size(); ++i) {
        Image eps = detail::predict(provider, out.x, lv[i], "", 1.0);
        out.x = detail::ddim_move(out.x, eps, sch.alpha_bar(lv[i]), sch.alpha_bar(lv[i + 1]));
        if (i == 0) out.eps_start = std::move(eps);
    }
    return out;
}

inline Image ddim_invert(const Image& x_s, int s, int delta, const ScoreProvider& provider, int strides = 1) {
    return ddim_invert_traced(x_s, s, delta, provider, strides).x;
}

/// Deterministic DDIM sampling from level t down to t - delta on the same level
/// grid that ddim_invert(x, t - delta, delta, strides) uses.
inline Image ddim_denoise(const Image& x_t, int t, int delta, const ScoreProvider& provider,
                          const std::string& prompt = "", double cfg = 1.0, int strides = 1) {
    const NoiseSchedule& sch = provider.schedule();
    sch.check(t);
    if (delta < 0) throw ValidationError("ddim_denoise: delta must be >= 0");
    sch.check(t - delta);
    const auto lv = detail::levels(t - delta, t, strides);
    Image x = x_t;
    for (std::size_t i = lv.size() - 1; i > 0; --i) {
        const Image eps = detail::predict(provider, x, lv[i], prompt, cfg);
        x = detail::ddim_move(x, eps, sch.alpha_bar(lv[i]), sch.alpha_bar(lv[i - 1]));
    }
    return x;
}

struct IsmOptions {
    int strides = 1;        // DDIM steps from s to t
    int prefix_stride = 0;  // level spacing of the 0 -> s inversion; 0 = use delta
};

/// Interval score matching: x is inverted with null-condition DDIM to level
/// s = t - delta, then on to t; the update is
///   w(t) (eps_hat(x_t; y, t) - eps_hat(x_s; null, s)),
/// with CFG on the conditional term only.
inline GuidanceUpdate ism_update(const Image& x, const ScoreProvider& provider, const std::string& prompt, int t,
                                 int delta, double w, double cfg, const IsmOptions& opt = {}) {
    const NoiseSchedule& sch = provider.schedule();
    sch.check(t);
    const int s = t - delta;
    if (delta < 0 || s < 0)
        throw ValidationError("ism_update: need 0 <= delta <= t (t = " + std::to_string(t) +
                              ", delta = " + std::to_string(delta) + ")");
    Image x_s = x;
    if (s > 0) {
        const int stride = opt.prefix_stride > 0 ? opt.prefix_stride : std::max(delta, 1);
        x_s = ddim_invert(x, 0, s, provider, std::max(1, (s + stride - 1) / stride));
    }
    Image x_t, eps_s;
    if (delta == 0) {
        eps_s = detail::predict(provider, x_s, s, "", 1.0);
        x_t = x_s;
    } else {
        Inversion inv = ddim_invert_traced(x_s, s, delta, provider, opt.strides);
        x_t = std::move(inv.x);
        eps_s = std::move(inv.eps_start);
    }
    Image g = detail::predict(provider, x_t, t, prompt, cfg);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = w * (g.data[i] - eps_s.data[i]);
    return detail::finish(std::move(g), t, s, "ism_update");
}

} // namespace boundsplat::guidance
