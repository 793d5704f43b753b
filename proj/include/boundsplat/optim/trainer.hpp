#pragma once

#include "boundsplat/bind/bind.hpp"
#include "boundsplat/core/image.hpp"
#include "boundsplat/guidance/source.hpp"
#include "boundsplat/io/checkpoint.hpp"
#include "boundsplat/optim/adam.hpp"
#include "boundsplat/optim/camera.hpp"
#include "boundsplat/optim/config.hpp"
#include "boundsplat/raster/render.hpp"

#include <spdlog/spdlog.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace boundsplat::optim {

inline constexpr double kOpacityLogitBound = 9.21; // opacity in [1e-4, 1 - 1e-4]
inline constexpr double kMinLogScale = -9.21;      // 1e-4 scene units

namespace detail {
inline void clamp_all(std::vector<double>& v, double lo, double hi) {
    for (double& x : v) x = std::clamp(x, lo, hi);
}
} // namespace detail

/// One optimizable representation: exposes parameter groups, renders, and pulls
/// image gradients back onto its groups (same order as `groups()`).
class Model {
public:
    virtual ~Model() = default;
    virtual std::vector<ParamGroup> groups() = 0;
    virtual raster::RenderTarget render(const CameraPose& cam, const raster::RasterSettings& rs) const = 0;
    virtual std::vector<std::vector<double>> backward(const CameraPose& cam, const Image& d_color,
                                                      const raster::RasterSettings& rs) const = 0;
    /// Adds regularizer gradients in place; returns the regularizer value.
    virtual double regularize(std::vector<std::vector<double>>&) const { return 0.0; }
    /// Post-step projections back onto the valid parameter set.
    virtual void project() = 0;
    /// Removes low-opacity primitives (and their optimizer state). Default: no pruning.
    virtual std::size_t prune(double, AdamState&) { return 0; }
    virtual std::size_t size() const = 0;
    virtual void save(io::Checkpoint& ckpt) const = 0;
    virtual void load(const io::Checkpoint& ckpt) = 0;
};

class SurfelModel : public Model {
public:
    SurfelModel(SurfelCloud2D cloud, const StageConfig& cfg) : cloud(std::move(cloud)), cfg_(cfg) {}

    std::vector<ParamGroup> groups() override {
        return {{"positions", &cloud.positions, cfg_.lr.surfel_position},
                {"colors", &cloud.colors, cfg_.lr.color},
                {"opacities", &cloud.opacity_logits, cfg_.lr.opacity},
                {"scales", &cloud.log_scales, cfg_.lr.scale},
                {"rotations", &cloud.rotations, cfg_.lr.rotation}};
    }
    raster::RenderTarget render(const CameraPose& cam, const raster::RasterSettings& rs) const override {
        return raster::render(cloud, cam, rs);
    }
    std::vector<std::vector<double>> backward(const CameraPose& cam, const Image& d,
                                              const raster::RasterSettings& rs) const override {
        auto g = raster::render_backward(cloud, cam, d, rs);
        return {std::move(g.positions), std::move(g.colors), std::move(g.opacity_logits), std::move(g.log_scales),
                std::move(g.rotations)};
    }
    void project() override {
        cloud.renormalize();
        detail::clamp_all(cloud.opacity_logits, -kOpacityLogitBound, kOpacityLogitBound);
        detail::clamp_all(cloud.log_scales, kMinLogScale, cfg_.max_log_scale);
    }
    std::size_t prune(double threshold, AdamState& adam) override {
        std::vector<bool> keep(cloud.size());
        std::size_t removed = 0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            keep[i] = cloud.opacity(i) >= threshold;
            removed += !keep[i];
        }
        if (removed == 0) return 0;
        if (removed == cloud.size()) {
            spdlog::warn("pruning would remove every surfel; skipped");
            return 0;
        }
        cloud.keep(keep);
        if (!adam.m.empty()) {
            const std::size_t strides[] = {3, 3, 1, 2, 4};
            for (std::size_t g = 0; g < 5; ++g) adam.keep_rows(g, keep, strides[g]);
        }
        return removed;
    }
    std::size_t size() const override { return cloud.size(); }
    void save(io::Checkpoint& c) const override {
        c.put("positions", cloud.positions);
        c.put("colors", cloud.colors);
        c.put("opacities", cloud.opacity_logits);
        c.put("scales", cloud.log_scales);
        c.put("rotations", cloud.rotations);
    }
    void load(const io::Checkpoint& c) override {
        cloud.positions = c.array("positions");
        cloud.colors = c.array("colors");
        cloud.opacity_logits = c.array("opacities");
        cloud.log_scales = c.array("scales");
        cloud.rotations = c.array("rotations");
        cloud.validate();
    }

    SurfelCloud2D cloud;

private:
    const StageConfig& cfg_;
};

/// Gaussians bound to mesh triangles: vertices, colors, opacities, in-plane
/// rotations and 3D scales are learnable; the barycentric template is not.
class BoundModel : public Model {
public:
    BoundModel(BoundAsset asset, const StageConfig& cfg)
        : asset(std::move(asset)), rest_(this->asset.mesh.vertices), lap_(this->asset.mesh), cfg_(cfg) {}

    std::vector<ParamGroup> groups() override {
        const double vertex_lr = cfg_.binding == BindingMode::FrozenPositions ? 0.0 : cfg_.lr.vertex_position;
        const double lrs[] = {vertex_lr, cfg_.lr.color, cfg_.lr.opacity, cfg_.lr.rotation, cfg_.lr.scale};
        std::vector<ParamGroup> out;
        const auto views = bind::learnable_views(asset);
        for (std::size_t i = 0; i < views.size(); ++i) out.push_back({views[i].name, views[i].values, lrs[i]});
        return out;
    }
    raster::RenderTarget render(const CameraPose& cam, const raster::RasterSettings& rs) const override {
        return raster::render(asset, cam, rs);
    }
    std::vector<std::vector<double>> backward(const CameraPose& cam, const Image& d,
                                              const raster::RasterSettings& rs) const override {
        auto g = raster::render_backward(asset, cam, d, rs);
        return {std::move(g.vertices), std::move(g.colors), std::move(g.opacity_logits), std::move(g.rotations2d),
                std::move(g.log_scales)};
    }
    double regularize(std::vector<std::vector<double>>& grads) const override {
        return bind::laplacian_penalty(lap_, asset.mesh.vertices, rest_, cfg_.laplacian_weight, grads[0]);
    }
    void project() override {
        asset.renormalize();
        detail::clamp_all(asset.opacity_logits, -kOpacityLogitBound, kOpacityLogitBound);
        for (double& s : asset.log_scales) s = std::max(s, kMinLogScale);
        bind::clamp_scales(asset, cfg_.scale_cap);
    }
    std::size_t size() const override { return asset.size(); }
    void save(io::Checkpoint& c) const override {
        c.put("vertices", asset.mesh.vertices);
        c.put("rest_vertices", rest_);
        c.put("mesh_colors", asset.mesh.colors);
        c.put("template", asset.template_weights);
        c.put("colors", asset.colors);
        c.put("opacities", asset.opacity_logits);
        c.put("rotations2d", asset.rotations2d);
        c.put("scales", asset.log_scales);
        std::vector<std::uint32_t> tris;
        for (const auto& t : asset.mesh.triangles) tris.insert(tris.end(), t.begin(), t.end());
        c.put_indices("triangles", std::move(tris));
    }
    void load(const io::Checkpoint& c) override {
        asset.mesh.vertices = c.array("vertices");
        rest_ = c.array("rest_vertices");
        asset.mesh.colors = c.array("mesh_colors");
        asset.template_weights = c.array("template");
        asset.per_triangle = asset.template_weights.size() / 3;
        asset.colors = c.array("colors");
        asset.opacity_logits = c.array("opacities");
        asset.rotations2d = c.array("rotations2d");
        asset.log_scales = c.array("scales");
        const auto& tris = c.index_array("triangles");
        asset.mesh.triangles.clear();
        for (std::size_t i = 0; i + 2 < tris.size(); i += 3) asset.mesh.triangles.push_back({tris[i], tris[i + 1], tris[i + 2]});
        asset.validate();
        lap_ = bind::Laplacian(asset.mesh);
    }

    BoundAsset asset;

private:
    std::vector<double> rest_;
    bind::Laplacian lap_;
    const StageConfig& cfg_;
};

/// Free 3D Gaussians: the "no geometry constraint" ablation. Positions use the
/// vertex learning rate so the comparison with the bound model is like for like.
class FreeModel : public Model {
public:
    FreeModel(GaussianCloud3D cloud, const StageConfig& cfg) : cloud(std::move(cloud)), cfg_(cfg) {}

    std::vector<ParamGroup> groups() override {
        return {{"positions", &cloud.positions, cfg_.lr.vertex_position},
                {"colors", &cloud.colors, cfg_.lr.color},
                {"opacities", &cloud.opacity_logits, cfg_.lr.opacity},
                {"scales", &cloud.log_scales, cfg_.lr.scale},
                {"rotations", &cloud.rotations, cfg_.lr.rotation}};
    }
    raster::RenderTarget render(const CameraPose& cam, const raster::RasterSettings& rs) const override {
        return raster::render(cloud, cam, rs);
    }
    std::vector<std::vector<double>> backward(const CameraPose& cam, const Image& d,
                                              const raster::RasterSettings& rs) const override {
        auto g = raster::render_backward(cloud, cam, d, rs);
        return {std::move(g.positions), std::move(g.colors), std::move(g.opacity_logits), std::move(g.log_scales),
                std::move(g.rotations)};
    }
    void project() override {
        cloud.renormalize();
        detail::clamp_all(cloud.opacity_logits, -kOpacityLogitBound, kOpacityLogitBound);
        detail::clamp_all(cloud.log_scales, kMinLogScale, cfg_.max_log_scale);
    }
    std::size_t size() const override { return cloud.size(); }
    void save(io::Checkpoint& c) const override {
        c.put("positions", cloud.positions);
        c.put("colors", cloud.colors);
        c.put("opacities", cloud.opacity_logits);
        c.put("scales", cloud.log_scales);
        c.put("rotations", cloud.rotations);
    }
    void load(const io::Checkpoint& c) override {
        cloud.positions = c.array("positions");
        cloud.colors = c.array("colors");
        cloud.opacity_logits = c.array("opacities");
        cloud.log_scales = c.array("scales");
        cloud.rotations = c.array("rotations");
        cloud.validate();
    }

    GaussianCloud3D cloud;

private:
    const StageConfig& cfg_;
};

struct LogRow {
    std::uint64_t iteration;
    double loss;
    double mean_abs_update;
    double lr;
};

struct RunOptions {
    std::string checkpoint_path;            // empty: no checkpoints
    std::optional<io::Checkpoint> resume;   // continue from here
    std::string config_text;                // stored in checkpoints
    std::function<void(const LogRow&)> on_log;
    bool prune = false;                     // stage 1 only
};

struct TrainResult {
    std::vector<LogRow> log;
    std::uint64_t iterations = 0;
};

namespace detail {

struct ViewResult {
    std::vector<std::vector<double>> grads;
    double loss = 0.0;
    double mean_abs = 0.0;
};

inline ViewResult run_view(const Model& model, const StageConfig& cfg, const guidance::GuidanceSource& source,
                           std::uint64_t iteration, std::uint64_t view, const raster::RasterSettings& rs) {
    const CameraPose cam = sample_camera(cfg, iteration, view);
    const Image x = model.render(cam, rs).color;
    const int factor = cfg.downsample_factor();
    const Image xd = factor > 1 ? downsample_area(x, factor) : x;
    const guidance::GuidanceContext ctx{cfg.seed, iteration, static_cast<std::uint64_t>(cfg.iterations), view};
    guidance::GuidanceUpdate upd = source.compute(xd, cam, ctx);
    // Mean over guidance pixels: learning rates do not depend on resolution.
    const double inv = 1.0 / static_cast<double>(xd.pixel_count());
    for (double& g : upd.gradient.data) g *= inv;
    const Image d = factor > 1 ? downsample_area_transpose(upd.gradient, factor) : upd.gradient;
    return {model.backward(cam, d, rs), upd.loss, upd.mean_abs};
}

inline io::Checkpoint snapshot(const Model& model, const AdamState& adam, const StageConfig& cfg, std::uint32_t stage,
                               std::uint64_t iteration, const std::string& config_text) {
    io::Checkpoint c;
    c.stage = stage;
    c.mode = static_cast<std::uint32_t>(cfg.binding);
    c.seed = cfg.seed;
    c.iteration = iteration;
    c.config = config_text;
    c.adam = adam;
    model.save(c);
    return c;
}

} // namespace detail

/// Runs iterations [resume point, cfg.iterations). Each iteration renders a batch
/// of sampled views (concurrently), asks the guidance source for image updates,
/// reduces the gradients in view order and takes one Adam step.
inline TrainResult train(Model& model, const StageConfig& cfg, const guidance::GuidanceSource& source,
                         std::uint32_t stage, RunOptions opt = {}) {
    cfg.validate();
    AdamState adam;
    std::uint64_t start = 0;
    if (opt.resume) {
        if (opt.resume->stage != stage) throw ValidationError("checkpoint belongs to a different stage");
        if (opt.resume->seed != cfg.seed) throw ValidationError("checkpoint was written with a different seed");
        model.load(*opt.resume);
        adam = opt.resume->adam;
        start = opt.resume->iteration;
    }
    raster::RasterSettings rs;
    rs.background = cfg.background;
    rs.cutoff_sigma = cfg.cutoff_sigma;
    TrainResult result;

    auto checkpoint = [&](std::uint64_t done) {
        if (opt.checkpoint_path.empty()) return;
        io::save_checkpoint(opt.checkpoint_path, detail::snapshot(model, adam, cfg, stage, done, opt.config_text));
    };

    const auto total = static_cast<std::uint64_t>(cfg.iterations);
    for (std::uint64_t it = start; it < total; ++it) {
        std::vector<detail::ViewResult> views(static_cast<std::size_t>(cfg.batch_size));
        try {
            tbb::parallel_for(0, cfg.batch_size, [&](int v) {
                views[v] = detail::run_view(model, cfg, source, it, static_cast<std::uint64_t>(v), rs);
            });
        } catch (const ProviderError&) {
            checkpoint(it);
            throw;
        }

        auto groups = model.groups();
        std::vector<std::vector<double>> grads = std::move(views[0].grads);
        double loss = views[0].loss, mean_abs = views[0].mean_abs;
        for (std::size_t v = 1; v < views.size(); ++v) {
            for (std::size_t g = 0; g < grads.size(); ++g)
                for (std::size_t i = 0; i < grads[g].size(); ++i) grads[g][i] += views[v].grads[g][i];
            loss += views[v].loss;
            mean_abs += views[v].mean_abs;
        }
        const double inv_b = 1.0 / static_cast<double>(views.size());
        for (auto& g : grads)
            for (double& x : g) x *= inv_b;
        loss *= inv_b;
        mean_abs *= inv_b;
        if (!(mean_abs <= cfg.abort_update)) {
            checkpoint(it);
            throw NumericError("iteration " + std::to_string(it) + ": mean |update| " + std::to_string(mean_abs) +
                               " exceeds " + std::to_string(cfg.abort_update) + "; aborting");
        }
        loss += model.regularize(grads);
        try {
            adam_step(adam, groups, grads);
        } catch (const NumericError&) {
            checkpoint(it);
            throw;
        }
        model.project();
        if (opt.prune && cfg.prune_interval > 0 && (it + 1) % static_cast<std::uint64_t>(cfg.prune_interval) == 0) {
            const std::size_t removed = model.prune(cfg.prune_threshold, adam);
            if (removed > 0) spdlog::info("iteration {}: pruned {} primitives, {} left", it + 1, removed, model.size());
        }

        const LogRow row{it, loss, mean_abs, groups.front().lr};
        result.log.push_back(row);
        if (opt.on_log) opt.on_log(row);
        if (cfg.checkpoint_interval > 0 && (it + 1) % static_cast<std::uint64_t>(cfg.checkpoint_interval) == 0)
            checkpoint(it + 1);
    }
    result.iterations = total > start ? total - start : 0;
    checkpoint(std::max(start, total));
    return result;
}

} // namespace boundsplat::optim
