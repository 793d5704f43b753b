#pragma once

#include "boundsplat/core/primitives.hpp"
#include "boundsplat/guidance/remote.hpp"
#include "boundsplat/guidance/source.hpp"
#include "boundsplat/io/asset.hpp"
#include "boundsplat/io/checkpoint.hpp"
#include "boundsplat/io/ply.hpp"
#include "boundsplat/io/png.hpp"
#include "boundsplat/optim/stages.hpp"
#include "boundsplat/pipeline/config.hpp"
#include "boundsplat/raster/render.hpp"

#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace boundsplat::pipeline {

namespace fs = std::filesystem;

/// Something that can be rendered: a free cloud or a bound asset.
struct Renderable {
    std::optional<GaussianCloud3D> cloud;
    std::optional<BoundAsset> asset;

    raster::RenderTarget render(const CameraPose& cam, const raster::RasterSettings& rs) const {
        return asset ? raster::render(*asset, cam, rs) : raster::render(*cloud, cam, rs);
    }
};

/// Loads "<stem>" (bound asset: <stem>.gdba + <stem>.mesh.ply) or a Gaussian PLY.
inline Renderable load_renderable(const std::string& path) {
    Renderable r;
    if (fs::exists(path + ".gdba")) r.asset = io::load_bound_asset(path);
    else if (path.ends_with(".gdba")) r.asset = io::load_bound_asset(path.substr(0, path.size() - 5));
    else if (fs::exists(path)) r.cloud = io::load_gaussians(path);
    else throw ConfigError("asset not found: '" + path + "'");
    return r;
}

inline ColoredMesh load_input_mesh(const std::string& input) {
    if (is_builtin_mesh(input)) {
        const std::string spec = input.substr(8);
        if (spec.starts_with("icosphere:")) {
            int n = 0;
            try {
                n = std::stoi(spec.substr(10));
            } catch (const std::logic_error&) {
                throw ConfigError("bad builtin mesh '" + input + "'");
            }
            if (n < 0 || n > 6) throw ConfigError("icosphere subdivision must be in [0, 6]");
            return icosphere(n, 1.0);
        }
        if (spec.starts_with("box")) return box_mesh(Vec3(0.7, 0.7, 0.7), 4);
        throw ConfigError("unknown builtin mesh '" + input + "'");
    }
    if (!fs::exists(input)) throw ConfigError("input mesh not found: '" + input + "'");
    return io::load_mesh(input);
}

/// Guidance for one stage. The returned source may reference state owned by `keep`.
struct GuidanceBundle {
    std::shared_ptr<const guidance::ScoreProvider> provider;
    std::shared_ptr<const Renderable> reference;
    std::unique_ptr<guidance::GuidanceSource> source;
};

inline GuidanceBundle make_guidance(const std::string& provider_text, const StageConfig& cfg) {
    const ProviderSpec spec = ProviderSpec::parse(provider_text);
    GuidanceBundle b;
    if (spec.kind == ProviderSpec::Kind::Oracle) {
        b.reference = std::make_shared<const Renderable>(load_renderable(spec.path));
        raster::RasterSettings rs;
        rs.background = cfg.background;
        rs.cutoff_sigma = cfg.cutoff_sigma;
        auto ref = b.reference;
        b.source = std::make_unique<guidance::PhotometricGuidance>(
            [ref, rs](const CameraPose& cam) { return ref->render(cam, rs).color; });
        return b;
    }
    if (spec.kind == ProviderSpec::Kind::Toy) {
        Image cond(1, 1, 3), uncond(1, 1, 3, 0.5);
        for (int k = 0; k < 3; ++k) cond.data[k] = spec.toy_color[k];
        b.provider = std::make_shared<guidance::ToyGaussianProvider>(guidance::NoiseSchedule::linear(), cond, uncond, 0.01);
    } else {
        b.provider = std::make_shared<guidance::RemoteProvider>(spec.host, spec.port);
    }
    guidance::DistillSettings ds;
    ds.mode = cfg.guidance == GuidanceKind::SDS ? guidance::DistillMode::SDS : guidance::DistillMode::ISM;
    ds.prompt = cfg.prompt;
    ds.cfg = cfg.cfg;
    ds.t_min = cfg.t_range.lo;
    ds.t_max = cfg.t_range.hi;
    ds.delta = cfg.ism_delta;
    ds.strides = cfg.ism_strides;
    ds.anneal = cfg.anneal_t;
    b.source = std::make_unique<guidance::DistillGuidance>(b.provider, ds);
    return b;
}

// ---- artifacts -------------------------------------------------------------

inline void write_loss_csv(const std::string& path, const std::vector<optim::LogRow>& log) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << "iteration,loss,mean_abs_update,lr\n";
    out.precision(17);
    for (const auto& r : log) out << r.iteration << ',' << r.loss << ',' << r.mean_abs_update << ',' << r.lr << '\n';
}

inline std::vector<Image> turntable(const std::function<Image(const CameraPose&)>& render, const ExportOptions& e,
                                    double fov) {
    std::vector<Image> frames;
    for (int f = 0; f < e.turntable_frames; ++f) {
        const double az = 360.0 * f / e.turntable_frames;
        frames.push_back(render(CameraPose::orbit(e.turntable_radius, az, e.turntable_elevation, fov,
                                                  e.turntable_resolution, e.turntable_resolution)));
    }
    return frames;
}

inline void write_turntable(const std::string& path, const Renderable& r, const PipelineConfig& c, const Vec3& bg) {
    raster::RasterSettings rs;
    rs.background = bg;
    rs.cutoff_sigma = c.stage2.cutoff_sigma;
    const auto frames = turntable([&](const CameraPose& cam) { return r.render(cam, rs).color; }, c.export_opt,
                                  c.stage2.fov_deg);
    io::save_png(path, io::horizontal_strip(frames));
}

inline void write_resolved_config(const PipelineConfig& c) {
    std::ofstream out(fs::path(c.out) / "config.resolved.toml");
    if (!out) throw Error("cannot write the resolved config into '" + c.out + "'");
    out << print_config(c);
}

inline optim::RunOptions run_options(const PipelineConfig& c, const std::string& checkpoint_name,
                                     const std::string& resume) {
    optim::RunOptions o;
    o.checkpoint_path = (fs::path(c.out) / checkpoint_name).string();
    o.config_text = print_config(c);
    if (!resume.empty()) {
        if (!fs::exists(resume)) throw ConfigError("checkpoint not found: '" + resume + "'");
        o.resume = io::load_checkpoint(resume);
    }
    std::uint64_t every = 0;
    o.on_log = [every](const optim::LogRow& r) mutable {
        if (++every % 100 == 0) spdlog::info("iteration {}: loss {:.6g}, mean |update| {:.4g}", r.iteration + 1, r.loss,
                                             r.mean_abs_update);
    };
    return o;
}

struct Stage1Outputs {
    ColoredMesh mesh;
    std::string mesh_path;
};

inline Stage1Outputs cmd_stage1(const PipelineConfig& c, const std::string& resume = {}) {
    validate(c);
    fs::create_directories(c.out);
    write_resolved_config(c);
    const ColoredMesh init = load_input_mesh(c.input);
    const GuidanceBundle g = make_guidance(c.provider, c.stage1);
    spdlog::info("stage 1: {} iterations, guidance {}", c.stage1.iterations, g.source->name());
    const auto r = optim::run_stage1(init, c.stage1, *g.source, run_options(c, "stage1.gdck", resume), c.extract);
    Stage1Outputs out{r.surface.mesh, (fs::path(c.out) / "stage1_mesh.ply").string()};
    io::save_mesh(out.mesh_path, out.mesh);
    // Surfels as flat 3D Gaussians, for viewers.
    GaussianCloud3D flat;
    flat.resize(r.surfels.size());
    flat.positions = r.surfels.positions;
    flat.colors = r.surfels.colors;
    flat.opacity_logits = r.surfels.opacity_logits;
    flat.rotations = r.surfels.rotations;
    for (std::size_t i = 0; i < r.surfels.size(); ++i) {
        flat.log_scales[3 * i] = r.surfels.log_scales[2 * i];
        flat.log_scales[3 * i + 1] = r.surfels.log_scales[2 * i + 1];
        flat.log_scales[3 * i + 2] = std::min(r.surfels.log_scales[2 * i], r.surfels.log_scales[2 * i + 1]) - 4.6;
    }
    io::save_gaussians((fs::path(c.out) / "stage1_surfels.ply").string(), flat);
    write_loss_csv((fs::path(c.out) / "stage1_loss.csv").string(), r.log);
    Renderable mesh_splats;
    mesh_splats.asset = optim::initial_asset(out.mesh, c.stage2);
    write_turntable((fs::path(c.out) / "stage1_turntable.png").string(), mesh_splats, c, c.stage1.background);
    spdlog::info("stage 1: mesh with {} vertices, {} triangles -> {}", out.mesh.vertex_count(),
                 out.mesh.triangle_count(), out.mesh_path);
    return out;
}

struct Stage2Outputs {
    optim::Stage2Result result;
    std::string asset_path; // bound stem, or free-cloud PLY
};

inline Stage2Outputs cmd_stage2(const PipelineConfig& c, const ColoredMesh* mesh = nullptr,
                                const std::string& resume = {}) {
    validate(c, mesh == nullptr);
    fs::create_directories(c.out);
    write_resolved_config(c);
    const ColoredMesh input = mesh ? *mesh : load_input_mesh(c.input);
    const GuidanceBundle g = make_guidance(c.provider, c.stage2);
    spdlog::info("stage 2: {} iterations, binding {}, guidance {}", c.stage2.iterations,
                 detail::binding_name(c.stage2.binding), g.source->name());
    Stage2Outputs out{optim::run_stage2(input, c.stage2, *g.source, run_options(c, "stage2.gdck", resume)), {}};
    Renderable r;
    if (c.stage2.binding == BindingMode::Free) {
        out.asset_path = (fs::path(c.out) / "free.splat.ply").string();
        io::save_gaussians(out.asset_path, out.result.free_cloud);
        r.cloud = out.result.free_cloud;
    } else {
        out.asset_path = (fs::path(c.out) / "asset").string();
        io::save_bound_asset(out.asset_path, out.result.asset);
        r.asset = out.result.asset;
    }
    write_loss_csv((fs::path(c.out) / "stage2_loss.csv").string(), out.result.log);
    write_turntable((fs::path(c.out) / "turntable.png").string(), r, c, c.stage2.background);
    spdlog::info("stage 2: wrote {}", out.asset_path);
    return out;
}

inline Stage2Outputs cmd_full(const PipelineConfig& c) {
    const Stage1Outputs s1 = cmd_stage1(c);
    return cmd_stage2(c, &s1.mesh);
}

/// Turntable of an existing asset.
inline void cmd_render(const PipelineConfig& c, const std::string& asset, const std::string& png) {
    const Renderable r = load_renderable(asset);
    write_turntable(png, r, c, c.stage2.background);
}

/// Poses a bound asset through a deformation stream; one PNG per frame (camera at
/// the first turntable position) plus a strip of all frames.
inline std::size_t cmd_animate(const PipelineConfig& c, const std::string& asset_stem, const std::string& frames_path,
                               const std::string& out_dir) {
    if (!fs::exists(asset_stem + ".gdba")) throw ConfigError("bound asset not found: '" + asset_stem + "'");
    if (!fs::exists(frames_path)) throw ConfigError("deformation stream not found: '" + frames_path + "'");
    const BoundAsset a = io::load_bound_asset(asset_stem);
    const bind::DeformationStream stream = io::load_deformation(frames_path);
    const auto clouds = bind::play(a, stream);
    fs::create_directories(out_dir);
    const auto& e = c.export_opt;
    const CameraPose cam = CameraPose::orbit(e.turntable_radius, 0.0, e.turntable_elevation, c.stage2.fov_deg,
                                             e.turntable_resolution, e.turntable_resolution);
    raster::RasterSettings rs;
    rs.background = c.stage2.background;
    rs.cutoff_sigma = c.stage2.cutoff_sigma;
    std::vector<Image> imgs(clouds.size());
    tbb::parallel_for(std::size_t{0}, clouds.size(), [&](std::size_t f) { imgs[f] = raster::render(clouds[f], cam, rs).color; });
    for (std::size_t f = 0; f < imgs.size(); ++f)
        io::save_png((fs::path(out_dir) / fmt::format("frame_{:04d}.png", f)).string(), imgs[f]);
    if (!imgs.empty()) io::save_png((fs::path(out_dir) / "frames_strip.png").string(), io::horizontal_strip(imgs));
    return imgs.size();
}

/// Bakes a bound asset to a viewer-ready Gaussian PLY.
inline void cmd_export(const std::string& asset_stem, const std::string& ply) {
    if (!fs::exists(asset_stem + ".gdba")) throw ConfigError("bound asset not found: '" + asset_stem + "'");
    io::save_gaussians(ply, realize_cloud(io::load_bound_asset(asset_stem)));
}

} // namespace boundsplat::pipeline
