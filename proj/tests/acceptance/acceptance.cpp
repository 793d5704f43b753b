// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.
//
//   acceptance                 run everything
//   acceptance --only e2e,det  run a subset (names as printed)
//   acceptance --out DIR       also write the reconstruction renders as PNG strips

#include "boundsplat/bind/bind.hpp"
#include "boundsplat/extract/extract.hpp"
#include "boundsplat/guidance/updates.hpp"
#include "boundsplat/io/checkpoint.hpp"
#include "boundsplat/io/png.hpp"
#include "boundsplat/optim/stages.hpp"
#include "boundsplat/pipeline/fixtures.hpp"
#include "boundsplat/raster/render.hpp"

#include "../support/oracles.hpp"
#include "../support/scenes.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <random>

using namespace boundsplat;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double budget_s; // wall-clock limit, part of the criterion
    std::function<Verdict()> run;
};

double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

double mean_abs_diff(const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s / static_cast<double>(a.data.size());
}

double max_abs(const Image& img) {
    double m = 0.0;
    for (double v : img.data) m = std::max(m, std::abs(v));
    return m;
}

Image random_image(std::mt19937_64& rng, int w, int h) {
    Image img(w, h, 3);
    for (double& v : img.data) v = scenes::uniform(rng, -1.0, 1.0);
    return img;
}

Image constant(double a, double b, double c) {
    Image img(1, 1, 3);
    img.data = {a, b, c};
    return img;
}

// ---- gradients --------------------------------------------------------------

struct WorstError {
    std::map<std::string, double> by_group;
    void add(const std::string& g, double e) { by_group[g] = std::max(by_group[g], e); }
    double worst() const {
        double w = 0.0;
        for (const auto& [_, e] : by_group) w = std::max(w, e);
        return w;
    }
    std::string summary() const {
        std::string s;
        for (const auto& [g, e] : by_group) s += fmt::format("{}{} {:.1e}", s.empty() ? "" : ", ", g, e);
        return s;
    }
};

// Central-difference step. Surfels are composited in per-pixel ray-depth order,
// so two crossing surfels swap order along a curve in parameter space; a wide
// step can straddle that jump. Too narrow a step instead amplifies the tiny
// jump at the kernel cutoff; 1e-5 sits between the two.
constexpr double kStep = 1e-5;

std::vector<double> fd(std::vector<double>& params, const std::function<double()>& loss) {
    return oracle::finite_difference(params, loss, kStep);
}

template <typename Cloud>
void check_cloud(Cloud cloud, const CameraPose& cam, const Image& w, const std::string& kind, WorstError& out) {
    auto loss = [&] { return oracle::weighted_sum(raster::render(cloud, cam).color, w); };
    const auto g = raster::render_backward(cloud, cam, w);
    const std::pair<const char*, std::pair<std::vector<double>*, const std::vector<double>*>> groups[] = {
        {"positions", {&cloud.positions, &g.positions}},      {"colors", {&cloud.colors, &g.colors}},
        {"opacities", {&cloud.opacity_logits, &g.opacity_logits}}, {"scales", {&cloud.log_scales, &g.log_scales}},
        {"rotations", {&cloud.rotations, &g.rotations}}};
    for (const auto& [name, pg] : groups)
        out.add(kind + "." + name, oracle::relative_error(*pg.second, fd(*pg.first, loss)));
}

Verdict gradients() {
    std::mt19937_64 rng(2024);
    WorstError err;
    for (int scene = 0; scene < 8; ++scene) {
        const auto cam = scenes::random_camera(rng, 32, 32);
        const Image w = scenes::random_weights(rng, 32, 32);
        check_cloud(scenes::random_cloud(rng, 20), cam, w, "gaussian", err);
        check_cloud(scenes::random_surfels(rng, 20), cam, w, "surfel", err);

        // 20 triangles, one Gaussian each.
        auto asset = scenes::random_bound_asset(rng, 1);
        auto loss = [&] { return oracle::weighted_sum(raster::render(asset, cam).color, w); };
        const auto g = raster::render_backward(asset, cam, w);
        err.add("bound.vertices", oracle::relative_error(g.vertices, fd(asset.mesh.vertices, loss)));
        err.add("bound.colors", oracle::relative_error(g.colors, fd(asset.colors, loss)));
        err.add("bound.opacities",
                oracle::relative_error(g.opacity_logits, fd(asset.opacity_logits, loss)));
        err.add("bound.rotations",
                oracle::relative_error(g.rotations2d, fd(asset.rotations2d, loss)));
        err.add("bound.scales", oracle::relative_error(g.log_scales, fd(asset.log_scales, loss)));
    }
    return {err.worst() < 1e-3, fmt::format("worst relative error {:.2e} ({})", err.worst(), err.summary())};
}

// ---- compositing ------------------------------------------------------------

Verdict compositing() {
    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (int scene = 0; scene < 50; ++scene) {
        // Half the scenes at the training kernel support, half at the wide default.
        raster::RasterSettings rs;
        oracle::Settings os;
        rs.cutoff_sigma = os.cutoff_sigma = scene % 2 ? 3.0 : 6.0;
        rs.background = os.background = Vec3(scenes::uniform(rng, 0, 1), scenes::uniform(rng, 0, 1), 0.2);
        const auto cam = scenes::random_camera(rng, 48, 40);
        const auto g = scenes::random_cloud(rng, 40);
        worst = std::max(worst, max_abs_diff(raster::render(g, cam, rs).color, oracle::render_gaussians(g, cam, os)));
        const auto s = scenes::random_surfels(rng, 40);
        worst = std::max(worst, max_abs_diff(raster::render(s, cam, rs).color, oracle::render_surfels(s, cam, os)));
    }
    return {worst < 1e-5, fmt::format("max |tiled - naive| = {:.2e} over 50 scenes x 2 kinds", worst)};
}

// ---- bound positions ----------------------------------------------------------

Verdict bound_positions() {
    std::mt19937_64 rng(5);
    double convex = 0.0, rigid = 0.0, linear = 0.0, roundtrip = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t per = std::array<std::size_t, 3>{1, 3, 6}[trial % 3];
        const BoundAsset a = scenes::random_bound_asset(rng, per);
        const auto p = realize_bound_positions(a);
        // Convex combination: barycentric coordinates sum to 1 and are non-negative,
        // and recover the template weights.
        for (std::size_t t = 0; t < a.cluster_count(); ++t) {
            const auto& tri = a.mesh.triangles[t];
            for (std::size_t k = 0; k < per; ++k) {
                const Vec3 bc = oracle::barycentric(Vec3(row<3>(p, t * per + k)), a.mesh.vertex(tri[0]),
                                                    a.mesh.vertex(tri[1]), a.mesh.vertex(tri[2]));
                convex = std::max({convex, std::abs(bc.sum() - 1.0), std::max(0.0, -bc.minCoeff())});
                const Vec3 w(a.template_weights[3 * k], a.template_weights[3 * k + 1], a.template_weights[3 * k + 2]);
                roundtrip = std::max(roundtrip, (bc - w).cwiseAbs().maxCoeff());
            }
        }
        // Rigid motion of the vertices moves every center the same way.
        const RigidTransform m{oracle::rotation_of(scenes::uniform(rng, -1, 1), scenes::uniform(rng, -1, 1),
                                                   scenes::uniform(rng, -1, 1), scenes::uniform(rng, -1, 1)),
                               Vec3(scenes::uniform(rng, -2, 2), scenes::uniform(rng, -2, 2), scenes::uniform(rng, -2, 2))};
        std::vector<double> moved(a.mesh.vertices.size()), other(a.mesh.vertices.size()), mix(a.mesh.vertices.size());
        for (std::size_t i = 0; i < a.mesh.vertex_count(); ++i) row<3>(moved, i) = m.apply(a.mesh.vertex(i));
        const auto pm = realize_bound_positions(a, moved);
        for (std::size_t i = 0; i < a.size(); ++i)
            rigid = std::max(rigid, (Vec3(row<3>(pm, i)) - m.apply(Vec3(row<3>(p, i)))).cwiseAbs().maxCoeff());
        // Linear in the vertices: p(alpha V + beta U) = alpha p(V) + beta p(U).
        for (double& v : other) v = scenes::uniform(rng, -1.5, 1.5);
        const double alpha = scenes::uniform(rng, -2, 2), beta = scenes::uniform(rng, -2, 2);
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * a.mesh.vertices[i] + beta * other[i];
        const auto po = realize_bound_positions(a, other), px = realize_bound_positions(a, mix);
        for (std::size_t i = 0; i < px.size(); ++i) linear = std::max(linear, std::abs(px[i] - (alpha * p[i] + beta * po[i])));
    }
    const double tol = 1e-9;
    return {convex < tol && rigid < tol && linear < tol && roundtrip < tol,
            fmt::format("convexity {:.1e}, rigid {:.1e}, linearity {:.1e}, round trip {:.1e}", convex, rigid, linear,
                        roundtrip)};
}

// ---- guidance -------------------------------------------------------------------

Verdict guidance_identities() {
    using namespace guidance;
    std::mt19937_64 rng(9);
    const auto sch = NoiseSchedule::linear();
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };

    // SDS: a provider that predicts the injected noise exactly yields no update.
    {
        const Image x = random_image(rng, 8, 8), eps = random_image(rng, 8, 8);
        FunctionProvider p(sch, [eps](const Image&, int, const std::string&) { return eps; });
        for (int t : {20, 300, 980}) expect(max_abs(sds_update(x, p, "a chair", t, eps, 1.0, 7.5).gradient) == 0.0, "sds");
    }
    // ISM with conditional == unconditional: zero for an input-independent
    // predictor, and (to round-off) for DDIM-exact point-mass data.
    {
        const Image fixed = random_image(rng, 8, 8), x = random_image(rng, 8, 8);
        FunctionProvider p(sch, [fixed](const Image&, int, const std::string&) { return fixed; });
        for (int delta : {0, 50, 200}) expect(max_abs(ism_update(x, p, "y", 400, delta, 1.0, 7.5).gradient) == 0.0, "ism fixed");
        ToyGaussianProvider toy(sch, constant(0.2, -0.1, 0.4), constant(0.2, -0.1, 0.4), 0.0);
        expect(max_abs(ism_update(x, toy, "y", 500, 100, 1.0, 7.5).gradient) < 1e-9, "ism point mass");
    }
    // CFG: scale 1 is the conditional prediction; equal predictions pass through.
    {
        const Image u = random_image(rng, 6, 6), c = random_image(rng, 6, 6);
        expect(max_abs_diff(cfg_combine(c, u, 1.0), c) < 1e-15, "cfg scale 1");
        for (double s : {0.0, 1.0, 7.5, 100.0}) expect(cfg_combine(u, u, s).data == u.data, "cfg equal");
    }
    // DDIM: inversion then denoising over the same interval returns the start.
    double roundtrip = 0.0;
    {
        ToyGaussianProvider toy(sch, constant(0.3, 0.1, 0.9), constant(0.5, -0.4, 0.2), 0.0);
        const Image xs = random_image(rng, 6, 6);
        for (int strides : {1, 4, 16})
            for (auto [s, d] : {std::pair{20, 100}, std::pair{300, 400}}) {
                const Image back = ddim_denoise(ddim_invert(xs, s, d, toy, strides), s + d, d, toy, "", 1.0, strides);
                roundtrip = std::max(roundtrip, max_abs_diff(back, xs));
            }
        expect(roundtrip < 1e-5, "ddim round trip");
    }
    std::string detail = fmt::format("ddim round trip {:.1e}", roundtrip);
    for (const auto& f : failures) detail += "; failed: " + f;
    return {failures.empty(), detail};
}

// ---- extraction -------------------------------------------------------------------

extract::OrientedPointSet sphere_points(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    extract::OrientedPointSet pts;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 d = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
        pts.add(d, d);
    }
    return pts;
}

extract::OrientedPointSet cube_points(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    extract::OrientedPointSet pts;
    for (std::size_t i = 0; i < n; ++i) {
        const int face = static_cast<int>(i % 6), axis = face / 2;
        const double side = face % 2 ? 0.5 : -0.5;
        Vec3 p(scenes::uniform(rng, -0.5, 0.5), scenes::uniform(rng, -0.5, 0.5), scenes::uniform(rng, -0.5, 0.5));
        p[axis] = side;
        Vec3 nrm = Vec3::Zero();
        nrm[axis] = side > 0 ? 1.0 : -1.0;
        pts.add(p, nrm);
    }
    return pts;
}

std::pair<double, double> radial_error(const ColoredMesh& m) {
    double mean = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        const double d = std::abs(m.vertex(i).norm() - 1.0);
        mean += d;
        worst = std::max(worst, d);
    }
    return {mean / static_cast<double>(m.vertex_count()), worst};
}

Verdict extraction() {
    auto at = [](int n) {
        extract::ExtractOptions o;
        o.poisson.resolution = n;
        o.target_triangles = 0;
        return o;
    };
    const auto sphere = sphere_points(10000, 1);
    const auto [mean, worst] = radial_error(extract::reconstruct_surface(sphere, at(128)).mesh);
    const double volume = signed_volume(extract::reconstruct_surface(cube_points(12000, 3), at(128)).mesh);
    std::vector<double> by_res;
    for (int n : {16, 32, 64, 128}) by_res.push_back(radial_error(extract::reconstruct_surface(sphere, at(n)).mesh).first);
    bool monotone = true;
    for (std::size_t i = 1; i < by_res.size(); ++i) monotone = monotone && by_res[i] < by_res[i - 1];
    return {mean < 0.02 && worst < 0.05 && std::abs(volume - 1.0) < 0.1 && monotone,
            fmt::format("sphere mean {:.4f} max {:.4f}; cube volume {:.4f}; mean error at 16/32/64/128: "
                        "{:.4f} {:.4f} {:.4f} {:.4f}",
                        mean, worst, volume, by_res[0], by_res[1], by_res[2], by_res[3])};
}

// ---- end to end -------------------------------------------------------------------

double held_out_psnr(const std::function<Image(const CameraPose&)>& model,
                     const std::function<Image(const CameraPose&)>& truth, const std::string& strip_path) {
    // Fixed poses between training samples: never drawn exactly by the sampler.
    double sum = 0.0;
    std::vector<Image> frames;
    for (int k = 0; k < 8; ++k) {
        const CameraPose cam = CameraPose::orbit(4.5, 22.5 + 45.0 * k, k % 2 ? 65.0 : 115.0, 45.0, 256, 256);
        const Image a = model(cam), b = truth(cam);
        sum += psnr(a, b);
        if (!strip_path.empty() && k < 4) {
            frames.push_back(a);
            frames.push_back(b);
        }
    }
    if (!strip_path.empty()) io::save_png(strip_path, io::horizontal_strip(frames));
    return sum / 8.0;
}

Verdict end_to_end(const std::string& out_dir) {
    auto strip = [&](const char* name) { return out_dir.empty() ? std::string() : out_dir + "/" + name; };
    // Ground truth: a bumpy painted blob. The coarse input is the same shape at a
    // lower level, uncolored, standing in for a coarse text-to-3D mesh.
    const ColoredMesh truth_mesh = pipeline::textured_blob(4);
    const ColoredMesh coarse = pipeline::textured_blob(3, true, false);

    optim::StageConfig cfg;
    cfg.iterations = 2000;
    cfg.render_resolution = cfg.guidance_resolution = 256;
    cfg.batch_size = 1;
    cfg.seed = 7;
    raster::RasterSettings rs;
    rs.cutoff_sigma = cfg.cutoff_sigma;

    optim::StageConfig truth_cfg = cfg;
    truth_cfg.init_opacity = 0.95;
    const SurfelCloud2D truth_surfels = optim::init_surfels(truth_mesh, truth_cfg);
    const BoundAsset truth_asset = bind::build_bound_asset(truth_mesh);
    auto truth1 = [&](const CameraPose& c) { return raster::render(truth_surfels, c, rs).color; };
    auto truth2 = [&](const CameraPose& c) { return raster::render(truth_asset, c, rs).color; };

    extract::ExtractOptions eo;
    eo.poisson.resolution = 64;
    eo.target_triangles = 2000;
    guidance::PhotometricGuidance oracle1(truth1);
    const auto s1 = optim::run_stage1(coarse, cfg, oracle1, {}, eo);
    const double psnr1 = held_out_psnr([&](const CameraPose& c) { return raster::render(s1.surfels, c, rs).color; },
                                       truth1, strip("stage1_heldout.png"));
    spdlog::info("stage 1: {:.2f} dB", psnr1);

    guidance::PhotometricGuidance oracle2(truth2);
    const auto bound = optim::run_stage2(s1.surface.mesh, cfg, oracle2, {});
    const double psnr_bound = held_out_psnr(
        [&](const CameraPose& c) { return raster::render(bound.asset, c, rs).color; }, truth2, strip("stage2_heldout.png"));
    spdlog::info("stage 2 bound: {:.2f} dB", psnr_bound);
    optim::StageConfig free_cfg = cfg;
    free_cfg.binding = optim::BindingMode::Free;
    const auto free = optim::run_stage2(s1.surface.mesh, free_cfg, oracle2, {});
    const double psnr_free = held_out_psnr([&](const CameraPose& c) { return raster::render(free.cloud(), c, rs).color; },
                                           truth2, strip("free_heldout.png"));
    spdlog::info("stage 2 free: {:.2f} dB", psnr_free);

    return {psnr1 > 28.0 && psnr_bound > 30.0 && psnr_bound - psnr_free >= 1.0,
            fmt::format("stage 1 {:.2f} dB (> 28), stage 2 bound {:.2f} dB (> 30), free {:.2f} dB, "
                        "bound - free {:+.2f} dB (>= 1); {} surfels, {} triangles",
                        psnr1, psnr_bound, psnr_free, psnr_bound - psnr_free, s1.surfels.size(),
                        s1.surface.mesh.triangle_count())};
}

// ---- deformation ------------------------------------------------------------------

Verdict deformation() {
    const BoundAsset a = bind::build_bound_asset(pipeline::textured_blob(2));
    std::mt19937_64 rng(3);
    bind::DeformationStream stream;
    stream.vertex_count = a.mesh.vertex_count();
    std::vector<RigidTransform> motions;
    for (int f = 0; f < 6; ++f) {
        const RigidTransform m{oracle::rotation_of(scenes::uniform(rng, -1, 1), scenes::uniform(rng, -1, 1),
                                                   scenes::uniform(rng, -1, 1), scenes::uniform(rng, -1, 1)),
                               Vec3(scenes::uniform(rng, -0.5, 0.5), scenes::uniform(rng, -0.5, 0.5),
                                    scenes::uniform(rng, -0.5, 0.5))};
        std::vector<double> frame(a.mesh.vertices.size());
        for (std::size_t i = 0; i < stream.vertex_count; ++i) row<3>(frame, i) = m.apply(a.mesh.vertex(i));
        stream.timestamps.push_back(f);
        stream.frames.push_back(std::move(frame));
        motions.push_back(m);
    }
    const auto clouds = bind::play(a, stream);
    const CameraPose cam = CameraPose::orbit(4.0, 35.0, 70.0, 45.0, 96, 96);
    const Image rest = raster::render(a, cam).color;
    double worst = 0.0;
    for (std::size_t f = 0; f < clouds.size(); ++f)
        worst = std::max(worst, mean_abs_diff(raster::render(clouds[f], cam.moved_with(motions[f])).color, rest));
    return {worst < 1e-5, fmt::format("worst mean pixel difference {:.2e} over {} rigid frames", worst, clouds.size())};
}

// ---- determinism ------------------------------------------------------------------

Verdict determinism() {
    const auto dir = std::filesystem::temp_directory_path() / "boundsplat_acceptance";
    std::filesystem::create_directories(dir);
    const BoundAsset truth = bind::build_bound_asset(pipeline::textured_blob(2));
    raster::RasterSettings rs;
    guidance::PhotometricGuidance oracle([&](const CameraPose& c) { return raster::render(truth, c, rs).color; });
    optim::StageConfig cfg;
    cfg.iterations = 12;
    cfg.render_resolution = cfg.guidance_resolution = 64;
    cfg.batch_size = 2;
    cfg.seed = 5;
    cfg.prune_interval = 5;
    extract::ExtractOptions eo;
    eo.poisson.resolution = 32;

    auto bytes = [](const std::string& p) { return io::read_file(p); };
    auto run = [&](const std::string& name, int stage, optim::BindingMode mode, int iterations,
                   std::optional<io::Checkpoint> resume = std::nullopt) {
        optim::StageConfig c = cfg;
        c.binding = mode;
        c.iterations = iterations;
        optim::RunOptions o;
        o.checkpoint_path = (dir / name).string();
        o.resume = std::move(resume);
        if (stage == 1) optim::run_stage1(pipeline::textured_blob(2, false, false), c, oracle, o, eo);
        else optim::run_stage2(truth.mesh, c, oracle, o);
        return bytes(o.checkpoint_path);
    };
    std::vector<std::string> failures;
    const std::pair<int, optim::BindingMode> runs[] = {{1, optim::BindingMode::Bound},
                                                       {2, optim::BindingMode::Bound},
                                                       {2, optim::BindingMode::FrozenPositions},
                                                       {2, optim::BindingMode::Free}};
    for (const auto& [stage, mode] : runs) {
        const std::string tag = fmt::format("stage{}_{}", stage, static_cast<int>(mode));
        const auto a = run(tag + "_a.gdck", stage, mode, 12);
        const auto b = run(tag + "_b.gdck", stage, mode, 12);
        if (a != b) failures.push_back(tag + " re-run");
        run(tag + "_c.gdck", stage, mode, 7);
        const auto c = run(tag + "_c.gdck", stage, mode, 12, io::load_checkpoint((dir / (tag + "_c.gdck")).string()));
        if (a != c) failures.push_back(tag + " resume");
    }
    std::string detail = "stage 1 and stage 2 (bound, frozen, free): re-run and resume checkpoints bit-identical";
    if (!failures.empty()) {
        detail = "differs:";
        for (const auto& f : failures) detail += " " + f;
    }
    return {failures.empty(), detail};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<std::string> only;
    std::string out;
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_option("--out", out, "directory for held-out render strips");
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::warn);
    if (!out.empty()) std::filesystem::create_directories(out);

    const std::vector<Criterion> criteria = {
        {"gradients", 120, gradients},
        {"compositing", 60, compositing},
        {"bound-positions", 10, bound_positions},
        {"guidance", 60, guidance_identities},
        {"extraction", 300, extraction},
        {"e2e", 1800, [&] { return end_to_end(out); }},
        {"deformation", 60, deformation},
        {"determinism", 300, determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_s) {
            v.pass = false;
            v.detail += fmt::format("; over the {:.0f} s budget", c.budget_s);
        }
        failed += !v.pass;
        fmt::print("{} {:<16} {} [{:.1f} s]\n", v.pass ? "PASS" : "FAIL", c.name, v.detail, secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
