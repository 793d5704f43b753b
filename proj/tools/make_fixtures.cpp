// Regenerates the bundled sphere fixture (data/sphere by default):
//   coarse.ply         uncolored icosphere, the stage-1 input
//   colored.ply        vertex-colored icosphere, for running stage 2 alone
//   target.*           ground-truth bound asset for the photometric oracle
//   spin.gdpd          8-frame rigid spin of the target mesh

#include "boundsplat/io/asset.hpp"
#include "boundsplat/io/ply.hpp"
#include "boundsplat/pipeline/fixtures.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <numbers>

using namespace boundsplat;

int main(int argc, char** argv) {
    CLI::App app{"Write the bundled sphere fixture"};
    std::string dir = "data/sphere";
    int subdivisions = 2;
    app.add_option("dir", dir, "output directory");
    app.add_option("--subdivisions", subdivisions, "icosphere level of the meshes");
    CLI11_PARSE(app, argc, argv);

    std::filesystem::create_directories(dir);
    const auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };

    io::save_mesh(path("coarse.ply"), pipeline::textured_blob(subdivisions, false, false));
    const ColoredMesh colored = pipeline::textured_blob(subdivisions, false, true);
    io::save_mesh(path("colored.ply"), colored);
    const BoundAsset target = bind::build_bound_asset(colored);
    io::save_bound_asset(path("target"), target);

    bind::DeformationStream spin;
    spin.vertex_count = target.mesh.vertex_count();
    for (int f = 0; f < 8; ++f) {
        const Mat3 r = Eigen::AngleAxisd(f * std::numbers::pi / 4.0, Vec3::UnitZ()).toRotationMatrix();
        std::vector<double> frame(target.mesh.vertices.size());
        for (std::size_t i = 0; i < spin.vertex_count; ++i) {
            const Vec3 p = r * target.mesh.vertex(i);
            for (int k = 0; k < 3; ++k) frame[3 * i + k] = p[k];
        }
        spin.timestamps.push_back(f / 8.0);
        spin.frames.push_back(std::move(frame));
    }
    io::save_deformation(path("spin.gdpd"), spin);
    spdlog::info("wrote fixture to {} ({} Gaussians)", dir, target.size());
    return 0;
}
