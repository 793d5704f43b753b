// Command-line driver: two-stage optimization, rendering, animation and export.

#include "boundsplat/pipeline/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>

using namespace boundsplat;
using namespace boundsplat::pipeline;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string provider;
    std::string out;
    std::string input;
    bool print = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "configuration file (TOML subset)");
    cmd->add_option("--set", c.sets, "override a config key, e.g. --set stage2.iterations=200")->take_all();
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--provider", c.provider, "oracle:<asset> | toy[:r,g,b] | remote:<host>:<port>");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--input", c.input, "input mesh (PLY or builtin:icosphere:<n>)");
    cmd->add_flag("--print-config", c.print, "print the resolved configuration and exit");
}

PipelineConfig resolve(const Common& c) {
    PipelineConfig cfg;
    if (!c.config.empty()) cfg = load_config(c.config);
    if (c.seed) cfg.stage1.seed = cfg.stage2.seed = *c.seed;
    if (!c.provider.empty()) cfg.provider = c.provider;
    if (!c.out.empty()) cfg.out = c.out;
    if (!c.input.empty()) cfg.input = c.input;
    for (const auto& s : c.sets) apply_override(cfg, s);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mesh-bound Gaussian asset generation"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    Common s1, s2, full, render, animate, exp, check;
    std::string resume;
    auto* c_s1 = app.add_subcommand("stage1", "coarse mesh -> surfels -> extracted colored mesh");
    add_common(c_s1, s1);
    c_s1->add_option("--resume", resume, "continue from a checkpoint");
    auto* c_s2 = app.add_subcommand("stage2", "colored mesh -> mesh-bound Gaussian asset");
    add_common(c_s2, s2);
    c_s2->add_option("--resume", resume, "continue from a checkpoint");
    auto* c_full = app.add_subcommand("full", "stage 1 followed by stage 2");
    add_common(c_full, full);

    std::string asset, png, frames;
    auto* c_render = app.add_subcommand("render", "turntable strip of an asset");
    add_common(c_render, render);
    c_render->add_option("asset", asset, "bound asset stem or Gaussian PLY")->required();
    c_render->add_option("-o,--output", png, "PNG path (default <out>/render.png)");

    auto* c_anim = app.add_subcommand("animate", "pose a bound asset through a deformation stream");
    add_common(c_anim, animate);
    c_anim->add_option("asset", asset, "bound asset stem")->required();
    c_anim->add_option("--frames", frames, "deformation stream (.gdpd)")->required();

    auto* c_exp = app.add_subcommand("export", "bake a bound asset to a viewer Gaussian PLY");
    add_common(c_exp, exp);
    c_exp->add_option("asset", asset, "bound asset stem")->required();
    c_exp->add_option("-o,--output", png, "PLY path (default <out>/baked.splat.ply)");

    auto* c_check = app.add_subcommand("validate-config", "check a configuration and exit");
    add_common(c_check, check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    auto run = [&]() -> int {
        auto pick = [&](const Common& c, CLI::App* cmd) -> std::optional<PipelineConfig> {
            if (!cmd->parsed()) return std::nullopt;
            PipelineConfig cfg = resolve(c);
            return cfg;
        };
        for (auto [cmd, common] : {std::pair{c_s1, &s1}, std::pair{c_s2, &s2}, std::pair{c_full, &full},
                                   std::pair{c_render, &render}, std::pair{c_anim, &animate}, std::pair{c_exp, &exp},
                                   std::pair{c_check, &check}}) {
            auto cfg = pick(*common, cmd);
            if (!cfg) continue;
            if (common->print) {
                std::cout << print_config(*cfg);
                return 0;
            }
            if (cmd == c_check) {
                validate(*cfg);
                std::cout << "config ok\n";
                return 0;
            }
            if (cmd == c_s1) cmd_stage1(*cfg, resume);
            else if (cmd == c_s2) cmd_stage2(*cfg, nullptr, resume);
            else if (cmd == c_full) cmd_full(*cfg);
            else if (cmd == c_render) {
                std::filesystem::create_directories(cfg->out);
                cmd_render(*cfg, asset, png.empty() ? (std::filesystem::path(cfg->out) / "render.png").string() : png);
            } else if (cmd == c_anim) {
                const auto n = cmd_animate(*cfg, asset, frames, cfg->out);
                spdlog::info("wrote {} frames to {}", n, cfg->out);
            } else if (cmd == c_exp) {
                std::filesystem::create_directories(cfg->out);
                cmd_export(asset, png.empty() ? (std::filesystem::path(cfg->out) / "baked.splat.ply").string() : png);
            }
            return 0;
        }
        return 2;
    };

    try {
        return run();
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}
