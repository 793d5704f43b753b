#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/extract/extract.hpp"
#include "boundsplat/io/binary.hpp"
#include "boundsplat/io/toml.hpp"
#include "boundsplat/optim/config.hpp"

#include <filesystem>
#include <fmt/format.h>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace boundsplat::pipeline {

using optim::BindingMode;
using optim::GuidanceKind;
using optim::Range;
using optim::StageConfig;

/// Where image updates come from.
///   oracle:<gaussians.ply | bound stem>  photometric reconstruction of a known asset
///   toy[:<r>,<g>,<b>]                    analytic Gaussian-data provider (distillation)
///   remote:<host>:<port>                 noise-prediction server
struct ProviderSpec {
    enum class Kind { Oracle, Toy, Remote } kind = Kind::Toy;
    std::string path;
    std::string host;
    int port = 0;
    Vec3 toy_color{0.8, 0.3, 0.2};
    std::string text = "toy";

    static ProviderSpec parse(const std::string& s) {
        ProviderSpec p;
        p.text = s;
        auto bad = [&](const std::string& why) { throw ConfigError("provider '" + s + "': " + why); };
        if (s.starts_with("oracle:")) {
            p.kind = Kind::Oracle;
            p.path = s.substr(7);
            if (p.path.empty()) bad("oracle needs a path");
        } else if (s == "toy" || s.starts_with("toy:")) {
            p.kind = Kind::Toy;
            if (s.size() > 4) {
                std::istringstream in(s.substr(4));
                char c1 = 0, c2 = 0;
                double r, g, b;
                if (!(in >> r >> c1 >> g >> c2 >> b) || c1 != ',' || c2 != ',' || !in.eof())
                    bad("toy color must be r,g,b");
                p.toy_color = Vec3(r, g, b);
            }
        } else if (s.starts_with("remote:")) {
            p.kind = Kind::Remote;
            const std::string rest = s.substr(7);
            const auto colon = rest.rfind(':');
            if (colon == std::string::npos || colon == 0) bad("expected remote:<host>:<port>");
            p.host = rest.substr(0, colon);
            try {
                std::size_t used = 0;
                p.port = std::stoi(rest.substr(colon + 1), &used);
                if (used != rest.size() - colon - 1) bad("bad port");
            } catch (const std::logic_error&) {
                bad("bad port");
            }
            if (p.port <= 0 || p.port > 65535) bad("port out of range");
        } else {
            bad("expected oracle:<path>, toy or remote:<host>:<port>");
        }
        return p;
    }
};

struct ExportOptions {
    int turntable_frames = 24;
    double turntable_elevation = 90.0;
    double turntable_radius = 4.0;
    int turntable_resolution = 256;
};

struct PipelineConfig {
    StageConfig stage1;
    StageConfig stage2;
    extract::ExtractOptions extract;
    ExportOptions export_opt;
    std::string provider = "toy";
    std::string input = "builtin:icosphere:2"; // coarse mesh (stage 1) or colored mesh (stage 2)
    std::string out = "out";

    PipelineConfig() {
        stage2.iterations = 5000;
        stage2.binding = BindingMode::Bound;
    }
};

namespace detail {

using Setter = std::function<void(PipelineConfig&, const io::TomlValue&)>;
using Getter = std::function<std::string(const PipelineConfig&)>;

struct Key {
    std::string name;
    std::string help;
    Setter set;
    Getter get;
};

inline std::string fmt_num(double v) {
    std::string s = fmt::format("{}", v);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

inline std::string where(const io::TomlValue& v) { return v.line > 0 ? "line " + std::to_string(v.line) + ": " : ""; }

[[noreturn]] inline void type_error(const std::string& key, const io::TomlValue& v, const char* want) {
    throw ConfigError(where(v) + "'" + key + "' must be " + want);
}

inline double as_number(const std::string& key, const io::TomlValue& v) {
    if (!v.is_number()) type_error(key, v, "a number");
    return std::get<double>(v.v);
}

inline long long as_int(const std::string& key, const io::TomlValue& v) {
    const double d = as_number(key, v);
    if (d != std::floor(d) || std::abs(d) > 9.0e15) type_error(key, v, "an integer");
    return static_cast<long long>(d);
}

inline std::string as_string(const std::string& key, const io::TomlValue& v) {
    if (!v.is_string()) type_error(key, v, "a string");
    return std::get<std::string>(v.v);
}

inline bool as_bool(const std::string& key, const io::TomlValue& v) {
    if (!v.is_bool()) type_error(key, v, "true or false");
    return std::get<bool>(v.v);
}

inline std::vector<double> as_numbers(const std::string& key, const io::TomlValue& v, std::size_t n) {
    if (!v.is_array()) type_error(key, v, ("an array of " + std::to_string(n) + " numbers").c_str());
    const auto& a = std::get<io::TomlValue::Array>(v.v);
    std::vector<double> out;
    for (const auto& x : a) {
        if (!std::holds_alternative<double>(x)) type_error(key, v, "an array of numbers");
        out.push_back(std::get<double>(x));
    }
    if (out.size() != n) type_error(key, v, ("an array of " + std::to_string(n) + " numbers").c_str());
    return out;
}

// Builders for the common shapes. `which` selects stage 1, stage 2 or both.
enum Which { S1 = 1, S2 = 2, Both = 3 };

template <class T>
Key stage_num(std::string name, Which which, T StageConfig::*field, std::string help) {
    return {name, std::move(help),
            [name, which, field](PipelineConfig& c, const io::TomlValue& v) {
                T x;
                if constexpr (std::is_integral_v<T>) {
                    const long long i = as_int(name, v);
                    if (i < static_cast<long long>(std::numeric_limits<T>::min()) ||
                        static_cast<unsigned long long>(std::max(i, 0LL)) > std::numeric_limits<T>::max())
                        throw ConfigError(where(v) + "'" + name + "' is out of range");
                    x = static_cast<T>(i);
                } else {
                    x = static_cast<T>(as_number(name, v));
                }
                if (which & S1) c.stage1.*field = x;
                if (which & S2) c.stage2.*field = x;
            },
            [which, field](const PipelineConfig& c) {
                const T x = (which & S1) ? c.stage1.*field : c.stage2.*field;
                if constexpr (std::is_integral_v<T>) return fmt::format("{}", x);
                else return fmt_num(static_cast<double>(x));
            }};
}

inline Key stage_lr(std::string name, Which which, double optim::LearningRates::*field, std::string help) {
    return {name, std::move(help),
            [name, which, field](PipelineConfig& c, const io::TomlValue& v) {
                const double x = as_number(name, v);
                if (which & S1) c.stage1.lr.*field = x;
                if (which & S2) c.stage2.lr.*field = x;
            },
            [which, field](const PipelineConfig& c) {
                return fmt_num((which & S1) ? c.stage1.lr.*field : c.stage2.lr.*field);
            }};
}

inline Key stage_range(std::string name, Range StageConfig::*field, std::string help) {
    return {name, std::move(help),
            [name, field](PipelineConfig& c, const io::TomlValue& v) {
                const auto a = as_numbers(name, v, 2);
                c.stage1.*field = c.stage2.*field = Range{a[0], a[1]};
            },
            [field](const PipelineConfig& c) {
                const Range r = c.stage1.*field;
                return "[" + fmt_num(r.lo) + ", " + fmt_num(r.hi) + "]";
            }};
}

inline std::string guidance_name(GuidanceKind k) {
    switch (k) {
    case GuidanceKind::SDS: return "sds";
    case GuidanceKind::ISM: return "ism";
    default: return "photometric";
    }
}

inline std::string binding_name(BindingMode m) {
    switch (m) {
    case BindingMode::Bound: return "bound";
    case BindingMode::FrozenPositions: return "frozen";
    default: return "free";
    }
}

inline const std::vector<Key>& schema() {
    static const std::vector<Key> keys = [] {
        std::vector<Key> k;
        // [run]
        k.push_back({"run.input", "coarse mesh for stage 1 / colored mesh for stage 2 (PLY path or builtin:icosphere:<n>)",
                     [](PipelineConfig& c, const io::TomlValue& v) { c.input = as_string("run.input", v); },
                     [](const PipelineConfig& c) { return io::toml_quote(c.input); }});
        k.push_back({"run.out", "output directory",
                     [](PipelineConfig& c, const io::TomlValue& v) { c.out = as_string("run.out", v); },
                     [](const PipelineConfig& c) { return io::toml_quote(c.out); }});
        k.push_back({"run.provider", "oracle:<path> | toy[:r,g,b] | remote:<host>:<port>",
                     [](PipelineConfig& c, const io::TomlValue& v) { c.provider = as_string("run.provider", v); },
                     [](const PipelineConfig& c) { return io::toml_quote(c.provider); }});
        k.push_back({"run.seed", "random seed",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         const long long s = as_int("run.seed", v);
                         if (s < 0) throw ConfigError(where(v) + "'run.seed' must be >= 0");
                         c.stage1.seed = c.stage2.seed = static_cast<std::uint64_t>(s);
                     },
                     [](const PipelineConfig& c) { return fmt::format("{}", c.stage1.seed); }});
        k.push_back({"run.prompt", "text condition for distillation providers",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         c.stage1.prompt = c.stage2.prompt = as_string("run.prompt", v);
                     },
                     [](const PipelineConfig& c) { return io::toml_quote(c.stage1.prompt); }});
        // [camera]
        k.push_back(stage_num("camera.batch_size", Both, &StageConfig::batch_size, "views per iteration"));
        k.push_back(stage_num("camera.render_resolution", Both, &StageConfig::render_resolution, "square render size"));
        k.push_back(stage_num("camera.guidance_resolution", Both, &StageConfig::guidance_resolution,
                              "size the guidance sees (area-downsampled)"));
        k.push_back(stage_num("camera.fov", Both, &StageConfig::fov_deg, "vertical field of view, degrees"));
        k.push_back(stage_num("camera.cutoff_sigma", Both, &StageConfig::cutoff_sigma, "kernel support, standard deviations"));
        k.push_back(stage_range("camera.radius", &StageConfig::radius, "orbit radius range"));
        k.push_back(stage_range("camera.azimuth", &StageConfig::azimuth, "azimuth range, degrees"));
        k.push_back(stage_range("camera.elevation", &StageConfig::elevation, "polar angle from +z range, degrees"));
        k.push_back({"camera.background", "background color",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         const auto a = as_numbers("camera.background", v, 3);
                         c.stage1.background = c.stage2.background = Vec3(a[0], a[1], a[2]);
                     },
                     [](const PipelineConfig& c) {
                         const Vec3& b = c.stage1.background;
                         return "[" + fmt_num(b.x()) + ", " + fmt_num(b.y()) + ", " + fmt_num(b.z()) + "]";
                     }});
        // [guidance]
        k.push_back({"guidance.kind", "ism | sds (ignored by oracle providers)",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         const std::string s = as_string("guidance.kind", v);
                         GuidanceKind g;
                         if (s == "ism") g = GuidanceKind::ISM;
                         else if (s == "sds") g = GuidanceKind::SDS;
                         else throw ConfigError(where(v) + "'guidance.kind' must be ism or sds");
                         c.stage1.guidance = c.stage2.guidance = g;
                     },
                     [](const PipelineConfig& c) { return io::toml_quote(guidance_name(c.stage1.guidance)); }});
        k.push_back(stage_num("guidance.cfg", Both, &StageConfig::cfg, "classifier-free guidance scale"));
        k.push_back(stage_range("guidance.t_range", &StageConfig::t_range, "noise level range, fraction of T"));
        k.push_back(stage_num("guidance.ism_delta", Both, &StageConfig::ism_delta, "ISM interval, fraction of T"));
        k.push_back(stage_num("guidance.ism_strides", Both, &StageConfig::ism_strides, "DDIM inversion strides"));
        k.push_back({"guidance.anneal_t", "shrink the upper noise level over training",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         c.stage1.anneal_t = c.stage2.anneal_t = as_bool("guidance.anneal_t", v);
                     },
                     [](const PipelineConfig& c) { return std::string(c.stage1.anneal_t ? "true" : "false"); }});
        // [stage1]
        k.push_back(stage_num("stage1.iterations", S1, &StageConfig::iterations, "optimization steps"));
        k.push_back(stage_lr("stage1.lr_position", S1, &optim::LearningRates::surfel_position, "surfel centers"));
        k.push_back(stage_lr("stage1.lr_color", S1, &optim::LearningRates::color, "colors"));
        k.push_back(stage_lr("stage1.lr_opacity", S1, &optim::LearningRates::opacity, "opacity logits"));
        k.push_back(stage_lr("stage1.lr_scale", S1, &optim::LearningRates::scale, "log scales"));
        k.push_back(stage_lr("stage1.lr_rotation", S1, &optim::LearningRates::rotation, "quaternions"));
        k.push_back(stage_num("stage1.prune_threshold", S1, &StageConfig::prune_threshold, "opacity below which surfels are pruned"));
        k.push_back(stage_num("stage1.prune_interval", S1, &StageConfig::prune_interval, "iterations between prunes (0 = never)"));
        k.push_back(stage_num("stage1.init_scale_factor", S1, &StageConfig::init_scale_factor, "init scale x mean 3-NN distance"));
        k.push_back(stage_num("stage1.init_opacity", S1, &StageConfig::init_opacity, "initial opacity"));
        k.push_back(stage_num("stage1.max_log_scale", S1, &StageConfig::max_log_scale, "log scale cap"));
        k.push_back(stage_num("stage1.checkpoint_interval", S1, &StageConfig::checkpoint_interval, "0 = end only"));
        // [stage2]
        k.push_back(stage_num("stage2.iterations", S2, &StageConfig::iterations, "optimization steps"));
        k.push_back({"stage2.binding", "bound | frozen | free",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         const std::string s = as_string("stage2.binding", v);
                         if (s == "bound") c.stage2.binding = BindingMode::Bound;
                         else if (s == "frozen") c.stage2.binding = BindingMode::FrozenPositions;
                         else if (s == "free") c.stage2.binding = BindingMode::Free;
                         else throw ConfigError(where(v) + "'stage2.binding' must be bound, frozen or free");
                     },
                     [](const PipelineConfig& c) { return io::toml_quote(binding_name(c.stage2.binding)); }});
        k.push_back(stage_num("stage2.per_triangle", S2, &StageConfig::per_triangle, "Gaussians per triangle (1, 3, 6)"));
        k.push_back(stage_num("stage2.laplacian_weight", S2, &StageConfig::laplacian_weight, "displacement smoothness weight"));
        k.push_back(stage_num("stage2.scale_cap", S2, &StageConfig::scale_cap, "scale cap, x host mean edge"));
        k.push_back(stage_lr("stage2.lr_vertex", S2, &optim::LearningRates::vertex_position, "mesh vertices"));
        k.push_back(stage_lr("stage2.lr_color", S2, &optim::LearningRates::color, "colors"));
        k.push_back(stage_lr("stage2.lr_opacity", S2, &optim::LearningRates::opacity, "opacity logits"));
        k.push_back(stage_lr("stage2.lr_scale", S2, &optim::LearningRates::scale, "log scales"));
        k.push_back(stage_lr("stage2.lr_rotation", S2, &optim::LearningRates::rotation, "in-plane rotations"));
        k.push_back(stage_num("stage2.checkpoint_interval", S2, &StageConfig::checkpoint_interval, "0 = end only"));
        // [extract]
        k.push_back({"extract.resolution", "indicator grid size",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         c.extract.poisson.resolution = static_cast<int>(as_int("extract.resolution", v));
                     },
                     [](const PipelineConfig& c) { return fmt::format("{}", c.extract.poisson.resolution); }});
        k.push_back({"extract.target_triangles", "decimation budget (0 = keep all)",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         const long long n = as_int("extract.target_triangles", v);
                         if (n < 0) throw ConfigError("'extract.target_triangles' must be >= 0");
                         c.extract.target_triangles = static_cast<std::size_t>(n);
                     },
                     [](const PipelineConfig& c) { return fmt::format("{}", c.extract.target_triangles); }});
        k.push_back({"extract.prune_threshold", "surfels below this opacity are ignored",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         c.extract.prune_threshold = as_number("extract.prune_threshold", v);
                     },
                     [](const PipelineConfig& c) { return fmt_num(c.extract.prune_threshold); }});
        // [export]
        k.push_back({"export.turntable_frames", "frames in the turntable strip",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         c.export_opt.turntable_frames = static_cast<int>(as_int("export.turntable_frames", v));
                     },
                     [](const PipelineConfig& c) { return fmt::format("{}", c.export_opt.turntable_frames); }});
        k.push_back({"export.turntable_elevation", "polar angle of the turntable camera, degrees",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         c.export_opt.turntable_elevation = as_number("export.turntable_elevation", v);
                     },
                     [](const PipelineConfig& c) { return fmt_num(c.export_opt.turntable_elevation); }});
        k.push_back({"export.turntable_radius", "turntable camera distance",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         c.export_opt.turntable_radius = as_number("export.turntable_radius", v);
                     },
                     [](const PipelineConfig& c) { return fmt_num(c.export_opt.turntable_radius); }});
        k.push_back({"export.turntable_resolution", "turntable frame size",
                     [](PipelineConfig& c, const io::TomlValue& v) {
                         c.export_opt.turntable_resolution = static_cast<int>(as_int("export.turntable_resolution", v));
                     },
                     [](const PipelineConfig& c) { return fmt::format("{}", c.export_opt.turntable_resolution); }});
        return k;
    }();
    return keys;
}

} // namespace detail

/// Applies one key; unknown keys are errors (a typo must not silently fall back to a default).
inline void apply_key(PipelineConfig& c, const std::string& key, const io::TomlValue& v) {
    for (const auto& k : detail::schema())
        if (k.name == key) {
            k.set(c, v);
            return;
        }
    throw ConfigError(detail::where(v) + "unknown key '" + key + "'");
}

inline void apply_toml(PipelineConfig& c, const std::string& text, const std::string& source = "config") {
    for (const auto& [key, value] : io::parse_toml(text, source)) {
        try {
            apply_key(c, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(source + ": " + e.what());
        }
    }
}

/// "--set section.key=value"
inline void apply_override(PipelineConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must be key=value");
    std::string key = assignment.substr(0, eq);
    std::erase(key, ' ');
    std::string text = assignment.substr(eq + 1);
    io::TomlValue v;
    try {
        v = io::parse_toml_value(text, "--set " + key);
    } catch (const ConfigError&) {
        // Bare words are taken as strings so `--set stage2.binding=free` works unquoted.
        v.v = text;
    }
    v.line = 0;
    try {
        apply_key(c, key, v);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("--set: ") + e.what());
    }
}

/// Resolved configuration in the same format it is read from.
inline std::string print_config(const PipelineConfig& c) {
    std::string out, table;
    for (const auto& k : detail::schema()) {
        const auto dot = k.name.find('.');
        const std::string t = k.name.substr(0, dot);
        if (t != table) {
            out += (out.empty() ? "" : "\n") + ("[" + t + "]\n");
            table = t;
        }
        out += fmt::format("{} = {}  # {}\n", k.name.substr(dot + 1), k.get(c), k.help);
    }
    return out;
}

inline bool is_builtin_mesh(const std::string& s) { return s.starts_with("builtin:"); }

/// Schema-level validation plus checks that referenced paths exist.
inline void validate(const PipelineConfig& c, bool need_input = true) {
    auto stage = [](const StageConfig& s, const char* name) {
        try {
            s.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(name) + ": " + e.what());
        }
    };
    stage(c.stage1, "stage1");
    stage(c.stage2, "stage2");
    if (c.extract.poisson.resolution < 16 || c.extract.poisson.resolution > 512)
        throw ConfigError("extract.resolution must be in [16, 512]");
    if (c.export_opt.turntable_frames < 1) throw ConfigError("export.turntable_frames must be >= 1");
    if (c.export_opt.turntable_resolution < 16) throw ConfigError("export.turntable_resolution must be >= 16");
    if (!(c.export_opt.turntable_radius > 0.0)) throw ConfigError("export.turntable_radius must be > 0");
    const ProviderSpec p = ProviderSpec::parse(c.provider);
    if (p.kind == ProviderSpec::Kind::Oracle && !std::filesystem::exists(p.path) &&
        !std::filesystem::exists(p.path + ".gdba"))
        throw ConfigError("oracle asset not found: '" + p.path + "'");
    if (need_input) {
        if (is_builtin_mesh(c.input)) {
            const std::string spec = c.input.substr(8);
            if (!spec.starts_with("icosphere:") && !spec.starts_with("box"))
                throw ConfigError("unknown builtin mesh '" + c.input + "'");
        } else if (!std::filesystem::exists(c.input)) {
            throw ConfigError("input mesh not found: '" + c.input + "'");
        }
    }
}

inline PipelineConfig load_config(const std::string& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: '" + path + "'");
    const auto bytes = io::read_file(path);
    PipelineConfig c;
    apply_toml(c, std::string(bytes.begin(), bytes.end()), path);
    // Input and oracle paths written in a config file are relative to that file;
    // they are stored absolute so the resolved snapshot loads from anywhere.
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto rebase = [&](const std::string& p) {
        return std::filesystem::path(p).is_relative() ? std::filesystem::absolute(base / p).lexically_normal().string() : p;
    };
    if (!c.input.empty() && !is_builtin_mesh(c.input)) c.input = rebase(c.input);
    if (c.provider.starts_with("oracle:")) c.provider = "oracle:" + rebase(c.provider.substr(7));
    return c;
}

} // namespace boundsplat::pipeline
