#include "boundsplat/io/asset.hpp"
#include "boundsplat/io/ply.hpp"
#include "boundsplat/io/png.hpp"
#include "boundsplat/io/toml.hpp"
#include "boundsplat/pipeline/config.hpp"

#include "../support/scenes.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

using namespace boundsplat;

namespace {

// Values that survive a float round trip unchanged.
double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

ColoredMesh random_mesh(std::mt19937_64& rng, std::size_t nv, std::size_t nt) {
    ColoredMesh m;
    std::uniform_real_distribution<double> u(-2.0, 2.0), c(0.0, 1.0);
    std::uniform_int_distribution<std::uint32_t> idx(0, static_cast<std::uint32_t>(nv - 1));
    for (std::size_t i = 0; i < nv; ++i)
        for (int k = 0; k < 3; ++k) {
            m.vertices.push_back(f32(u(rng)));
            m.colors.push_back(f32(c(rng)));
        }
    for (std::size_t t = 0; t < nt; ++t) m.triangles.push_back({idx(rng), idx(rng), idx(rng)});
    return m;
}

std::string tmp(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

} // namespace

TEST(PlyMesh, RandomMeshRoundTripIsBitEqual) {
    std::mt19937_64 rng(1);
    const ColoredMesh m = random_mesh(rng, 200, 300);
    const ColoredMesh back = io::decode_mesh(io::encode_mesh(m));
    EXPECT_EQ(back.vertices, m.vertices);
    EXPECT_EQ(back.colors, m.colors);
    EXPECT_EQ(back.triangles, m.triangles);
    EXPECT_EQ(io::encode_mesh(back), io::encode_mesh(m));
}

TEST(PlyMesh, ReadsAsciiQuadsAndByteColors) {
    const std::string text = "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 4\n"
                             "property float x\nproperty float y\nproperty float z\n"
                             "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                             "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
                             "0 0 0 255 0 0\n1 0 0 0 255 0\n1 1 0 0 0 255\n0 1 0 51 51 51\n4 0 1 2 3\n";
    const ColoredMesh m = io::decode_mesh(bytes_of(text));
    ASSERT_EQ(m.vertex_count(), 4u);
    ASSERT_EQ(m.triangle_count(), 2u);
    EXPECT_EQ(m.triangles[1], (std::array<std::uint32_t, 3>{0, 2, 3}));
    EXPECT_DOUBLE_EQ(m.colors[0], 1.0);
    EXPECT_DOUBLE_EQ(m.colors[9], 0.2);
}

TEST(PlyMesh, ReadsBigEndian) {
    std::string header = "ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                         "property float z\nend_header\n";
    auto bytes = bytes_of(header);
    for (float v : {1.5f, -2.0f, 0.25f}) {
        std::uint8_t b[4];
        std::memcpy(b, &v, 4);
        bytes.insert(bytes.end(), {b[3], b[2], b[1], b[0]});
    }
    const ColoredMesh m = io::decode_mesh(bytes);
    EXPECT_EQ(m.vertices, (std::vector<double>{1.5, -2.0, 0.25}));
}

TEST(PlyMesh, TruncationNamesExpectedAndActualBytes) {
    std::mt19937_64 rng(2);
    ColoredMesh m = random_mesh(rng, 10, 0);
    m.colors.clear();
    auto bytes = io::encode_mesh(m);
    bytes.resize(bytes.size() - 7);
    try {
        (void)io::decode_mesh(bytes);
        FAIL();
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        // 10 vertices x 12 bytes expected, 113 present (the face element is empty).
        EXPECT_NE(msg.find("expected 120"), std::string::npos) << msg;
        EXPECT_NE(msg.find("113"), std::string::npos) << msg;
    }
}

TEST(PlyMesh, MalformedHeadersAreParseErrors) {
    EXPECT_THROW((void)io::decode_mesh(bytes_of("plx\n")), ParseError);
    EXPECT_THROW((void)io::decode_mesh(bytes_of("ply\nformat ascii 1.0\nelement vertex 1\n")), ParseError);
    EXPECT_THROW((void)io::decode_mesh(bytes_of("ply\nformat ascii 1.0\nelement vertex x\nend_header\n")), ParseError);
    EXPECT_THROW((void)io::decode_mesh(bytes_of("ply\nformat ascii 1.0\nelement vertex 1\nproperty quux x\nend_header\n")),
                 ParseError);
    EXPECT_THROW((void)io::decode_mesh(bytes_of("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
                                                "property float y\nproperty float z\nend_header\n1 2\n")),
                 ParseError);
    // Huge declared count is rejected before allocating.
    EXPECT_THROW((void)io::decode_mesh(bytes_of("ply\nformat binary_little_endian 1.0\nelement vertex 99999999999\n"
                                                "property float x\nproperty float y\nproperty float z\nend_header\n")),
                 ParseError);
}

TEST(PlyGaussians, RoundTripIsBitExact) {
    std::mt19937_64 rng(3);
    GaussianCloud3D g = scenes::random_cloud(rng, 50);
    const GaussianCloud3D a = io::decode_gaussians(io::encode_gaussians(g));
    const auto bytes = io::encode_gaussians(a);
    const GaussianCloud3D b = io::decode_gaussians(bytes);
    EXPECT_EQ(io::encode_gaussians(b), bytes);
    EXPECT_EQ(b.positions, a.positions);
    EXPECT_EQ(b.colors, a.colors);
    for (std::size_t i = 0; i < g.positions.size(); ++i) EXPECT_EQ(a.positions[i], f32(g.positions[i]));
    for (std::size_t i = 0; i < g.colors.size(); ++i) EXPECT_NEAR(a.colors[i], g.colors[i], 1e-6);
}

TEST(PlyGaussians, UnknownPropertiesArePreservedOpaquely) {
    // A viewer-style file with degree-1 SH terms and a custom int property.
    std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex 2\n";
    const std::vector<std::string> props{"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "f_rest_0",
                                         "f_rest_1", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                                         "rot_2", "rot_3"};
    for (const auto& p : props) header += "property float " + p + "\n";
    header += "property int label\nend_header\n";
    auto bytes = bytes_of(header);
    for (int i = 0; i < 2; ++i) {
        for (std::size_t k = 0; k < props.size(); ++k) {
            float v = props[k] == "rot_0" ? 1.0f : 0.1f * static_cast<float>(k + i);
            const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
            bytes.insert(bytes.end(), p, p + 4);
        }
        const std::int32_t label = 7 + i;
        const auto* p = reinterpret_cast<const std::uint8_t*>(&label);
        bytes.insert(bytes.end(), p, p + 4);
    }
    const GaussianCloud3D g = io::decode_gaussians(bytes);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g.extras.names, (std::vector<std::string>{"f_rest_0", "f_rest_1", "label"}));
    EXPECT_EQ(g.extras.stride, 12u);
    std::int32_t label = 0;
    std::memcpy(&label, g.extras.bytes.data() + 12 + 8, 4);
    EXPECT_EQ(label, 8);
    EXPECT_EQ(g.opacity_logits[1], static_cast<double>(0.1f * 12));

    // Re-encoded file keeps the extras and decodes to the same cloud.
    const GaussianCloud3D again = io::decode_gaussians(io::encode_gaussians(g));
    EXPECT_EQ(again.extras.names, g.extras.names);
    EXPECT_EQ(again.extras.bytes, g.extras.bytes);
    EXPECT_EQ(again.positions, g.positions);
    EXPECT_EQ(again.rotations, g.rotations);

    // Pruning keeps extras aligned with their Gaussians.
    GaussianCloud3D pruned = g;
    pruned.keep({false, true});
    std::memcpy(&label, pruned.extras.bytes.data() + 8, 4);
    EXPECT_EQ(label, 8);
}

TEST(PlyGaussians, MissingRequiredPropertyIsNamed) {
    const std::string text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                             "property float z\nend_header\n0 0 0\n";
    try {
        (void)io::decode_gaussians(bytes_of(text));
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("f_dc_0"), std::string::npos);
    }
}

TEST(Sidecar, BoundAssetRoundTrip) {
    std::mt19937_64 rng(4);
    BoundAsset a = scenes::random_bound_asset(rng);
    // Make every payload f32-representable so the comparison can be exact.
    for (auto* v : {&a.mesh.vertices, &a.colors, &a.opacity_logits, &a.rotations2d, &a.log_scales, &a.template_weights})
        for (double& x : *v) x = f32(x);
    a.mesh.colors.assign(a.mesh.vertices.size(), 0.5);
    const std::string stem = tmp("boundsplat_io_asset");
    io::save_bound_asset(stem, a);
    const BoundAsset b = io::load_bound_asset(stem);
    EXPECT_EQ(b.mesh.vertices, a.mesh.vertices);
    EXPECT_EQ(b.mesh.triangles, a.mesh.triangles);
    EXPECT_EQ(b.template_weights, a.template_weights);
    EXPECT_EQ(b.colors, a.colors);
    EXPECT_EQ(b.opacity_logits, a.opacity_logits);
    EXPECT_EQ(b.rotations2d, a.rotations2d);
    EXPECT_EQ(b.log_scales, a.log_scales);
    // Baked export is the realized cloud.
    const GaussianCloud3D baked = io::load_gaussians(stem + ".splat.ply");
    const GaussianCloud3D real = realize_cloud(a);
    ASSERT_EQ(baked.size(), real.size());
    for (std::size_t i = 0; i < real.positions.size(); ++i) EXPECT_EQ(baked.positions[i], f32(real.positions[i]));
    for (const char* ext : {".gdba", ".mesh.ply", ".splat.ply"}) std::filesystem::remove(stem + ext);
}

TEST(Sidecar, RejectsMismatchAndTruncation) {
    std::mt19937_64 rng(5);
    const BoundAsset a = scenes::random_bound_asset(rng);
    auto bytes = io::encode_sidecar(a);
    ColoredMesh other = a.mesh;
    other.triangles.pop_back();
    EXPECT_THROW((void)io::decode_sidecar(bytes, other), ValidationError);
    bytes.resize(bytes.size() - 5);
    try {
        (void)io::decode_sidecar(bytes, a.mesh);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("scales"), std::string::npos) << e.what();
    }
    bytes = io::encode_sidecar(a);
    bytes[1] = 'X';
    EXPECT_THROW((void)io::decode_sidecar(bytes, a.mesh), ParseError);
}

TEST(Deformation, StreamRoundTripAndLayout) {
    bind::DeformationStream s;
    s.vertex_count = 2;
    s.timestamps = {0.0, 0.5};
    s.frames = {{0, 0, 0, 1, 1, 1}, {0.5, 0, 0, 1.5, 1, 1}};
    const auto bytes = io::encode_deformation(s);
    // magic + two u32 + two frames of (timestamp + 6 floats)
    EXPECT_EQ(bytes.size(), 4u + 8u + 2u * (4u + 24u));
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GDPD");
    const auto back = io::decode_deformation(bytes);
    EXPECT_EQ(back.vertex_count, 2u);
    EXPECT_EQ(back.timestamps, s.timestamps);
    EXPECT_EQ(back.frames, s.frames);
    auto cut = bytes;
    cut.resize(cut.size() - 4);
    try {
        (void)io::decode_deformation(cut);
        FAIL();
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("56"), std::string::npos) << msg;
        EXPECT_NE(msg.find("52"), std::string::npos) << msg;
    }
}

TEST(Png, RoundTripQuantizesToBytes) {
    Image img(5, 3, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i % 256) / 255.0;
    img.data[0] = 1.7;  // clamped
    img.data[1] = -0.3; // clamped
    const std::string path = tmp("boundsplat_io.png");
    io::save_png(path, img);
    const Image back = io::load_png(path);
    ASSERT_TRUE(back.same_shape(img));
    EXPECT_EQ(back.data[0], 1.0);
    EXPECT_EQ(back.data[1], 0.0);
    for (std::size_t i = 2; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
    std::filesystem::remove(path);
    EXPECT_THROW((void)io::load_png(tmp("boundsplat_missing.png")), ParseError);
}

TEST(Png, StripPlacesFramesLeftToRight) {
    std::vector<Image> frames{Image(2, 2, 3, 0.0), Image(2, 2, 3, 1.0)};
    const Image s = io::horizontal_strip(frames);
    EXPECT_EQ(s.width, 4);
    EXPECT_EQ(s.at(1, 1, 0), 0.0);
    EXPECT_EQ(s.at(2, 0, 2), 1.0);
}

TEST(Toml, ParsesTablesValuesAndComments) {
    const auto doc = io::parse_toml("# top\nseed = 3\n[a]\nx = -1.5e-3 # trailing\ns = \"q\\\"x\"\nflag = true\n"
                                    "arr = [1, 2.5, 3]\nnames = [\"a\", \"b\"]\n");
    ASSERT_EQ(doc.size(), 6u);
    EXPECT_EQ(doc[0].first, "seed");
    EXPECT_EQ(doc[1].first, "a.x");
    EXPECT_EQ(std::get<double>(doc[1].second.v), -1.5e-3);
    EXPECT_EQ(std::get<std::string>(doc[2].second.v), "q\"x");
    EXPECT_TRUE(std::get<bool>(doc[3].second.v));
    EXPECT_EQ(std::get<io::TomlValue::Array>(doc[4].second.v).size(), 3u);
    EXPECT_EQ(doc[5].second.line, 8);
}

TEST(Toml, ErrorsCarryLineNumbers) {
    for (const char* bad : {"x = \n", "x = 1 2\n", "[a\n", "x = \"open\n", "x = 1\nx = 2\n", "x = nan\n", "= 1\n"}) {
        try {
            (void)io::parse_toml(bad, "f.toml");
            ADD_FAILURE() << bad;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find("f.toml:"), std::string::npos) << e.what();
        }
    }
}

TEST(PipelineConfig, PrintedConfigReparsesToTheSameConfig) {
    pipeline::PipelineConfig c;
    pipeline::apply_toml(c, "[stage2]\nbinding = \"frozen\"\nlr_color = 1e-3\n[camera]\nradius = [2, 3]\n"
                            "[run]\nseed = 42\nprompt = \"a \\\"red\\\" mug\"\n");
    EXPECT_EQ(c.stage2.binding, optim::BindingMode::FrozenPositions);
    EXPECT_EQ(c.stage2.lr.color, 1e-3);
    EXPECT_EQ(c.stage1.lr.color, optim::LearningRates{}.color);
    EXPECT_EQ(c.stage1.radius.lo, 2.0);
    EXPECT_EQ(c.stage2.seed, 42u);
    const std::string printed = pipeline::print_config(c);
    pipeline::PipelineConfig d;
    pipeline::apply_toml(d, printed);
    EXPECT_EQ(pipeline::print_config(d), printed);
    EXPECT_EQ(d.stage1.prompt, "a \"red\" mug");
}

TEST(PipelineConfig, SchemaRejectsUnknownKeysAndBadTypes) {
    pipeline::PipelineConfig c;
    EXPECT_THROW(pipeline::apply_toml(c, "[stage2]\nitrations = 5\n"), ConfigError);
    EXPECT_THROW(pipeline::apply_toml(c, "[stage2]\niterations = \"many\"\n"), ConfigError);
    EXPECT_THROW(pipeline::apply_toml(c, "[stage2]\niterations = 2.5\n"), ConfigError);
    EXPECT_THROW(pipeline::apply_toml(c, "[stage2]\nper_triangle = -3\n"), ConfigError);
    EXPECT_THROW(pipeline::apply_toml(c, "[camera]\nradius = [1, 2, 3]\n"), ConfigError);
    EXPECT_THROW(pipeline::apply_toml(c, "[stage2]\nbinding = \"loose\"\n"), ConfigError);
    try {
        pipeline::apply_toml(c, "\n\n[stage1]\nlr_colour = 1\n", "my.toml");
        FAIL();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("my.toml"), std::string::npos);
        EXPECT_NE(msg.find("line 4"), std::string::npos);
        EXPECT_NE(msg.find("stage1.lr_colour"), std::string::npos);
    }
}

TEST(PipelineConfig, OverridesAndValidation) {
    pipeline::PipelineConfig c;
    pipeline::apply_override(c, "stage2.binding=free");
    pipeline::apply_override(c, "stage1.iterations = 12");
    pipeline::apply_override(c, "camera.background=[1,1,1]");
    EXPECT_EQ(c.stage2.binding, optim::BindingMode::Free);
    EXPECT_EQ(c.stage1.iterations, 12);
    EXPECT_EQ(c.stage2.background, Vec3(1, 1, 1));
    EXPECT_THROW(pipeline::apply_override(c, "noequals"), ConfigError);
    EXPECT_NO_THROW(pipeline::validate(c));

    c.input = "/definitely/missing.ply";
    try {
        pipeline::validate(c);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/definitely/missing.ply"), std::string::npos);
    }
    EXPECT_NO_THROW(pipeline::validate(c, false));
    c.provider = "remote:host";
    EXPECT_THROW(pipeline::validate(c, false), ConfigError);
    c.provider = "remote:localhost:70000";
    EXPECT_THROW(pipeline::validate(c, false), ConfigError);
    c.provider = "toy:1,0.5,0";
    EXPECT_NO_THROW(pipeline::validate(c, false));
    EXPECT_EQ(pipeline::ProviderSpec::parse(c.provider).toy_color, Vec3(1, 0.5, 0));
    c.provider = "oracle:/missing/asset";
    EXPECT_THROW(pipeline::validate(c, false), ConfigError);
    c.provider = "toy";
    c.stage2.guidance_resolution = 2048;
    EXPECT_THROW(pipeline::validate(c, false), ConfigError);
}
