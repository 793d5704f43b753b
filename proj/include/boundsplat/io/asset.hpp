#pragma once

#include "boundsplat/bind/bind.hpp"
#include "boundsplat/io/binary.hpp"
#include "boundsplat/io/ply.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace boundsplat::io {

namespace detail {
inline void put_f32(ByteWriter& w, const std::vector<double>& v) {
    for (double x : v) w.put(static_cast<float>(x));
}
inline std::vector<double> get_f32(ByteReader& r, std::size_t n, const char* field) {
    r.need(n > SIZE_MAX / 4 ? SIZE_MAX : 4 * n, field);
    std::vector<double> v(n);
    for (double& x : v) x = r.get<float>(field);
    return v;
}
} // namespace detail

// ---- bound-asset sidecar ---------------------------------------------------
//
// "GDBA", u32 version = 1, u32 N (Gaussians per triangle), u32 triangle count,
// f32[3N] barycentric template, then per-Gaussian blocks in this order:
// f32[3] colors, f32 opacity logit, f32[2] in-plane rotation (cos, sin),
// f32[3] log scales. The mesh itself lives in a separate PLY.

inline constexpr std::uint32_t kSidecarVersion = 1;

inline std::vector<std::uint8_t> encode_sidecar(const BoundAsset& a) {
    a.validate();
    ByteWriter w;
    w.magic("GDBA");
    w.put(kSidecarVersion);
    w.put(static_cast<std::uint32_t>(a.per_triangle));
    w.put(static_cast<std::uint32_t>(a.cluster_count()));
    detail::put_f32(w, a.template_weights);
    detail::put_f32(w, a.colors);
    detail::put_f32(w, a.opacity_logits);
    detail::put_f32(w, a.rotations2d);
    detail::put_f32(w, a.log_scales);
    return w.bytes();
}

/// Attaches sidecar attributes to `mesh`; the triangle count must match.
inline BoundAsset decode_sidecar(const std::vector<std::uint8_t>& bytes, ColoredMesh mesh,
                                 const std::string& what = "bound asset sidecar") {
    ByteReader r(bytes.data(), bytes.size(), what);
    r.magic("GDBA");
    const std::size_t at = r.offset();
    const auto version = r.get<std::uint32_t>("version");
    if (version != kSidecarVersion) throw ParseError(what + ": unsupported version " + std::to_string(version), at);
    BoundAsset a;
    a.per_triangle = r.get<std::uint32_t>("N");
    const auto tris = r.get<std::uint32_t>("triangle count");
    if (tris != mesh.triangle_count())
        throw ValidationError(what + ": sidecar describes " + std::to_string(tris) + " triangles, mesh has " +
                              std::to_string(mesh.triangle_count()));
    if (a.per_triangle == 0) throw ParseError(what + ": N must be positive", at + 4);
    const std::size_t n = static_cast<std::size_t>(tris) * a.per_triangle;
    a.template_weights = detail::get_f32(r, 3 * a.per_triangle, "template");
    a.colors = detail::get_f32(r, 3 * n, "colors");
    a.opacity_logits = detail::get_f32(r, n, "opacities");
    a.rotations2d = detail::get_f32(r, 2 * n, "rotations");
    a.log_scales = detail::get_f32(r, 3 * n, "scales");
    r.expect_end();
    a.mesh = std::move(mesh);
    a.validate();
    return a;
}

struct BoundAssetPaths {
    std::string mesh;    // <stem>.mesh.ply
    std::string sidecar; // <stem>.gdba
    std::string baked;   // <stem>.splat.ply, realized free cloud for viewers

    static BoundAssetPaths from_stem(const std::string& stem) {
        return {stem + ".mesh.ply", stem + ".gdba", stem + ".splat.ply"};
    }
};

inline void save_bound_asset(const std::string& stem, const BoundAsset& a) {
    const auto p = BoundAssetPaths::from_stem(stem);
    save_mesh(p.mesh, a.mesh);
    write_file(p.sidecar, encode_sidecar(a));
    save_gaussians(p.baked, realize_cloud(a));
}

inline BoundAsset load_bound_asset(const std::string& stem) {
    const auto p = BoundAssetPaths::from_stem(stem);
    return decode_sidecar(read_file(p.sidecar), load_mesh(p.mesh), p.sidecar);
}

// ---- deformation streams ---------------------------------------------------
//
// "GDPD", u32 vertex count, u32 frame count, then per frame: f32 timestamp and
// vertex positions as f32 triples.

inline std::vector<std::uint8_t> encode_deformation(const bind::DeformationStream& s) {
    s.validate(s.vertex_count);
    ByteWriter w;
    w.magic("GDPD");
    w.put(static_cast<std::uint32_t>(s.vertex_count));
    w.put(static_cast<std::uint32_t>(s.frame_count()));
    for (std::size_t f = 0; f < s.frame_count(); ++f) {
        w.put(static_cast<float>(s.timestamps[f]));
        detail::put_f32(w, s.frames[f]);
    }
    return w.bytes();
}

inline bind::DeformationStream decode_deformation(const std::vector<std::uint8_t>& bytes,
                                                  const std::string& what = "deformation stream") {
    ByteReader r(bytes.data(), bytes.size(), what);
    r.magic("GDPD");
    bind::DeformationStream s;
    s.vertex_count = r.get<std::uint32_t>("vertex count");
    const auto frames = r.get<std::uint32_t>("frame count");
    const std::size_t frame_bytes = 4 + 12 * s.vertex_count;
    if (frames > 0 && frame_bytes > r.remaining() / frames) r.need(static_cast<std::size_t>(frames) * frame_bytes, "frames");
    for (std::uint32_t f = 0; f < frames; ++f) {
        s.timestamps.push_back(r.get<float>("timestamp"));
        s.frames.push_back(detail::get_f32(r, 3 * s.vertex_count, "vertex positions"));
    }
    r.expect_end();
    return s;
}

inline bind::DeformationStream load_deformation(const std::string& path) {
    return decode_deformation(read_file(path), path);
}
inline void save_deformation(const std::string& path, const bind::DeformationStream& s) {
    write_file(path, encode_deformation(s));
}

} // namespace boundsplat::io
