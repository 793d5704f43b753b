#pragma once

#include "boundsplat/io/binary.hpp"
#include "boundsplat/optim/adam.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace boundsplat::io {

/// Everything needed to continue a run bit-identically. Random draws are keyed on
/// (seed, iteration, view), so seed and iteration are the whole generator state.
///
/// Layout (little-endian): "GDCK", u32 version = 1, u32 stage, u32 mode, u64 seed,
/// u64 iteration, str config, f64 beta1, f64 beta2, f64 eps, u64 adam step,
/// u32 group count, per group {u64 n, f64[n] m, u64 n, f64[n] v},
/// u32 array count, per array {str name, u64 n, f64[n]},
/// u32 index-array count, per array {str name, u64 n, u32[n]}.
/// Strings are u32 length + bytes.
struct Checkpoint {
    std::uint32_t stage = 1;
    std::uint32_t mode = 0;
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0; // completed iterations
    std::string config;          // resolved configuration text, informational
    optim::AdamState adam;
    std::vector<std::pair<std::string, std::vector<double>>> arrays;
    std::vector<std::pair<std::string, std::vector<std::uint32_t>>> indices;

    void put(std::string name, std::vector<double> v) { arrays.emplace_back(std::move(name), std::move(v)); }
    void put_indices(std::string name, std::vector<std::uint32_t> v) {
        indices.emplace_back(std::move(name), std::move(v));
    }

    const std::vector<double>& array(const std::string& name) const {
        for (const auto& [n, v] : arrays)
            if (n == name) return v;
        throw ValidationError("checkpoint has no array '" + name + "'");
    }
    const std::vector<std::uint32_t>& index_array(const std::string& name) const {
        for (const auto& [n, v] : indices)
            if (n == name) return v;
        throw ValidationError("checkpoint has no index array '" + name + "'");
    }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
    ByteWriter w;
    w.magic("GDCK");
    w.put(kCheckpointVersion);
    w.put(c.stage);
    w.put(c.mode);
    w.put(c.seed);
    w.put(c.iteration);
    w.str(c.config);
    w.put(c.adam.beta1);
    w.put(c.adam.beta2);
    w.put(c.adam.eps);
    w.put(c.adam.step);
    w.put(static_cast<std::uint32_t>(c.adam.m.size()));
    for (std::size_t g = 0; g < c.adam.m.size(); ++g) {
        w.array(c.adam.m[g]);
        w.array(c.adam.v[g]);
    }
    w.put(static_cast<std::uint32_t>(c.arrays.size()));
    for (const auto& [name, v] : c.arrays) {
        w.str(name);
        w.array(v);
    }
    w.put(static_cast<std::uint32_t>(c.indices.size()));
    for (const auto& [name, v] : c.indices) {
        w.str(name);
        w.array(v);
    }
    return w.bytes();
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes.data(), bytes.size(), "checkpoint");
    r.magic("GDCK");
    const std::size_t at = r.offset();
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version), at);
    Checkpoint c;
    c.stage = r.get<std::uint32_t>("stage");
    c.mode = r.get<std::uint32_t>("mode");
    c.seed = r.get<std::uint64_t>("seed");
    c.iteration = r.get<std::uint64_t>("iteration");
    c.config = r.str("config");
    c.adam.beta1 = r.get<double>("beta1");
    c.adam.beta2 = r.get<double>("beta2");
    c.adam.eps = r.get<double>("eps");
    c.adam.step = r.get<std::uint64_t>("adam step");
    const auto groups = r.get<std::uint32_t>("group count");
    for (std::uint32_t g = 0; g < groups; ++g) {
        c.adam.m.push_back(r.array<double>("adam first moment"));
        c.adam.v.push_back(r.array<double>("adam second moment"));
    }
    const auto na = r.get<std::uint32_t>("array count");
    for (std::uint32_t i = 0; i < na; ++i) {
        std::string name = r.str("array name");
        c.arrays.emplace_back(std::move(name), r.array<double>("array data"));
    }
    const auto ni = r.get<std::uint32_t>("index array count");
    for (std::uint32_t i = 0; i < ni; ++i) {
        std::string name = r.str("index array name");
        c.indices.emplace_back(std::move(name), r.array<std::uint32_t>("index array data"));
    }
    r.expect_end();
    return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) { write_file(path, encode_checkpoint(c)); }
inline Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

} // namespace boundsplat::io
