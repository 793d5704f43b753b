#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/types.hpp"
#include "boundsplat/io/binary.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace boundsplat::io {

enum class PlyFormat { Ascii, BinaryLE, BinaryBE };

struct PlyProperty {
    std::string name;
    std::string type;        // scalar type, or item type of a list
    std::string count_type;  // non-empty for list properties
    bool is_list() const { return !count_type.empty(); }
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;

    // Scalar properties, little-endian, element-major; `stride` bytes per element.
    std::size_t stride = 0;
    std::vector<std::uint8_t> scalars;
    // One entry per list property (in declaration order), one list per element.
    std::vector<std::vector<std::vector<std::int64_t>>> lists;

    int find(const std::string& prop) const {
        for (std::size_t i = 0; i < properties.size(); ++i)
            if (properties[i].name == prop) return static_cast<int>(i);
        return -1;
    }
    std::size_t offset_of(std::size_t prop) const;
    double scalar(std::size_t element, std::size_t prop) const;
};

struct PlyFile {
    PlyFormat format = PlyFormat::BinaryLE;
    std::vector<std::string> comments;
    std::vector<PlyElement> elements;

    const PlyElement* element(const std::string& name) const {
        for (const auto& e : elements)
            if (e.name == name) return &e;
        return nullptr;
    }
};

namespace ply_detail {

inline std::size_t type_size(const std::string& t) {
    static const std::map<std::string, std::size_t> sizes{
        {"char", 1},  {"uchar", 1},  {"short", 2},  {"ushort", 2}, {"int", 4},     {"uint", 4},
        {"float", 4}, {"double", 8}, {"int8", 1},   {"uint8", 1},  {"int16", 2},   {"uint16", 2},
        {"int32", 4}, {"uint32", 4}, {"float32", 4}, {"float64", 8}};
    const auto it = sizes.find(t);
    return it == sizes.end() ? 0 : it->second;
}

inline std::string canonical(const std::string& t) {
    static const std::map<std::string, std::string> alias{{"int8", "char"},   {"uint8", "uchar"}, {"int16", "short"},
                                                          {"uint16", "ushort"}, {"int32", "int"},   {"uint32", "uint"},
                                                          {"float32", "float"}, {"float64", "double"}};
    const auto it = alias.find(t);
    return it == alias.end() ? t : it->second;
}

/// Decodes one little-endian scalar of PLY type `t`.
inline double decode(const std::uint8_t* p, const std::string& t) {
    auto get = [p]<class T>(T) {
        T v;
        std::memcpy(&v, p, sizeof(T));
        return static_cast<double>(v);
    };
    if (t == "char") return get(std::int8_t{});
    if (t == "uchar") return get(std::uint8_t{});
    if (t == "short") return get(std::int16_t{});
    if (t == "ushort") return get(std::uint16_t{});
    if (t == "int") return get(std::int32_t{});
    if (t == "uint") return get(std::uint32_t{});
    if (t == "float") return get(float{});
    return get(double{});
}

inline void encode(std::uint8_t* p, const std::string& t, double v) {
    auto put = [p]<class T>(T x) { std::memcpy(p, &x, sizeof(T)); };
    if (t == "char") put(static_cast<std::int8_t>(v));
    else if (t == "uchar") put(static_cast<std::uint8_t>(v));
    else if (t == "short") put(static_cast<std::int16_t>(v));
    else if (t == "ushort") put(static_cast<std::uint16_t>(v));
    else if (t == "int") put(static_cast<std::int32_t>(v));
    else if (t == "uint") put(static_cast<std::uint32_t>(v));
    else if (t == "float") put(static_cast<float>(v));
    else put(v);
}

inline std::vector<std::string> words(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

} // namespace ply_detail

inline std::size_t PlyElement::offset_of(std::size_t prop) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < prop; ++i)
        if (!properties[i].is_list()) off += ply_detail::type_size(properties[i].type);
    return off;
}

inline double PlyElement::scalar(std::size_t element, std::size_t prop) const {
    return ply_detail::decode(scalars.data() + element * stride + offset_of(prop), properties[prop].type);
}

inline PlyFile parse_ply(const std::vector<std::uint8_t>& bytes, const std::string& what = "ply") {
    using namespace ply_detail;
    PlyFile ply;
    // Header: text lines up to and including "end_header\n".
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const auto* begin = bytes.data() + pos;
        const auto* end = static_cast<const std::uint8_t*>(std::memchr(begin, '\n', bytes.size() - pos));
        if (end == nullptr) throw ParseError(what + ": header is not terminated by end_header", pos);
        std::string line(reinterpret_cast<const char*>(begin), static_cast<std::size_t>(end - begin));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = static_cast<std::size_t>(end - bytes.data()) + 1;
        return line;
    };
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "ply", 3) != 0) throw ParseError(what + ": bad magic, expected 'ply'", 0);
    next_line();
    bool have_format = false;
    for (;;) {
        const std::size_t at = pos;
        const auto w = words(next_line());
        if (w.empty()) continue;
        if (w[0] == "end_header") break;
        if (w[0] == "comment" || w[0] == "obj_info") {
            if (w[0] == "comment") {
                const std::string line(reinterpret_cast<const char*>(bytes.data() + at), pos - at - 1);
                ply.comments.push_back(line.size() > 8 ? line.substr(8) : "");
            }
            continue;
        }
        if (w[0] == "format") {
            if (w.size() != 3 || w[2] != "1.0") throw ParseError(what + ": unsupported format line", at);
            if (w[1] == "ascii") ply.format = PlyFormat::Ascii;
            else if (w[1] == "binary_little_endian") ply.format = PlyFormat::BinaryLE;
            else if (w[1] == "binary_big_endian") ply.format = PlyFormat::BinaryBE;
            else throw ParseError(what + ": unknown format '" + w[1] + "'", at);
            have_format = true;
        } else if (w[0] == "element") {
            if (w.size() != 3) throw ParseError(what + ": malformed element line", at);
            PlyElement e;
            e.name = w[1];
            std::size_t count = 0;
            const auto r = std::from_chars(w[2].data(), w[2].data() + w[2].size(), count);
            if (r.ec != std::errc{} || r.ptr != w[2].data() + w[2].size())
                throw ParseError(what + ": bad element count '" + w[2] + "'", at);
            e.count = count;
            ply.elements.push_back(std::move(e));
        } else if (w[0] == "property") {
            if (ply.elements.empty()) throw ParseError(what + ": property before any element", at);
            PlyProperty p;
            if (w.size() == 5 && w[1] == "list") {
                p.count_type = canonical(w[2]);
                p.type = canonical(w[3]);
                p.name = w[4];
                if (type_size(p.count_type) == 0 || p.count_type == "float" || p.count_type == "double")
                    throw ParseError(what + ": bad list count type '" + w[2] + "'", at);
            } else if (w.size() == 3) {
                p.type = canonical(w[1]);
                p.name = w[2];
            } else {
                throw ParseError(what + ": malformed property line", at);
            }
            if (type_size(p.type) == 0) throw ParseError(what + ": unknown property type '" + p.type + "'", at);
            ply.elements.back().properties.push_back(std::move(p));
        } else {
            throw ParseError(what + ": unexpected header keyword '" + w[0] + "'", at);
        }
    }
    if (!have_format) throw ParseError(what + ": missing format line", pos);

    for (auto& e : ply.elements) {
        e.stride = 0;
        std::size_t nlists = 0;
        for (const auto& p : e.properties) {
            if (p.is_list()) ++nlists;
            else e.stride += type_size(p.type);
        }
        if (ply.format != PlyFormat::Ascii) {
            // Cheap bound before allocating: every row needs at least its fixed bytes.
            std::size_t row = e.stride;
            for (const auto& p : e.properties)
                if (p.is_list()) row += type_size(p.count_type);
            ByteReader body(bytes.data() + pos, bytes.size() - pos, what);
            if (row > 0 && e.count > SIZE_MAX / row)
                throw ParseError(what + ": implausible element count " + std::to_string(e.count), pos);
            if (row > 0 && e.count > body.remaining() / row) body.need(e.count * row, ("element '" + e.name + "'").c_str());
        } else if (e.count > bytes.size()) {
            throw ParseError(what + ": element count " + std::to_string(e.count) + " exceeds file size", pos);
        }
        e.scalars.assign(e.count * e.stride, 0);
        e.lists.assign(nlists, {});
        for (auto& l : e.lists) l.resize(e.count);
    }

    if (ply.format == PlyFormat::Ascii) {
        std::istringstream in(std::string(reinterpret_cast<const char*>(bytes.data() + pos), bytes.size() - pos));
        auto token = [&](const std::string& ctx) {
            std::string t;
            if (!(in >> t)) throw ParseError(what + ": unexpected end of ascii data in " + ctx, bytes.size());
            char* end = nullptr;
            const double v = std::strtod(t.c_str(), &end);
            if (end == t.c_str() || *end != '\0') throw ParseError(what + ": bad number '" + t + "' in " + ctx, bytes.size());
            return v;
        };
        for (auto& e : ply.elements)
            for (std::size_t i = 0; i < e.count; ++i) {
                std::size_t off = 0, li = 0;
                for (const auto& p : e.properties) {
                    if (p.is_list()) {
                        const double n = token(e.name);
                        if (!(n >= 0 && n < 1e6)) throw ParseError(what + ": bad list length in " + e.name, bytes.size());
                        auto& l = e.lists[li++][i];
                        for (int k = 0; k < static_cast<int>(n); ++k) l.push_back(static_cast<std::int64_t>(token(e.name)));
                    } else {
                        encode(e.scalars.data() + i * e.stride + off, p.type, token(e.name));
                        off += type_size(p.type);
                    }
                }
            }
        return ply;
    }

    const bool swap = ply.format == PlyFormat::BinaryBE;
    ByteReader r(bytes.data() + pos, bytes.size() - pos, what);
    auto read_scalar = [&](std::uint8_t* out, const std::string& t, const char* field) {
        const std::size_t n = type_size(t);
        r.raw(out, n, field);
        if (swap) std::reverse(out, out + n);
    };
    for (auto& e : ply.elements) {
        const std::string field = "element '" + e.name + "'";
        if (e.lists.empty()) {
            // Fixed-size rows: check the whole block up front so a truncated file
            // reports the full expected size.
            if (e.stride > 0 && e.count > r.remaining() / e.stride) r.need(e.count * e.stride, field.c_str());
            if (!swap) {
                r.raw(e.scalars.data(), e.scalars.size(), field.c_str());
                continue;
            }
        }
        for (std::size_t i = 0; i < e.count; ++i) {
            std::size_t off = 0, li = 0;
            for (const auto& p : e.properties) {
                if (p.is_list()) {
                    std::uint8_t buf[8];
                    read_scalar(buf, p.count_type, field.c_str());
                    const double n = decode(buf, p.count_type);
                    if (n < 0) throw ParseError(what + ": negative list length in " + e.name, pos + r.offset());
                    auto& l = e.lists[li++][i];
                    l.resize(static_cast<std::size_t>(n));
                    for (auto& v : l) {
                        read_scalar(buf, p.type, field.c_str());
                        v = static_cast<std::int64_t>(decode(buf, p.type));
                    }
                } else {
                    read_scalar(e.scalars.data() + i * e.stride + off, p.type, field.c_str());
                    off += type_size(p.type);
                }
            }
        }
    }
    return ply;
}

/// Binary little-endian writer. Scalar data is taken from `scalars` as is.
inline std::vector<std::uint8_t> encode_ply(const PlyFile& ply) {
    std::ostringstream h;
    h << "ply\nformat binary_little_endian 1.0\n";
    for (const auto& c : ply.comments) h << "comment " << c << "\n";
    for (const auto& e : ply.elements) {
        h << "element " << e.name << " " << e.count << "\n";
        for (const auto& p : e.properties) {
            if (p.is_list()) h << "property list " << p.count_type << " " << p.type << " " << p.name << "\n";
            else h << "property " << p.type << " " << p.name << "\n";
        }
    }
    h << "end_header\n";
    const std::string header = h.str();
    ByteWriter w;
    w.raw(header.data(), header.size());
    for (const auto& e : ply.elements) {
        const bool has_lists = !e.lists.empty();
        if (!has_lists) {
            w.raw(e.scalars.data(), e.scalars.size());
            continue;
        }
        for (std::size_t i = 0; i < e.count; ++i) {
            std::size_t off = 0, li = 0;
            for (const auto& p : e.properties) {
                std::uint8_t buf[8];
                if (p.is_list()) {
                    const auto& l = e.lists[li++][i];
                    ply_detail::encode(buf, p.count_type, static_cast<double>(l.size()));
                    w.raw(buf, ply_detail::type_size(p.count_type));
                    for (auto v : l) {
                        ply_detail::encode(buf, p.type, static_cast<double>(v));
                        w.raw(buf, ply_detail::type_size(p.type));
                    }
                } else {
                    const std::size_t n = ply_detail::type_size(p.type);
                    w.raw(e.scalars.data() + i * e.stride + off, n);
                    off += n;
                }
            }
        }
    }
    return w.bytes();
}

namespace ply_detail {

/// Element with float properties filled column by column.
struct FloatTable {
    PlyElement e;
    FloatTable(std::string name, std::size_t count, const std::vector<std::string>& props) {
        e.name = std::move(name);
        e.count = count;
        for (const auto& p : props) e.properties.push_back({p, "float", ""});
        e.stride = 4 * props.size();
        e.scalars.assign(e.stride * count, 0);
    }
    void set(std::size_t i, std::size_t prop, double v) {
        const float f = static_cast<float>(v);
        std::memcpy(e.scalars.data() + i * e.stride + 4 * prop, &f, 4);
    }
};

inline std::size_t require(const PlyElement& e, const std::string& prop, const std::string& what) {
    const int i = e.find(prop);
    if (i < 0 || e.properties[i].is_list())
        throw ParseError(what + ": element '" + e.name + "' lacks scalar property '" + prop + "'", 0);
    return static_cast<std::size_t>(i);
}

} // namespace ply_detail

// ---- meshes ---------------------------------------------------------------

/// Vertices (x, y, z), optional colors (red, green, blue as float in [0, 1]; uchar
/// colors are read as value / 255) and triangles. Polygons are fan-triangulated.
inline ColoredMesh decode_mesh(const std::vector<std::uint8_t>& bytes, const std::string& what = "mesh") {
    const PlyFile ply = parse_ply(bytes, what);
    const PlyElement* v = ply.element("vertex");
    if (v == nullptr) throw ParseError(what + ": no vertex element", 0);
    ColoredMesh m;
    const std::size_t ix = ply_detail::require(*v, "x", what), iy = ply_detail::require(*v, "y", what),
                      iz = ply_detail::require(*v, "z", what);
    m.vertices.resize(3 * v->count);
    for (std::size_t i = 0; i < v->count; ++i) {
        m.vertices[3 * i] = v->scalar(i, ix);
        m.vertices[3 * i + 1] = v->scalar(i, iy);
        m.vertices[3 * i + 2] = v->scalar(i, iz);
    }
    const int ir = v->find("red"), ig = v->find("green"), ib = v->find("blue");
    if (ir >= 0 && ig >= 0 && ib >= 0) {
        const bool bytes8 = v->properties[ir].type == "uchar";
        const double s = bytes8 ? 1.0 / 255.0 : 1.0;
        m.colors.resize(3 * v->count);
        for (std::size_t i = 0; i < v->count; ++i) {
            m.colors[3 * i] = s * v->scalar(i, ir);
            m.colors[3 * i + 1] = s * v->scalar(i, ig);
            m.colors[3 * i + 2] = s * v->scalar(i, ib);
        }
    }
    if (const PlyElement* f = ply.element("face")) {
        int li = -1, k = 0;
        for (const auto& p : f->properties) {
            if (p.is_list()) {
                if (p.name == "vertex_indices" || p.name == "vertex_index") li = k;
                ++k;
            }
        }
        if (li < 0) throw ParseError(what + ": face element has no vertex_indices list", 0);
        for (const auto& poly : f->lists[li]) {
            for (auto idx : poly)
                if (idx < 0 || static_cast<std::size_t>(idx) >= v->count)
                    throw ValidationError(what + ": face index " + std::to_string(idx) + " out of range");
            for (std::size_t j = 2; j < poly.size(); ++j)
                m.triangles.push_back({static_cast<std::uint32_t>(poly[0]), static_cast<std::uint32_t>(poly[j - 1]),
                                       static_cast<std::uint32_t>(poly[j])});
        }
    }
    return m;
}

inline std::vector<std::uint8_t> encode_mesh(const ColoredMesh& m) {
    const bool colored = m.has_colors();
    std::vector<std::string> props{"x", "y", "z"};
    if (colored) props.insert(props.end(), {"red", "green", "blue"});
    ply_detail::FloatTable v("vertex", m.vertex_count(), props);
    for (std::size_t i = 0; i < m.vertex_count(); ++i)
        for (int k = 0; k < 3; ++k) {
            v.set(i, k, m.vertices[3 * i + k]);
            if (colored) v.set(i, 3 + k, m.colors[3 * i + k]);
        }
    PlyElement f;
    f.name = "face";
    f.count = m.triangle_count();
    f.properties.push_back({"vertex_indices", "uint", "uchar"});
    f.lists.resize(1);
    for (const auto& t : m.triangles) f.lists[0].push_back({t[0], t[1], t[2]});
    PlyFile ply;
    ply.elements = {std::move(v.e), std::move(f)};
    return encode_ply(ply);
}

inline ColoredMesh load_mesh(const std::string& path) { return decode_mesh(read_file(path), path); }
inline void save_mesh(const std::string& path, const ColoredMesh& m) { write_file(path, encode_mesh(m)); }

// ---- Gaussian clouds ------------------------------------------------------

/// Zeroth-order spherical harmonic constant used by splat viewers: rgb = 0.5 + C0 * f_dc.
inline constexpr double kShC0 = 0.28209479177387814;

namespace ply_detail {
inline const std::vector<std::string>& gaussian_props() {
    static const std::vector<std::string> p{"x",       "y",       "z",       "nx",      "ny",      "nz",
                                            "f_dc_0",  "f_dc_1",  "f_dc_2",  "opacity", "scale_0", "scale_1",
                                            "scale_2", "rot_0",   "rot_1",   "rot_2",   "rot_3"};
    return p;
}
} // namespace ply_detail

/// Splat-viewer layout. Opacity is stored as a logit, scales as logs, rotation as
/// (w, x, y, z); color via the zeroth SH coefficient. Every other vertex property
/// is carried in `extras` byte for byte.
inline GaussianCloud3D decode_gaussians(const std::vector<std::uint8_t>& bytes, const std::string& what = "gaussians") {
    const PlyFile ply = parse_ply(bytes, what);
    const PlyElement* v = ply.element("vertex");
    if (v == nullptr) throw ParseError(what + ": no vertex element", 0);
    for (const auto& p : v->properties)
        if (p.is_list()) throw ParseError(what + ": list property '" + p.name + "' in a Gaussian file", 0);
    const auto& known = ply_detail::gaussian_props();
    std::vector<std::size_t> col(known.size());
    for (std::size_t k = 0; k < known.size(); ++k) {
        if (known[k][0] == 'n') continue; // normals slot is optional and ignored
        col[k] = ply_detail::require(*v, known[k], what);
    }
    GaussianCloud3D g;
    g.resize(v->count);
    for (std::size_t i = 0; i < v->count; ++i) {
        for (int k = 0; k < 3; ++k) {
            g.positions[3 * i + k] = v->scalar(i, col[k]);
            g.colors[3 * i + k] = 0.5 + kShC0 * v->scalar(i, col[6 + k]);
            g.log_scales[3 * i + k] = v->scalar(i, col[10 + k]);
        }
        g.opacity_logits[i] = v->scalar(i, col[9]);
        for (int k = 0; k < 4; ++k) g.rotations[4 * i + k] = v->scalar(i, col[13 + k]);
    }
    // Extras: every property that is not part of the known layout.
    std::vector<std::size_t> extra;
    for (std::size_t p = 0; p < v->properties.size(); ++p)
        if (std::find(known.begin(), known.end(), v->properties[p].name) == known.end()) extra.push_back(p);
    if (!extra.empty()) {
        auto& x = g.extras;
        for (auto p : extra) {
            x.names.push_back(v->properties[p].name);
            x.types.push_back(v->properties[p].type);
            x.stride += ply_detail::type_size(v->properties[p].type);
        }
        x.bytes.resize(x.stride * v->count);
        for (std::size_t i = 0; i < v->count; ++i) {
            std::size_t dst = 0;
            for (auto p : extra) {
                const std::size_t n = ply_detail::type_size(v->properties[p].type);
                std::memcpy(x.bytes.data() + i * x.stride + dst, v->scalars.data() + i * v->stride + v->offset_of(p), n);
                dst += n;
            }
        }
    }
    return g;
}

/// Writes the known layout with extras placed right after the color terms, which
/// is where splat tools put the higher-order SH coefficients.
inline std::vector<std::uint8_t> encode_gaussians(const GaussianCloud3D& g) {
    g.validate();
    const auto& known = ply_detail::gaussian_props();
    PlyElement e;
    e.name = "vertex";
    e.count = g.size();
    for (std::size_t k = 0; k < 9; ++k) e.properties.push_back({known[k], "float", ""});
    for (std::size_t k = 0; k < g.extras.names.size(); ++k) e.properties.push_back({g.extras.names[k], g.extras.types[k], ""});
    for (std::size_t k = 9; k < known.size(); ++k) e.properties.push_back({known[k], "float", ""});
    e.stride = 4 * known.size() + g.extras.stride;
    e.scalars.resize(e.stride * e.count);
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::uint8_t* row = e.scalars.data() + i * e.stride;
        auto putf = [&](std::size_t slot, double v) {
            const float f = static_cast<float>(v);
            std::memcpy(row + 4 * slot, &f, 4);
        };
        for (int k = 0; k < 3; ++k) {
            putf(k, g.positions[3 * i + k]);
            putf(3 + k, 0.0);
            putf(6 + k, (g.colors[3 * i + k] - 0.5) / kShC0);
        }
        if (!g.extras.empty()) std::memcpy(row + 36, g.extras.bytes.data() + i * g.extras.stride, g.extras.stride);
        std::uint8_t* tail = row + 36 + g.extras.stride;
        auto putt = [&](std::size_t slot, double v) {
            const float f = static_cast<float>(v);
            std::memcpy(tail + 4 * slot, &f, 4);
        };
        putt(0, g.opacity_logits[i]);
        for (int k = 0; k < 3; ++k) putt(1 + k, g.log_scales[3 * i + k]);
        for (int k = 0; k < 4; ++k) putt(4 + k, g.rotations[4 * i + k]);
    }
    PlyFile ply;
    ply.elements.push_back(std::move(e));
    return encode_ply(ply);
}

inline GaussianCloud3D load_gaussians(const std::string& path) { return decode_gaussians(read_file(path), path); }
inline void save_gaussians(const std::string& path, const GaussianCloud3D& g) { write_file(path, encode_gaussians(g)); }

} // namespace boundsplat::io
