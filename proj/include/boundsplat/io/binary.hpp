#pragma once

#include "boundsplat/core/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

namespace boundsplat::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
public:
    template <class T>
    void put(T v) {
        static_assert(std::is_arithmetic_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    void magic(const char (&m)[5]) { raw(m, 4); }
    void str(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    template <class T>
    void array(const std::vector<T>& v) {
        put(static_cast<std::uint64_t>(v.size()));
        raw(v.data(), v.size() * sizeof(T));
    }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; every failure reports its byte offset.
class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size, std::string what)
        : data_(data), size_(size), what_(std::move(what)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

    void need(std::size_t n, const char* field) const {
        if (n > remaining())
            throw ParseError(what_ + ": truncated while reading " + field + ": expected " + std::to_string(n) +
                                 " more bytes, file has " + std::to_string(remaining()) + " (total size " +
                                 std::to_string(size_) + ")",
                             pos_);
    }

    template <class T>
    T get(const char* field) {
        need(sizeof(T), field);
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    void magic(const char (&m)[5]) {
        need(4, "magic");
        if (std::memcmp(data_ + pos_, m, 4) != 0)
            throw ParseError(what_ + ": bad magic, expected '" + std::string(m, 4) + "'", pos_);
        pos_ += 4;
    }

    std::string str(const char* field) {
        const auto n = get<std::uint32_t>(field);
        need(n, field);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }

    template <class T>
    std::vector<T> array(const char* field) {
        const auto n = get<std::uint64_t>(field);
        if (n > remaining() / sizeof(T)) {
            if (n > SIZE_MAX / sizeof(T))
                throw ParseError(what_ + ": implausible element count " + std::to_string(n) + " for " + field, pos_);
            need(n * sizeof(T), field);
        }
        std::vector<T> v(n);
        std::memcpy(v.data(), data_ + pos_, n * sizeof(T));
        pos_ += n * sizeof(T);
        return v;
    }

    void raw(void* out, std::size_t n, const char* field) {
        need(n, field);
        std::memcpy(out, data_ + pos_, n);
        pos_ += n;
    }

    void expect_end() const {
        if (remaining() != 0)
            throw ParseError(what_ + ": " + std::to_string(remaining()) + " trailing bytes", pos_);
    }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "' for reading");
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!in) throw Error("failed reading '" + path + "'");
    return bytes;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path + "'");
}

} // namespace boundsplat::io
