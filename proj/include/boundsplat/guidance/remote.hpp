#pragma once

// Client for an out-of-process score model. Wire format, one frame per message:
//   u32 little-endian header length | UTF-8 JSON header | float32 LE payload (row-major)
// The payload size is the product of header["shape"] times 4 bytes (no payload
// when "shape" is absent). Levels on the wire use this library's convention:
// t = 0 is the clean image and alpha_bar tables carry T + 1 entries.

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/image.hpp"
#include "boundsplat/guidance/provider.hpp"
#include "boundsplat/guidance/schedule.hpp"

#include <json.hpp>

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace boundsplat::guidance {

using json = nlohmann::json;

struct Frame {
    json header;
    std::vector<float> payload;
};

inline constexpr std::uint32_t kMaxHeaderBytes = 1u << 20;
inline constexpr std::uint64_t kMaxPayloadFloats = 1ull << 28;

/// Number of payload floats implied by a header.
inline std::uint64_t payload_count(const json& header) {
    if (!header.contains("shape")) return 0;
    const auto& shape = header.at("shape");
    if (!shape.is_array()) throw ProviderError("frame header: 'shape' must be an array");
    std::uint64_t n = 1;
    for (const auto& d : shape) {
        if (!d.is_number_integer() || d.get<std::int64_t>() < 0) throw ProviderError("frame header: bad shape entry");
        n *= d.get<std::uint64_t>();
        if (n > kMaxPayloadFloats) throw ProviderError("frame header: payload too large");
    }
    return n;
}

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
    const std::string head = f.header.dump();
    if (payload_count(f.header) != f.payload.size())
        throw ProviderError("encode_frame: payload size does not match header shape");
    std::vector<std::uint8_t> out(4 + head.size() + 4 * f.payload.size());
    const auto len = static_cast<std::uint32_t>(head.size());
    for (int b = 0; b < 4; ++b) out[b] = static_cast<std::uint8_t>(len >> (8 * b));
    std::memcpy(out.data() + 4, head.data(), head.size());
    std::uint8_t* p = out.data() + 4 + head.size();
    for (float v : f.payload) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int b = 0; b < 4; ++b) *p++ = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    return out;
}

/// Parses a complete frame held in memory. Throws ParseError with the failing offset.
inline Frame decode_frame(const std::uint8_t* data, std::size_t size) {
    if (size < 4) throw ParseError("frame: expected 4-byte header length, got " + std::to_string(size) + " bytes", size);
    std::uint32_t len = 0;
    for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(data[b]) << (8 * b);
    if (len > kMaxHeaderBytes) throw ParseError("frame: header length " + std::to_string(len) + " too large", 0);
    if (size < 4 + std::size_t{len})
        throw ParseError("frame: expected " + std::to_string(4 + std::size_t{len}) + " header bytes, got " +
                             std::to_string(size),
                         size);
    Frame f;
    try {
        f.header = json::parse(data + 4, data + 4 + len);
    } catch (const json::exception& e) {
        throw ParseError(std::string("frame: malformed JSON header: ") + e.what(), 4);
    }
    if (!f.header.is_object()) throw ParseError("frame: header must be a JSON object", 4);
    std::uint64_t n = 0;
    try {
        n = payload_count(f.header);
    } catch (const ProviderError& e) {
        throw ParseError(e.what(), 4);
    }
    const std::size_t expected = 4 + std::size_t{len} + 4 * n;
    if (size != expected)
        throw ParseError("frame: expected " + std::to_string(expected) + " bytes, got " + std::to_string(size),
                         std::min(size, expected));
    f.payload.resize(n);
    const std::uint8_t* p = data + 4 + len;
    for (std::uint64_t i = 0; i < n; ++i, p += 4) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
        f.payload[i] = std::bit_cast<float>(bits);
    }
    return f;
}

/// Blocking socket helpers shared by the client and test servers.
namespace net {

inline void send_all(int fd, const std::uint8_t* data, std::size_t size) {
    while (size > 0) {
        const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProviderError(std::string("socket send failed: ") + std::strerror(errno));
        }
        data += n;
        size -= static_cast<std::size_t>(n);
    }
}

/// Reads exactly `size` bytes; false on orderly shutdown before the first byte.
inline bool recv_exact(int fd, std::uint8_t* data, std::size_t size, bool allow_eof = false) {
    std::size_t got = 0;
    while (got < size) {
        const ssize_t n = ::recv(fd, data + got, size - got, 0);
        if (n == 0) {
            if (allow_eof && got == 0) return false;
            throw ProviderError("connection closed after " + std::to_string(got) + " of " + std::to_string(size) +
                                " expected bytes");
        }
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK) throw ProviderError("socket receive timed out");
            throw ProviderError(std::string("socket receive failed: ") + std::strerror(errno));
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

inline void write_frame(int fd, const Frame& f) {
    const auto bytes = encode_frame(f);
    send_all(fd, bytes.data(), bytes.size());
}

/// Reads one frame; std::nullopt on clean end of stream.
inline std::optional<Frame> read_frame(int fd) {
    std::uint8_t lenbuf[4];
    if (!recv_exact(fd, lenbuf, 4, true)) return std::nullopt;
    std::uint32_t len = 0;
    for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(lenbuf[b]) << (8 * b);
    if (len > kMaxHeaderBytes) throw ParseError("frame: header length " + std::to_string(len) + " too large", 0);
    std::vector<std::uint8_t> buf(4 + len);
    std::memcpy(buf.data(), lenbuf, 4);
    recv_exact(fd, buf.data() + 4, len);
    json header;
    try {
        header = json::parse(buf.begin() + 4, buf.end());
    } catch (const json::exception& e) {
        throw ParseError(std::string("frame: malformed JSON header: ") + e.what(), 4);
    }
    std::uint64_t n = 0;
    try {
        n = payload_count(header);
    } catch (const ProviderError& e) {
        throw ParseError(e.what(), 4);
    }
    buf.resize(4 + len + 4 * n);
    recv_exact(fd, buf.data() + 4 + len, 4 * n);
    return decode_frame(buf.data(), buf.size());
}

inline int connect_tcp(const std::string& host, int port, double timeout_s) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
        throw ProviderError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);
    std::string last = "no addresses";
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        timeval tv{};
        tv.tv_sec = static_cast<time_t>(timeout_s);
        tv.tv_usec = static_cast<suseconds_t>((timeout_s - static_cast<double>(tv.tv_sec)) * 1e6);
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) return fd;
        last = std::strerror(errno);
        ::close(fd);
    }
    throw ProviderError("cannot connect to " + host + ":" + service + ": " + last);
}

} // namespace net

inline Frame image_frame(json header, const Image& img) {
    header["shape"] = {img.height, img.width, img.channels};
    header["dtype"] = "f32";
    Frame f{std::move(header), {}};
    f.payload.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) f.payload[i] = static_cast<float>(img.data[i]);
    return f;
}

inline Image frame_image(const Frame& f) {
    const auto& shape = f.header.at("shape");
    if (shape.size() != 3) throw ProviderError("response shape must be [H, W, C]");
    Image img(shape[1].get<int>(), shape[0].get<int>(), shape[2].get<int>());
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = f.payload[i];
    return img;
}

/// Score provider served over TCP. Holds a small pool of connections so several
/// requests can be in flight at once; each connection carries one request at a time.
class RemoteProvider : public ScoreProvider {
public:
    RemoteProvider(std::string host, int port, double timeout_s = 120.0)
        : host_(std::move(host)), port_(port), timeout_(timeout_s) {
        const Frame pong = call(Frame{json{{"op", "ping"}}, {}});
        try {
            auto table = pong.header.at("alpha_bar").get<std::vector<double>>();
            if (pong.header.contains("checksum") &&
                pong.header.at("checksum").get<std::string>() != schedule_checksum(table))
                throw ProviderError("remote schedule checksum mismatch");
            if (pong.header.contains("T") && pong.header.at("T").get<int>() + 1 != static_cast<int>(table.size()))
                throw ProviderError("remote schedule length does not match T");
            schedule_ = std::make_unique<NoiseSchedule>(NoiseSchedule::from_alpha_bar(std::move(table)));
        } catch (const json::exception& e) {
            throw ProviderError(std::string("malformed ping response: ") + e.what());
        } catch (const ValidationError& e) {
            throw ProviderError(std::string("remote schedule rejected: ") + e.what());
        }
        model_ = pong.header.value("model", std::string("remote"));
    }

    ~RemoteProvider() override {
        for (int fd : idle_) ::close(fd);
    }

    RemoteProvider(const RemoteProvider&) = delete;
    RemoteProvider& operator=(const RemoteProvider&) = delete;

    Image predict_noise(const Image& x_t, int t, const std::string& prompt, double cfg) const override {
        schedule_->check(t);
        const Frame resp = call(image_frame(json{{"op", "predict_noise"}, {"t", t}, {"prompt", prompt}, {"cfg", cfg}}, x_t));
        return checked_image(resp, x_t);
    }

    Image encode(const Image& img) const { return frame_image(call(image_frame(json{{"op", "encode"}}, img))); }
    Image decode(const Image& latent) const { return frame_image(call(image_frame(json{{"op", "decode"}}, latent))); }

    const NoiseSchedule& schedule() const override { return *schedule_; }
    std::string name() const override { return "remote:" + host_ + ":" + std::to_string(port_) + " (" + model_ + ")"; }

    /// One request/response exchange. Error frames become ProviderError.
    Frame call(const Frame& request) const {
        int fd = acquire();
        Frame resp;
        try {
            net::write_frame(fd, request);
            auto got = net::read_frame(fd);
            if (!got) throw ProviderError("server closed the connection without a response");
            resp = std::move(*got);
        } catch (const Error&) {
            ::close(fd);
            throw;
        }
        release(fd);
        if (resp.header.value("op", std::string()) == "error" || resp.header.contains("error")) {
            const json& e = resp.header.contains("error") ? resp.header["error"] : resp.header;
            throw ProviderError("remote error " + e.value("code", std::string("unknown")) + ": " +
                                e.value("message", std::string("(no message)")));
        }
        return resp;
    }

private:
    static Image checked_image(const Frame& resp, const Image& like) {
        const auto& shape = resp.header.value("shape", json::array());
        if (shape != json{like.height, like.width, like.channels})
            throw ProviderError("remote response shape " + shape.dump() + " does not match request [" +
                                std::to_string(like.height) + "," + std::to_string(like.width) + "," +
                                std::to_string(like.channels) + "]");
        Image out = frame_image(resp);
        for (double v : out.data)
            if (!std::isfinite(v)) throw ProviderError("remote response contains non-finite values");
        return out;
    }

    int acquire() const {
        {
            std::lock_guard lock(mutex_);
            if (!idle_.empty()) {
                const int fd = idle_.back();
                idle_.pop_back();
                return fd;
            }
        }
        return net::connect_tcp(host_, port_, timeout_);
    }

    void release(int fd) const {
        std::lock_guard lock(mutex_);
        idle_.push_back(fd);
    }

    std::string host_;
    int port_;
    double timeout_;
    std::string model_;
    std::unique_ptr<NoiseSchedule> schedule_;
    mutable std::mutex mutex_;
    mutable std::vector<int> idle_;
};

} // namespace boundsplat::guidance
