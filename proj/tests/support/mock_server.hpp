#pragma once

// In-process score server speaking the remote-provider protocol, for tests.

#include "boundsplat/guidance/remote.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mock {

using namespace boundsplat;
using namespace boundsplat::guidance;

/// Handler returns the response frame for a well-formed request.
using Handler = std::function<Frame(const Frame&)>;

/// Echo semantics: predict_noise / encode / decode return the request payload
/// unchanged; ping returns the schedule.
inline Handler echo_handler(const NoiseSchedule& schedule) {
    return [table = schedule.table()](const Frame& req) {
        const std::string op = req.header.value("op", std::string());
        if (op == "ping") {
            return Frame{json{{"op", "pong"},
                              {"T", static_cast<int>(table.size()) - 1},
                              {"alpha_bar", table},
                              {"checksum", schedule_checksum(table)},
                              {"model", "mock"}},
                         {}};
        }
        if (op == "predict_noise" || op == "encode" || op == "decode") {
            if (req.header.value("dtype", std::string()) != "f32")
                return Frame{json{{"op", "error"}, {"code", "bad_dtype"}, {"message", "dtype must be f32"}}, {}};
            if (!req.header.contains("shape") || req.header["shape"].size() != 3)
                return Frame{json{{"op", "error"}, {"code", "bad_shape"}, {"message", "shape must be [H, W, C]"}}, {}};
            return Frame{json{{"op", op}, {"shape", req.header["shape"]}, {"dtype", "f32"}}, req.payload};
        }
        return Frame{json{{"op", "error"}, {"code", "unknown_op"}, {"message", "unknown op '" + op + "'"}}, {}};
    };
}

class Server {
public:
    explicit Server(Handler handler) : handler_(std::move(handler)) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        const int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0)
            throw std::runtime_error("mock server: cannot listen");
        socklen_t len = sizeof addr;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        acceptor_ = std::thread([this] { accept_loop(); });
    }

    ~Server() {
        stop_ = true;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        acceptor_.join();
        std::lock_guard lock(mutex_);
        for (int fd : clients_) ::shutdown(fd, SHUT_RDWR);
        for (auto& t : workers_) t.join();
        for (int fd : clients_) ::close(fd);
    }

    int port() const { return port_; }
    int requests() const { return requests_.load(); }

private:
    void accept_loop() {
        while (!stop_) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) {
                if (stop_) return;
                continue;
            }
            std::lock_guard lock(mutex_);
            clients_.push_back(fd);
            workers_.emplace_back([this, fd] { serve(fd); });
        }
    }

    void serve(int fd) {
        try {
            while (true) {
                std::optional<Frame> req;
                try {
                    req = net::read_frame(fd);
                } catch (const ParseError& e) {
                    net::write_frame(fd, Frame{json{{"op", "error"}, {"code", "malformed_frame"}, {"message", e.what()}}, {}});
                    return;
                }
                if (!req) return;
                ++requests_;
                net::write_frame(fd, handler_(*req));
            }
        } catch (const std::exception&) {
            // connection dropped
        }
    }

    Handler handler_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> stop_{false};
    std::atomic<int> requests_{0};
    std::thread acceptor_;
    std::mutex mutex_;
    std::vector<int> clients_;
    std::vector<std::thread> workers_;
};

} // namespace mock
