/**
 * @file tcp_server.hpp
 * @brief Blocking POSIX TCP server for the line-delimited JSON protocol.
 *
 * One thread per connection. A connection is read only after the previous
 * line has been handled and answered, so a slow consumer slows the sender
 * through TCP flow control instead of losing samples.
 */
#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "gazeskill/error.hpp"
#include "gazeskill/stream_service.hpp"

namespace gazeskill {

inline constexpr std::size_t kMaxLineBytes = 1 << 20;

/// Splits "host:port"; the host may be empty (all interfaces).
inline std::pair<std::string, std::uint16_t> parse_listen_address(std::string_view addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string_view::npos) throw Error(Errc::InvalidArgument, "listen address must be host:port");
    const std::string port_text(addr.substr(colon + 1));
    char* end = nullptr;
    const long port = std::strtol(port_text.c_str(), &end, 10);
    if (port_text.empty() || *end != '\0' || port < 0 || port > 65535)
        throw Error(Errc::InvalidArgument, "bad port '" + port_text + "'");
    return {std::string(addr.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

namespace detail {

inline bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

}  // namespace detail

class TcpServer {
public:
    using HandlerFactory = std::function<ProtocolHandler()>;

    /// Binds and listens; throws Error(Network) when the address is unusable.
    TcpServer(const std::string& host, std::uint16_t port, HandlerFactory factory) : factory_(std::move(factory)) {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        hints.ai_flags = AI_PASSIVE;
        addrinfo* res = nullptr;
        const std::string port_text = std::to_string(port);
        const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), port_text.c_str(), &hints, &res);
        if (rc != 0) throw Error(Errc::Network, std::string("cannot resolve '") + host + "': " + ::gai_strerror(rc));
        listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (listen_fd_ < 0) {
            ::freeaddrinfo(res);
            throw Error(Errc::Network, std::string("socket: ") + std::strerror(errno));
        }
        const int yes = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 64) != 0) {
            const int err = errno;
            ::freeaddrinfo(res);
            ::close(listen_fd_);
            throw Error(Errc::Network, "cannot listen on " + host + ":" + port_text + ": " + std::strerror(err));
        }
        ::freeaddrinfo(res);
        sockaddr_in bound{};
        socklen_t len = sizeof bound;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = ntohs(bound.sin_port);
    }

    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    ~TcpServer() {
        stop();
        for (auto& t : workers_)
            if (t.joinable()) t.join();
        if (listen_fd_ >= 0) ::close(listen_fd_);
    }

    std::uint16_t port() const noexcept { return port_; }

    /// Accepts connections until stop() is called.
    void run() {
        while (!stopping_) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) {
                if (errno == EINTR && !stopping_) continue;
                if (stopping_) break;
                continue;
            }
            {
                std::lock_guard lock(mu_);
                if (stopping_) {
                    ::close(fd);
                    break;
                }
                open_.insert(fd);
            }
            workers_.emplace_back([this, fd] { serve_connection(fd); });
        }
    }

    /// Unblocks run() and closes live connections.
    void stop() {
        std::lock_guard lock(mu_);
        stopping_ = true;
        if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
        for (int fd : open_) ::shutdown(fd, SHUT_RDWR);
    }

    /// Only unblocks run(); safe to call from a signal handler. Follow with
    /// stop() once run() has returned.
    void interrupt() noexcept {
        stopping_ = true;
        if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
    }

private:
    void serve_connection(int fd) {
        ProtocolHandler handler = factory_();
        std::string buffer;
        char chunk[8192];
        bool open = true;
        while (open) {
            const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;
            buffer.append(chunk, static_cast<std::size_t>(n));
            std::size_t start = 0;
            for (std::size_t nl; open && (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
                const auto reply = handler.handle_line(std::string_view(buffer).substr(start, nl - start));
                for (const auto& line : reply.lines)
                    if (!detail::send_all(fd, line + "\n")) open = false;
                if (reply.close) open = false;
            }
            buffer.erase(0, start);
            if (open && buffer.size() > kMaxLineBytes) {
                detail::send_all(fd, R"({"type":"error","code":"malformed_json","message":"line too long"})" "\n");
                open = false;
            }
        }
        {
            std::lock_guard lock(mu_);
            open_.erase(fd);
        }
        ::shutdown(fd, SHUT_RDWR);
        ::close(fd);
    }

    HandlerFactory factory_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::mutex mu_;
    std::set<int> open_;
    std::vector<std::thread> workers_;
};

}  // namespace gazeskill
