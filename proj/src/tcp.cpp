/*
Copyright 2026 The meshfed Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include "meshfed/tcp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "meshfed/log.hpp"

namespace meshfed {

namespace {

constexpr std::size_t kMaxBuffered = std::size_t{64} << 20;  // per connection

bool resolve(const std::string& host, std::uint16_t port, sockaddr_in& out) {
    std::memset(&out, 0, sizeof out);
    out.sin_family = AF_INET;
    out.sin_port = htons(port);
    const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
    if (inet_pton(AF_INET, h.c_str(), &out.sin_addr) == 1) return true;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) return false;
    out.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return true;
}

bool write_all(int fd, const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
    return true;
}

}  // namespace

bool split_host_port(const std::string& address, std::string& host, std::uint16_t& port) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon + 1 >= address.size()) return false;
    host = address.substr(0, colon);
    unsigned long p = 0;
    for (std::size_t i = colon + 1; i < address.size(); ++i) {
        if (address[i] < '0' || address[i] > '9') return false;
        p = p * 10 + static_cast<unsigned long>(address[i] - '0');
        if (p > 65535) return false;
    }
    port = static_cast<std::uint16_t>(p);
    return true;
}

TcpTransport::TcpTransport(const std::string& listen_address) {
    std::string host;
    std::uint16_t port = 0;
    if (!split_host_port(listen_address, host, port))
        throw Error(Errc::ValidationError, "listen address must be host:port, got '" + listen_address + "'");
    sockaddr_in sa{};
    if (!resolve(host, port, sa)) throw Error(Errc::BindFailed, "cannot resolve " + host);

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw Error(Errc::BindFailed, std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 || ::listen(listen_fd_, 64) != 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error(Errc::BindFailed, "cannot bind " + listen_address + ": " + why);
    }
    socklen_t len = sizeof sa;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
    char ip[INET_ADDRSTRLEN];
    inet_ntop(AF_INET, &sa.sin_addr, ip, sizeof ip);
    address_ = std::string(ip) + ":" + std::to_string(ntohs(sa.sin_port));

    if (::pipe2(wake_, O_CLOEXEC) != 0) {
        ::close(listen_fd_);
        throw Error(Errc::Io, std::string("pipe: ") + std::strerror(errno));
    }
    running_ = true;
    reader_ = std::thread([this] { reader_loop(); });
}

TcpTransport::~TcpTransport() { close(); }

void TcpTransport::close() {
    if (running_.exchange(false)) {
        const char b = 0;
        [[maybe_unused]] auto r = ::write(wake_[1], &b, 1);
        reader_.join();
    }
    for (auto& [addr, fd] : outbound_) ::close(fd);
    outbound_.clear();
    for (int& fd : wake_) {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
    cv_.notify_all();
}

int TcpTransport::connect_to(const std::string& address) {
    std::string host;
    std::uint16_t port = 0;
    sockaddr_in sa{};
    if (!split_host_port(address, host, port) || !resolve(host, port, sa)) return -1;
    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) return -1;
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
        ::close(fd);
        return -1;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

bool TcpTransport::send(const std::string& address, const wire::Bytes& frame) {
    // A cached connection may have been closed by the far side; retry once fresh.
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto it = outbound_.find(address);
        if (it == outbound_.end()) {
            const int fd = connect_to(address);
            if (fd < 0) return false;
            it = outbound_.emplace(address, fd).first;
        }
        if (write_all(it->second, frame.data(), frame.size())) return true;
        ::close(it->second);
        outbound_.erase(it);
    }
    return false;
}

std::vector<wire::Bytes> TcpTransport::receive(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [this] { return !inbound_.empty() || !running_; });
    std::vector<wire::Bytes> out(std::make_move_iterator(inbound_.begin()), std::make_move_iterator(inbound_.end()));
    inbound_.clear();
    return out;
}

void TcpTransport::reader_loop() {
    struct Conn {
        int fd;
        wire::Bytes buf;
    };
    std::vector<Conn> conns;
    std::vector<pollfd> fds;

    while (running_) {
        fds.clear();
        fds.push_back({wake_[0], POLLIN, 0});
        fds.push_back({listen_fd_, POLLIN, 0});
        for (const auto& c : conns) fds.push_back({c.fd, POLLIN, 0});
        if (::poll(fds.data(), fds.size(), -1) < 0) {
            if (errno == EINTR) continue;
            log::error(std::string("poll: ") + std::strerror(errno));
            break;
        }
        if (fds[0].revents) break;
        if (fds[1].revents & POLLIN) {
            const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
            if (fd >= 0) conns.push_back({fd, {}});
        }

        std::vector<wire::Bytes> frames;
        for (std::size_t i = 2; i < fds.size(); ++i) {
            if (!fds[i].revents) continue;
            Conn& c = conns[i - 2];
            std::uint8_t chunk[65536];
            const ssize_t n = ::recv(c.fd, chunk, sizeof chunk, 0);
            bool drop = n <= 0;
            if (n > 0) c.buf.insert(c.buf.end(), chunk, chunk + n);
            try {
                std::size_t at = 0;
                while (!drop) {
                    auto len = wire::frame_length(std::span<const std::uint8_t>(c.buf).subspan(at));
                    if (!len || at + *len > c.buf.size()) break;
                    frames.emplace_back(c.buf.begin() + static_cast<std::ptrdiff_t>(at),
                                        c.buf.begin() + static_cast<std::ptrdiff_t>(at + *len));
                    at += *len;
                }
                c.buf.erase(c.buf.begin(), c.buf.begin() + static_cast<std::ptrdiff_t>(at));
                if (c.buf.size() > kMaxBuffered) throw Error(Errc::BodyTooLarge, "inbound frame too large");
            } catch (const Error& e) {
                ++bad_streams_;
                log::info(std::string("closing inbound stream: ") + e.what());
                drop = true;
            }
            if (drop) {
                ::close(c.fd);
                c.fd = -1;
            }
        }
        std::erase_if(conns, [](const Conn& c) { return c.fd < 0; });

        if (!frames.empty()) {
            std::lock_guard lock(mu_);
            for (auto& f : frames) inbound_.push_back(std::move(f));
            cv_.notify_all();
        }
    }
    for (const auto& c : conns) ::close(c.fd);
}

}  // namespace meshfed
