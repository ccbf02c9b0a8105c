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

#pragma once

// Stream-socket transport. Addresses are "host:port" (IPv4). Frames are
// written back to back on one outbound connection per destination; a reader
// thread splits inbound streams with wire::frame_length and queues whole
// frames for the node loop.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "meshfed/node.hpp"
#include "meshfed/wire.hpp"

namespace meshfed {

class TcpTransport final : public Transport {
public:
    /// Binds and starts the reader. Port 0 picks a free port. Throws
    /// BindFailed when the address cannot be bound.
    explicit TcpTransport(const std::string& listen_address);
    ~TcpTransport() override;
    TcpTransport(const TcpTransport&) = delete;
    TcpTransport& operator=(const TcpTransport&) = delete;

    /// The bound address, with the real port.
    const std::string& address() const noexcept { return address_; }

    /// Called from the node loop only.
    bool send(const std::string& address, const wire::Bytes& frame) override;

    /// Blocks up to `timeout` for at least one frame, then drains the queue.
    std::vector<wire::Bytes> receive(std::chrono::milliseconds timeout);

    /// Inbound connections closed because their byte stream stopped parsing.
    std::uint64_t bad_streams() const noexcept { return bad_streams_.load(); }

    void close();

private:
    void reader_loop();
    int connect_to(const std::string& address);

    std::string address_;
    int listen_fd_ = -1;
    int wake_[2] = {-1, -1};  // self-pipe to stop the reader
    std::thread reader_;
    std::atomic<bool> running_{false};
    std::atomic<std::uint64_t> bad_streams_{0};

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<wire::Bytes> inbound_;

    std::map<std::string, int> outbound_;  // node-loop thread only
};

/// Splits "host:port"; false on a malformed address.
bool split_host_port(const std::string& address, std::string& host, std::uint16_t& port);

}  // namespace meshfed
