#pragma once

// Message streams between workers. Each (wire, port) pair is one ordered,
// reliable stream with exactly one sending and one receiving thread.
// InProcessTransport hands messages over through mailboxes; TcpTransport
// frames them over loopback sockets, one connection per stream.

#include "mtm/errors.hpp"
#include "mtm/wire_format.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mtm {

/// Thrown out of a blocking receive when the run is being torn down.
class Aborted : public std::runtime_error {
public:
    Aborted() : std::runtime_error("run aborted") {}
};

class Transport {
public:
    explicit Transport(std::size_t streams) : last_(streams) {}
    virtual ~Transport() = default;

    Transport(const Transport&) = delete;
    Transport& operator=(const Transport&) = delete;

    std::size_t stream_count() const noexcept { return last_.size(); }

    void send(const PortWaveformMessage& m) { do_send(checked_stream(m.stream()), m); }

    /// Next message on `stream`. Throws ProtocolError if its window index does
    /// not increase, Aborted if `abort` becomes set while waiting.
    PortWaveformMessage receive(std::size_t stream, const std::atomic<bool>* abort = nullptr) {
        auto m = do_receive(checked_stream(stream), abort);
        if (m.stream() != stream) throw ProtocolError("message arrived on the wrong stream");
        auto& last = last_[stream];
        if (last && m.window <= *last)
            throw ProtocolError("window index " + std::to_string(m.window) + " after " + std::to_string(*last) +
                                " on stream " + std::to_string(stream));
        last = m.window;
        return m;
    }

protected:
    virtual void do_send(std::size_t stream, const PortWaveformMessage& m) = 0;
    virtual PortWaveformMessage do_receive(std::size_t stream, const std::atomic<bool>* abort) = 0;

    static constexpr auto kPollInterval = std::chrono::milliseconds(20);

private:
    std::size_t checked_stream(std::size_t s) const {
        if (s >= last_.size()) throw ProtocolError("unknown stream " + std::to_string(s));
        return s;
    }

    std::vector<std::optional<std::uint32_t>> last_;
};

class InProcessTransport final : public Transport {
public:
    explicit InProcessTransport(std::size_t streams) : Transport(streams), boxes_(streams) {}

protected:
    void do_send(std::size_t stream, const PortWaveformMessage& m) override {
        auto& box = boxes_[stream];
        {
            std::lock_guard lock(box.mutex);
            box.queue.push_back(m);
        }
        box.ready.notify_one();
    }

    PortWaveformMessage do_receive(std::size_t stream, const std::atomic<bool>* abort) override {
        auto& box = boxes_[stream];
        std::unique_lock lock(box.mutex);
        while (box.queue.empty()) {
            if (abort && abort->load()) throw Aborted();
            box.ready.wait_for(lock, kPollInterval);
        }
        auto m = std::move(box.queue.front());
        box.queue.pop_front();
        return m;
    }

private:
    struct Mailbox {
        std::mutex mutex;
        std::condition_variable ready;
        std::deque<PortWaveformMessage> queue;
    };
    std::vector<Mailbox> boxes_;
};

namespace detail {

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Socket() { reset(); }

    int fd() const noexcept { return fd_; }

    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

[[noreturn]] inline void fail(const std::string& what) {
    throw TransportError(what + ": " + std::strerror(errno));
}

} // namespace detail

class TcpTransport final : public Transport {
public:
    /// Opens one loopback connection per stream. `timeout` bounds any single receive.
    explicit TcpTransport(std::size_t streams, std::chrono::milliseconds timeout = std::chrono::seconds(30))
        : Transport(streams), timeout_(timeout) {
        detail::Socket listener(::socket(AF_INET, SOCK_STREAM, 0));
        if (listener.fd() < 0) detail::fail("socket");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        if (::bind(listener.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) detail::fail("bind");
        if (::listen(listener.fd(), 4) < 0) detail::fail("listen");
        socklen_t len = sizeof addr;
        if (::getsockname(listener.fd(), reinterpret_cast<sockaddr*>(&addr), &len) < 0) detail::fail("getsockname");

        for (std::size_t s = 0; s < streams; ++s) {
            detail::Socket out(::socket(AF_INET, SOCK_STREAM, 0));
            if (out.fd() < 0) detail::fail("socket");
            if (::connect(out.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) detail::fail("connect");
            detail::Socket in(::accept(listener.fd(), nullptr, nullptr));
            if (in.fd() < 0) detail::fail("accept");
            const int one = 1;
            ::setsockopt(out.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            senders_.push_back(std::move(out));
            receivers_.push_back(std::move(in));
        }
    }

protected:
    void do_send(std::size_t stream, const PortWaveformMessage& m) override {
        const auto frame = encode(m);
        std::size_t done = 0;
        while (done < frame.size()) {
            const auto n = ::send(senders_[stream].fd(), frame.data() + done, frame.size() - done, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                detail::fail("send");
            }
            done += static_cast<std::size_t>(n);
        }
    }

    PortWaveformMessage do_receive(std::size_t stream, const std::atomic<bool>* abort) override {
        std::vector<std::uint8_t> frame(kFrameHeaderSize);
        read_exact(stream, frame.data(), kFrameHeaderSize, abort);
        const auto h = decode_header(frame);
        frame.resize(frame_size(h.count));
        read_exact(stream, frame.data() + kFrameHeaderSize, frame.size() - kFrameHeaderSize, abort);
        return decode(frame);
    }

private:
    void read_exact(std::size_t stream, std::uint8_t* out, std::size_t size, const std::atomic<bool>* abort) {
        const int fd = receivers_[stream].fd();
        const auto deadline = std::chrono::steady_clock::now() + timeout_;
        std::size_t done = 0;
        while (done < size) {
            if (abort && abort->load()) throw Aborted();
            if (std::chrono::steady_clock::now() > deadline)
                throw TransportError("receive timed out on stream " + std::to_string(stream));
            pollfd p{fd, POLLIN, 0};
            const int ready = ::poll(&p, 1, static_cast<int>(kPollInterval.count()));
            if (ready < 0) {
                if (errno == EINTR) continue;
                detail::fail("poll");
            }
            if (ready == 0) continue;
            const auto n = ::recv(fd, out + done, size - done, 0);
            if (n < 0) {
                if (errno == EINTR) continue;
                detail::fail("recv");
            }
            if (n == 0) throw TransportError("connection closed on stream " + std::to_string(stream));
            done += static_cast<std::size_t>(n);
        }
    }

    std::chrono::milliseconds timeout_;
    std::vector<detail::Socket> senders_;
    std::vector<detail::Socket> receivers_;
};

enum class TransportKind { inproc, tcp };

inline std::unique_ptr<Transport> make_transport(TransportKind kind, std::size_t streams) {
    if (kind == TransportKind::tcp) return std::make_unique<TcpTransport>(streams);
    return std::make_unique<InProcessTransport>(streams);
}

/// Sends every message, then receives one message per sent stream: the
/// delivered set, in the order given.
inline std::vector<PortWaveformMessage> exchange(Transport& t, const std::vector<PortWaveformMessage>& messages) {
    for (const auto& m : messages) t.send(m);
    std::vector<PortWaveformMessage> delivered;
    delivered.reserve(messages.size());
    for (const auto& m : messages) delivered.push_back(t.receive(m.stream()));
    return delivered;
}

} // namespace mtm
