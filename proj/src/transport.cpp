#include "docstar/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

namespace docstar {

namespace {

bool known_type(std::uint8_t t) {
    return t >= static_cast<std::uint8_t>(MsgType::kHello) &&
           t <= static_cast<std::uint8_t>(MsgType::kAbort);
}

} // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    if (frame.payload.size() > kMaxPayloadBytes)
        throw FramingError("payload exceeds 64 MiB");
    const std::uint32_t len =
        static_cast<std::uint32_t>(1 + frame.session.size() + frame.payload.size());
    std::vector<std::uint8_t> out;
    out.reserve(4 + len);
    out.push_back(static_cast<std::uint8_t>(len >> 24));
    out.push_back(static_cast<std::uint8_t>(len >> 16));
    out.push_back(static_cast<std::uint8_t>(len >> 8));
    out.push_back(static_cast<std::uint8_t>(len));
    out.push_back(static_cast<std::uint8_t>(frame.type));
    out.insert(out.end(), frame.session.begin(), frame.session.end());
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFrameHeaderBytes) throw FramingError("truncated frame");
    const std::uint32_t len = (static_cast<std::uint32_t>(bytes[0]) << 24) |
                              (static_cast<std::uint32_t>(bytes[1]) << 16) |
                              (static_cast<std::uint32_t>(bytes[2]) << 8) |
                              static_cast<std::uint32_t>(bytes[3]);
    if (len < 17) throw FramingError("frame length below header size");
    if (len > 17 + kMaxPayloadBytes) throw FramingError("frame length exceeds limit");
    if (bytes.size() != 4 + static_cast<std::size_t>(len))
        throw FramingError("frame length mismatch");
    if (!known_type(bytes[4])) throw ProtocolError("unknown message type");
    Frame f;
    f.type = static_cast<MsgType>(bytes[4]);
    std::copy(bytes.begin() + 5, bytes.begin() + 21, f.session.begin());
    f.payload.assign(bytes.begin() + 21, bytes.end());
    return f;
}

void PayloadWriter::u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    buf_.push_back(static_cast<std::uint8_t>(v));
}

void PayloadWriter::u32(std::uint32_t v) {
    for (int i = 3; i >= 0; i--) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void PayloadWriter::u64(std::uint64_t v) {
    for (int i = 7; i >= 0; i--) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void PayloadWriter::fe_vector(std::span<const Fe> v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (Fe x : v) fe(x);
}

void PayloadWriter::u32_vector(std::span<const std::uint32_t> v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (std::uint32_t x : v) u32(x);
}

void PayloadWriter::str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
}

void PayloadReader::need(std::size_t n) const {
    if (off_ + n > buf_.size()) throw ProtocolError("payload underflow");
}

std::uint8_t PayloadReader::u8() {
    need(1);
    return buf_[off_++];
}

std::uint16_t PayloadReader::u16() {
    need(2);
    std::uint16_t v = (static_cast<std::uint16_t>(buf_[off_]) << 8) | buf_[off_ + 1];
    off_ += 2;
    return v;
}

std::uint32_t PayloadReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; i++) v = (v << 8) | buf_[off_ + static_cast<std::size_t>(i)];
    off_ += 4;
    return v;
}

std::uint64_t PayloadReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; i++) v = (v << 8) | buf_[off_ + static_cast<std::size_t>(i)];
    off_ += 8;
    return v;
}

std::vector<Fe> PayloadReader::fe_vector() {
    const std::uint32_t n = u32();
    need(static_cast<std::size_t>(n) * 8);
    std::vector<Fe> v(n);
    for (std::uint32_t i = 0; i < n; i++) v[i] = u64();
    return v;
}

std::vector<std::uint32_t> PayloadReader::u32_vector() {
    const std::uint32_t n = u32();
    need(static_cast<std::size_t>(n) * 4);
    std::vector<std::uint32_t> v(n);
    for (std::uint32_t i = 0; i < n; i++) v[i] = u32();
    return v;
}

std::string PayloadReader::str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data()) + off_, n);
    off_ += n;
    return s;
}

void PayloadReader::require_end() const {
    if (!at_end()) throw ProtocolError("trailing bytes in payload");
}

// ---------------------------------------------------------------------------
// Loopback transport

namespace {

struct LoopbackQueue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Frame> q;
    bool closed = false;
};

class LoopbackLink final : public Link {
public:
    LoopbackLink(std::shared_ptr<LoopbackQueue> out, std::shared_ptr<LoopbackQueue> in)
        : out_(std::move(out)), in_(std::move(in)) {}

    ~LoopbackLink() override { close(); }

    void send(const Frame& frame) override {
        const std::size_t wire = encode_frame(frame).size();
        {
            std::lock_guard lk(out_->mu);
            if (out_->closed) throw ProtocolError("link closed");
            out_->q.push_back(frame);
        }
        out_->cv.notify_one();
        std::lock_guard lk(stats_mu_);
        stats_.frames_sent++;
        stats_.bytes_sent += wire;
    }

    std::optional<Frame> recv(std::chrono::milliseconds timeout) override {
        std::unique_lock lk(in_->mu);
        if (!in_->cv.wait_for(lk, timeout, [&] { return !in_->q.empty() || in_->closed; }))
            return std::nullopt;
        if (in_->q.empty()) return std::nullopt; // closed
        Frame f = std::move(in_->q.front());
        in_->q.pop_front();
        lk.unlock();
        std::lock_guard slk(stats_mu_);
        stats_.frames_received++;
        stats_.bytes_received += kFrameHeaderBytes + f.payload.size();
        return f;
    }

    void close() override {
        for (auto& side : {out_, in_}) {
            std::lock_guard lk(side->mu);
            side->closed = true;
        }
        out_->cv.notify_all();
        in_->cv.notify_all();
    }

    TransferStats stats() const override {
        std::lock_guard lk(stats_mu_);
        return stats_;
    }

private:
    std::shared_ptr<LoopbackQueue> out_, in_;
    mutable std::mutex stats_mu_;
    TransferStats stats_;
};

} // namespace

std::pair<LinkPtr, LinkPtr> make_loopback_pair() {
    auto a = std::make_shared<LoopbackQueue>();
    auto b = std::make_shared<LoopbackQueue>();
    return {std::make_shared<LoopbackLink>(a, b), std::make_shared<LoopbackLink>(b, a)};
}

// ---------------------------------------------------------------------------
// TCP transport

namespace {

class TcpLink final : public Link {
public:
    explicit TcpLink(int fd) : fd_(fd) {
        int one = 1;
        setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }

    ~TcpLink() override { close(); }

    void send(const Frame& frame) override {
        auto bytes = encode_frame(frame);
        std::lock_guard lk(write_mu_);
        std::size_t off = 0;
        while (off < bytes.size()) {
            ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n <= 0) throw ProtocolError("tcp send failed");
            off += static_cast<std::size_t>(n);
        }
        std::lock_guard slk(stats_mu_);
        stats_.frames_sent++;
        stats_.bytes_sent += bytes.size();
    }

    std::optional<Frame> recv(std::chrono::milliseconds timeout) override {
        std::uint8_t hdr[4];
        if (!read_exact(hdr, 4, timeout)) return std::nullopt;
        std::uint32_t len = 0;
        for (int i = 0; i < 4; i++) len = (len << 8) | hdr[i];
        if (len < 17 || len > 17 + kMaxPayloadBytes)
            throw FramingError("frame length out of range");
        std::vector<std::uint8_t> rest(len);
        if (!read_exact(rest.data(), rest.size(), timeout))
            throw FramingError("truncated frame");
        std::vector<std::uint8_t> whole;
        whole.reserve(4 + len);
        whole.insert(whole.end(), hdr, hdr + 4);
        whole.insert(whole.end(), rest.begin(), rest.end());
        Frame f = decode_frame(whole);
        std::lock_guard slk(stats_mu_);
        stats_.frames_received++;
        stats_.bytes_received += whole.size();
        return f;
    }

    void close() override {
        int fd = fd_.exchange(-1);
        if (fd >= 0) {
            ::shutdown(fd, SHUT_RDWR);
            ::close(fd);
        }
    }

    TransferStats stats() const override {
        std::lock_guard lk(stats_mu_);
        return stats_;
    }

private:
    bool read_exact(std::uint8_t* dst, std::size_t n, std::chrono::milliseconds timeout) {
        std::size_t off = 0;
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (off < n) {
            int fd = fd_.load();
            if (fd < 0) return false;
            auto remain = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (remain.count() <= 0) return false;
            pollfd pfd{fd, POLLIN, 0};
            int pr = ::poll(&pfd, 1, static_cast<int>(remain.count()));
            if (pr == 0) return false;
            if (pr < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            ssize_t r = ::recv(fd, dst + off, n - off, 0);
            if (r == 0) return false; // peer closed
            if (r < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                return false;
            }
            off += static_cast<std::size_t>(r);
        }
        return true;
    }

    std::atomic<int> fd_;
    std::mutex write_mu_;
    mutable std::mutex stats_mu_;
    TransferStats stats_;
};

int resolve_and_connect(const std::string& host, std::uint16_t port,
                        std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
        throw ProtocolError("cannot resolve " + host);
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    (void)timeout;
    if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + service);
    return fd;
}

} // namespace

LinkPtr tcp_connect(const std::string& host, std::uint16_t port,
                    std::chrono::milliseconds timeout) {
    return std::make_shared<TcpLink>(resolve_and_connect(host, port, timeout));
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ProtocolError("cannot create listener socket");
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host.empty() || host == "0.0.0.0")
        addr.sin_addr.s_addr = INADDR_ANY;
    else if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw ProtocolError("listener host must be an IPv4 address");
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw ProtocolError("cannot bind " + host + ":" + std::to_string(port));
    if (::listen(fd_, 64) != 0) throw ProtocolError("listen failed");
    socklen_t alen = sizeof(addr);
    getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

LinkPtr TcpListener::accept(std::chrono::milliseconds timeout) {
    if (fd_ < 0) return nullptr;
    pollfd pfd{fd_, POLLIN, 0};
    int pr = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (pr <= 0) return nullptr;
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) return nullptr;
    return std::make_shared<TcpLink>(cfd);
}

void TcpListener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

} // namespace docstar
