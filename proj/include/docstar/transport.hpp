#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docstar/errors.hpp"
#include "docstar/field.hpp"

namespace docstar {

enum class MsgType : std::uint8_t {
    kHello = 1,
    kP1Query = 2,
    kP1Ans = 3,
    kP2Vector = 4,
    kP2Ans = 5,
    kAddrAns = 6,
    kOptinvVectors = 7,
    kOptinvAns = 8,
    kP3Vector = 9,
    kP3Positions = 10,
    kP3Kpv = 11,
    kP3File = 12,
    kUpdate = 13,
    kRnContrib = 14,
    kRnCheck = 15,
    kTestShare = 16,
    kDegredMasked = 17,
    kDegredReshare = 18,
    kAbort = 19,
};

using SessionId = std::array<std::uint8_t, 16>;

struct Frame {
    MsgType type{};
    SessionId session{};
    std::vector<std::uint8_t> payload;
};

// Frame layout: 4-byte big-endian length (covering type + session + payload),
// 1-byte type, 16-byte session id, payload. Payload field elements are 8-byte
// big-endian; vectors are 4-byte big-endian count-prefixed.
inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 16;
inline constexpr std::size_t kMaxPayloadBytes = 64u << 20;

std::vector<std::uint8_t> encode_frame(const Frame& frame);
Frame decode_frame(std::span<const std::uint8_t> bytes);

class PayloadWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void fe(Fe v) { u64(v); }
    void fe_vector(std::span<const Fe> v);
    void u32_vector(std::span<const std::uint32_t> v);
    void str(std::string_view s);
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class PayloadReader {
public:
    explicit PayloadReader(std::span<const std::uint8_t> b) : buf_(b) {}
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    Fe fe() { return u64(); }
    std::vector<Fe> fe_vector();
    std::vector<std::uint32_t> u32_vector();
    std::string str();
    bool at_end() const { return off_ == buf_.size(); }
    void require_end() const;

private:
    void need(std::size_t n) const;
    std::span<const std::uint8_t> buf_;
    std::size_t off_ = 0;
};

struct TransferStats {
    std::uint64_t frames_sent = 0;
    std::uint64_t bytes_sent = 0;
    std::uint64_t frames_received = 0;
    std::uint64_t bytes_received = 0;
};

// One end of a bidirectional frame pipe. send() is thread-safe; recv() is
// intended for a single reader.
class Link {
public:
    virtual ~Link() = default;
    virtual void send(const Frame& frame) = 0;
    virtual std::optional<Frame> recv(std::chrono::milliseconds timeout) = 0;
    virtual void close() = 0;
    virtual TransferStats stats() const = 0;
};

using LinkPtr = std::shared_ptr<Link>;

// In-process pipe with FIFO delivery; deterministic and cheap, used by tests
// and the bench harness.
std::pair<LinkPtr, LinkPtr> make_loopback_pair();

// TCP transport.
LinkPtr tcp_connect(const std::string& host, std::uint16_t port,
                    std::chrono::milliseconds timeout);

class TcpListener {
public:
    TcpListener(const std::string& host, std::uint16_t port);
    ~TcpListener();
    LinkPtr accept(std::chrono::milliseconds timeout); // nullptr on timeout
    void close();
    std::uint16_t port() const { return port_; }

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

} // namespace docstar
