#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>

#include "docstar/field.hpp"
#include "docstar/transport.hpp"

namespace docstar {

// Routes inter-server frames to the protocol step waiting for them, keyed by
// (sender, type, session, tag). Reader threads deliver; protocol code takes.
class Mailbox {
public:
    void deliver(int from, const Frame& frame);
    // Blocks until a matching payload (tag already stripped) arrives.
    std::vector<std::uint8_t> take(int from, MsgType type, const SessionId& session,
                                   std::uint32_t tag,
                                   std::chrono::milliseconds timeout);
    void shutdown();

private:
    struct Key {
        int from;
        MsgType type;
        SessionId session;
        std::uint32_t tag;
        bool operator<(const Key& o) const {
            if (from != o.from) return from < o.from;
            if (type != o.type) return type < o.type;
            if (session != o.session) return session < o.session;
            return tag < o.tag;
        }
    };
    std::mutex mu_;
    std::condition_variable cv_;
    std::map<Key, std::deque<std::vector<std::uint8_t>>> slots_;
    bool down_ = false;
};

// One server's view of the 4-server mesh.
struct PeerGroup {
    int self = 1;                      // this server's evaluation point
    std::array<LinkPtr, 5> links{};    // indexed by server index 1..4
    Mailbox* mailbox = nullptr;
    std::chrono::milliseconds timeout{5000};

    std::vector<int> others() const {
        std::vector<int> v;
        for (int z = 1; z <= 4; z++)
            if (z != self) v.push_back(z);
        return v;
    }

    void send(int to, MsgType type, const SessionId& session, std::uint32_t tag,
              std::span<const std::uint8_t> body) const;
    void broadcast(MsgType type, const SessionId& session, std::uint32_t tag,
                   std::span<const std::uint8_t> body) const;
    std::vector<std::uint8_t> recv_from(int from, MsgType type,
                                        const SessionId& session,
                                        std::uint32_t tag) const;
};

// Per-query verified randomness: degree-1 shares of unknown nonzero values
// plus degree-2 zero shares derived from an independent slot range.
struct RnPool {
    std::vector<Fe> rn;    // multiplier slots
    std::vector<Fe> m0src; // degree-1 sources the zero shares derive from
    std::vector<Fe> m0;    // degree-2 shares of 0, m0[i] = m0src[i] * self
    std::size_t cursor = 0;
    bool consumed_marker = false;
};

// Fixture hook: pin slot polynomials (share = coeff * x + secret, cycled) and
// optionally null the zero-randomizers, for bit-exact examples.
struct RnFixture {
    std::vector<std::pair<Fe, Fe>> polys; // (coeff, secret)
    bool zero_m0 = false;
};

struct RnOptions {
    const RnFixture* fixture = nullptr;
    // Test-only fault injection for a contributing server: maps (slot,
    // recipient, honest share) to what actually gets sent/kept.
    std::function<Fe(std::size_t, int, Fe)> tamper;
};

// Servers 1..3 each contribute fresh nonzero randoms as degree-1 sharings over
// x=1..4; everyone aggregates into `count` multiplier slots plus `count`
// zero-share sources. tag = batch index (shared counter across servers).
RnPool rn_generate(const Field& f, PeerGroup& group, const SessionId& session,
                   std::uint32_t batch, std::size_t count, Prng& prng,
                   const RnOptions& opts = {});

// Checksum exchange: every server folds a seed-derived multiplier vector over
// its slots, broadcasts the fold, and checks the four points are collinear.
// Throws TamperedRandomness on disagreement.
void rn_verify(const Field& f, PeerGroup& group, const SessionId& session,
               std::uint32_t batch, const RnPool& pool);

// Broadcast local shares of opened test values and interpolate every
// (degree+1)-subset; all subsets must agree or the protocol aborts.
Fe exchange_and_open(const Field& f, PeerGroup& group, const SessionId& session,
                     std::uint32_t tag, Fe local_share, int degree);
std::vector<Fe> exchange_and_open_vec(const Field& f, PeerGroup& group,
                                      const SessionId& session, std::uint32_t tag,
                                      std::span<const Fe> local_shares, int degree);

// Degree-2 -> degree-1 conversion: mask with fresh degree-1 randomness, open
// the masked values at server 1 only, reshare at degree 1, unmask.
std::vector<Fe> reduce_degree(const Field& f, PeerGroup& group,
                              const SessionId& session, std::uint32_t tag,
                              std::span<const Fe> deg2_shares,
                              std::span<const Fe> mask_rn, Prng& prng);

} // namespace docstar
