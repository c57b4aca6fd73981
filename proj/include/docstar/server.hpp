#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>

#include "docstar/datamodel.hpp"
#include "docstar/mpc.hpp"
#include "docstar/transport.hpp"

namespace docstar {

// Test-only fault injection: perturb one element of the outbound answer of
// the given phase (1 = scan vector, 2 = id fetch, 3 = file words).
struct TamperSpec {
    int phase = 0;
    std::size_t index = 0;
    Fe delta = 1;
};

struct NodeConfig {
    bool plain_test1 = false;   // skip the degree-reduced, randomized variant
    bool fake_continue = false; // on a failed access test, serve the fake row
    std::chrono::milliseconds peer_timeout{8000};
    std::optional<RnFixture> rn_fixture;
    std::optional<TamperSpec> tamper;
};

// Captured opened test values of the most recent session step, for tests and
// debugging. Never part of any client-bound message.
struct TestTrace {
    Fe test1_local = 0;
    Fe test1_open = 0;
    bool test1_set = false;
};

class Node {
public:
    Node(ServerBundle bundle, NodeConfig cfg);

    int index() const { return bundle_.server_index; }
    const ServerBundle& bundle() const { return bundle_; }
    NodeConfig& config() { return cfg_; }

    void attach_peers(PeerGroup group) { peers_ = std::move(group); }
    PeerGroup& peers() { return peers_; }
    Mailbox& mailbox() { return mailbox_; }

    // Blocking loop serving one client connection; returns when the link
    // closes. A connection carries one session at a time; a frame with a new
    // session id starts a fresh session.
    void serve_client(const LinkPtr& link);
    void serve_client_with(const LinkPtr& link, const Frame& first);

    void stop();
    bool stopped() const { return stopped_.load(); }

    TestTrace last_trace() const {
        std::lock_guard lk(trace_mu_);
        return trace_;
    }

private:
    struct Session {
        SessionId id{};
        std::string client_id;
        std::size_t client_row = static_cast<std::size_t>(-1);
        int phase = 0;
        Prng prng;
        RnPool pool;
        std::uint32_t next_batch = 0;
        std::size_t batch_size = 0;
        std::uint32_t tag = 0;
        std::vector<Fe> claimable; // phase-2 answer shares Test 2 may reference
        Fe hdv_share = 0;
        bool have_hdv = false;
        Fe hap_share = 0;
        bool awaiting_kpv = false;
        std::vector<Fe> p3_vector;
        std::vector<std::uint32_t> p3_members;
    };

    void dispatch_client_frame(const LinkPtr& link, const Frame& frame,
                               std::unique_ptr<Session>& session,
                               bool& have_session);
    Frame handle(Session& s, const Frame& in);
    Frame on_hello(Session& s, const Frame& in);
    Frame on_p1_query(Session& s, const Frame& in);
    Frame on_p2_vector(Session& s, const Frame& in);
    Frame on_optinv_vectors(Session& s, const Frame& in);
    Frame on_p3_vector(Session& s, const Frame& in);
    Frame on_p3_kpv(Session& s, const Frame& in);
    Frame on_update(Session& s, const Frame& in);

    // Protocol building blocks.
    void ensure_pool(Session& s, std::size_t need);
    std::vector<Fe> take_rn(Session& s, std::size_t n);
    std::pair<std::vector<Fe>, std::vector<Fe>> take_rn_m0(Session& s, std::size_t n);
    std::uint32_t next_tag(Session& s) { return s.tag++; }
    void run_tests_ab(Session& s, std::span<const Fe> v);
    bool test1_access(Session& s, std::span<const Fe> v); // false = denied
    std::vector<Fe> return_file(Session& s, std::span<const Fe> kpv_shares);
    static std::vector<Fe> constant_onehot(std::size_t len, std::size_t index);

    std::size_t pool_budget() const;
    std::size_t client_row_of(const std::string& client_id) const;
    void record_test1(Fe local, Fe open);

    ServerBundle bundle_;
    NodeConfig cfg_;
    PeerGroup peers_;
    Mailbox mailbox_;
    mutable std::shared_mutex bundle_mu_;
    std::set<std::uint64_t> applied_updates_;
    std::mutex updates_mu_;
    std::atomic<bool> stopped_{false};
    mutable std::mutex trace_mu_;
    TestTrace trace_;
};

// Serialized public parameters sent in the HELLO reply so clients track
// dynamic updates without re-reading configs.
std::vector<std::uint8_t> encode_params(const BundleParams& p);
BundleParams decode_params(std::span<const std::uint8_t> payload);

} // namespace docstar
