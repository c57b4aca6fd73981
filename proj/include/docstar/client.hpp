#pragma once

#include <array>
#include <optional>
#include <string>

#include "docstar/datamodel.hpp"
#include "docstar/server.hpp"
#include "docstar/transport.hpp"

namespace docstar {

struct QueryOptions {
    bool verify = false;        // cross-check all four servers' answers
    bool fake_continue = false; // on denial, keep going via the fake row
    std::size_t bins = 0;       // >0: binned phase-3 fetch vectors
    // Fixture hooks: pinned polynomial coefficients for the keyword share and
    // for every vector element share.
    std::optional<std::vector<Fe>> uw_coeffs;
    std::optional<std::vector<Fe>> vec_coeffs;
    std::uint64_t prng_seed = 0; // 0 = OS entropy
};

enum class QueryStatus {
    kOk,
    kNoAccessOrAbsent,
    kAborted,
    kServerMisbehavior,
};

struct FileResult {
    Fe file_id = 0;
    bool delivered = false; // false: restricted, no content released
    std::vector<std::string> words;
};

struct PhaseCounter {
    std::uint64_t elements_sent = 0;
    std::uint64_t elements_received = 0;
};

struct Transcript {
    std::array<std::vector<Fe>, 4> p1_answers; // raw per-server scan vectors
    std::vector<Fe> p1_opened;
    std::array<PhaseCounter, 4> phase_counts; // [1..3] used
    int misbehavior_phase = 0;
};

struct QueryOutcome {
    QueryStatus status = QueryStatus::kOk;
    AbortReason abort_reason = AbortReason::kNone;
    std::size_t keyword_column = static_cast<std::size_t>(-1);
    std::vector<FileResult> files;
    Transcript transcript;
};

struct OptinvFetchPair {
    std::vector<Fe> row_vec; // length x, one-hot
    std::vector<Fe> pos_vec; // length y, zeros on the wanted offsets
};

struct FetchBin {
    std::vector<std::uint32_t> members; // file rows, always includes the dummy
    std::size_t select = 0;             // index into members
};

class Client {
public:
    explicit Client(std::array<LinkPtr, 4> links) : links_(std::move(links)) {}

    QueryOutcome run_query(const std::string& client_id, const std::string& keyword,
                           const QueryOptions& opts = {});

    // Pushes one logical update to all four servers; returns once every
    // server acknowledged it.
    void send_update(const UpdatePlan& plan);

    // Owner-side oblivious fetch of one index row: phases 1 and 2 only,
    // returning the opened row so updates can be built from the current
    // digest and free-slot state.
    struct RowFetch {
        bool ok = false;
        std::size_t keyword_column = static_cast<std::size_t>(-1);
        std::vector<Fe> id_slots; // padded: gamma slots as stored
        Fe marker = 0;            // padded: next-free marker value
        Fe digest = 0;            // chain digest cell
        std::uint64_t sip = 0, cut = 0; // optimized
        std::vector<Fe> block;          // optimized: ids then digest
    };
    RowFetch fetch_row(const std::string& client_id, const std::string& keyword);

    // Public parameters as of the last HELLO exchange.
    const BundleParams& params() const { return params_; }
    BundleParams fetch_params();

    static std::vector<Fe> build_onehot(std::size_t length, std::size_t index);
    // One pair per matrix row the span [sip, sip+cut-1] touches (1 or 2).
    static std::vector<OptinvFetchPair> build_optinv_vectors(std::uint64_t sip,
                                                             std::uint64_t cut,
                                                             std::size_t x,
                                                             std::size_t y);
    static std::vector<Fe> build_kpv(std::span<const Fe> positions, std::size_t beta);
    static std::vector<FetchBin> plan_multi_fetch(std::span<const Fe> target_rows,
                                                  std::size_t delta,
                                                  std::size_t gamma,
                                                  std::size_t bins, Prng& prng);

private:
    struct AbortSignal {
        AbortReason reason;
    };
    struct MisbehaviorSignal {
        int phase;
    };

    SessionId new_session(Prng& prng);
    void send_all(const Frame& frame, int phase, Transcript& t);
    std::array<std::vector<Fe>, 4> recv_vectors(const SessionId& session,
                                                MsgType expect, int phase,
                                                Transcript& t);
    std::vector<Fe> open_columns(const Field& f,
                                 const std::array<std::vector<Fe>, 4>& shares,
                                 bool verify, int phase);
    std::array<std::vector<Fe>, 4> share_vector(const Field& f,
                                                std::span<const Fe> clear,
                                                Prng& prng,
                                                const QueryOptions& opts) const;

    std::array<LinkPtr, 4> links_;
    BundleParams params_;
    bool have_params_ = false;
};

} // namespace docstar
