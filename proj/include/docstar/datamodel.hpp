#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "docstar/codec.hpp"
#include "docstar/field.hpp"

namespace docstar {

enum class IndexLayout : std::uint8_t { kPadded = 0, kOptimized = 1 };

// Row-id values attached to AC-matrix columns. Real keyword k (0-based) sits
// in column k with row-id k+1; the fake-allowed column carries row-id 0; the
// fake-denied column carries a reserved value that no real keyword ever gets.
inline constexpr std::uint64_t kFakeDeniedPosition = 1ULL << 32;

inline std::uint64_t column_position(std::size_t col, std::size_t beta) {
    if (col < beta) return col + 1;
    if (col == beta) return 0; // fake-allowed
    return kFakeDeniedPosition;
}

struct CorpusFile {
    Fe file_id = 0; // positive; 0 is reserved for the dummy file
    std::vector<std::string> words;
};

struct CorpusClient {
    std::string client_id;
    std::set<std::string> allowed_keywords;
};

struct CleartextCorpus {
    std::vector<CorpusFile> files;
    std::vector<CorpusClient> clients;
    std::vector<std::string> keywords; // ordered, searchable
};

struct BuildOptions {
    Fe p = Field::kDefaultPrime;
    std::vector<std::uint8_t> access_seed; // keyed PRG for denied cells
    int reserve_per_keyword = 1;
    // Fixture hook: explicit per-keyword reserve slot counts (optimized
    // layout) overriding reserve_per_keyword.
    std::optional<std::vector<int>> reserve_override;
    std::optional<std::pair<std::size_t, std::size_t>> optinv_dims; // x, y
    bool full_ap = false;     // also build the length-beta AP bit rows
    int min_keyword_groups = 0;
    int min_content_groups = 0;
    std::size_t min_gamma = 0;    // lower bound on id-slot capacity
    std::size_t min_gamma_ap = 0; // lower bound on reduced AP width
    std::size_t min_eta = 0;      // lower bound on padded content length
};

// Cleartext image of every outsourced structure; the sharing step maps each
// cell through an independent polynomial.
struct ClearStructures {
    Fe p = 0;
    IndexLayout layout = IndexLayout::kPadded;
    int keyword_groups = 0;
    int content_groups = 0;
    Fe band_floor = 0;
    std::size_t alpha = 0, beta = 0, gamma = 0, delta = 0, eta = 0, gamma_ap = 0;
    std::size_t x = 0, y = 0, used_slots = 0; // optimized layout
    bool full_ap = false;

    std::vector<Fe> keyword_row;    // beta+2 encodings (incl. both fakes)
    std::vector<Fe> pos_digest_row; // beta+2, H(row-id)
    std::vector<std::string> client_ids;
    std::vector<std::vector<Fe>> capability; // alpha rows of beta+2 cells

    // Padded index: rows 0..beta-1 = real keywords, row beta = fake keyword.
    // Row layout: gamma id slots, next-free marker, chained digest.
    std::vector<std::vector<Fe>> inv_rows;

    // Optimized index.
    std::vector<std::uint64_t> addr_sip, addr_cut; // beta+1
    std::vector<Fe> addr_hd, addr_hdv;             // beta+1
    std::vector<Fe> optinv;                        // x*y slots, zero tail

    // Files: row 0 = dummy (id 0), rows 1..delta = real files.
    std::vector<Fe> file_ids;                   // delta+1
    std::vector<std::vector<Fe>> ap_rows;       // (delta+1) x (gamma_ap+1)
    std::vector<std::vector<Fe>> ap_full_rows;  // (delta+1) x (beta+1), optional
    std::vector<std::vector<Fe>> content_rows;  // (delta+1) x (eta+1)
};

struct ShareMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<Fe> cells; // row-major

    Fe& at(std::size_t r, std::size_t c) { return cells[r * cols + c]; }
    Fe at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
    std::span<const Fe> row(std::size_t r) const {
        return {cells.data() + r * cols, cols};
    }
};

struct BundleParams {
    Fe p = 0;
    IndexLayout layout = IndexLayout::kPadded;
    int keyword_groups = 0;
    int content_groups = 0;
    Fe band_floor = 0;
    std::uint64_t alpha = 0, beta = 0, gamma = 0, delta = 0, eta = 0;
    std::uint64_t gamma_ap = 0, x = 0, y = 0, used_slots = 0;
    bool full_ap = false;
};

struct ServerBundle {
    int server_index = 0; // evaluation point, 1..4
    BundleParams params;
    std::vector<std::string> client_ids; // cleartext, never shared

    ShareMatrix ac;  // (2 + alpha) x (beta+2); row 0 keywords, row 1 H(row-id)
    ShareMatrix inv; // (beta+1) x (gamma+2) when padded

    ShareMatrix addr;          // (beta+1) x 3: SiP, CuT, HD
    std::vector<Fe> addr_hdv;  // held back from clients
    std::vector<Fe> optinv;    // x*y

    std::vector<Fe> file_ids; // delta+1
    ShareMatrix ap;           // (delta+1) x (gamma_ap+1)
    ShareMatrix ap_full;      // (delta+1) x (beta+1) when full_ap
    ShareMatrix content;      // (delta+1) x (eta+1)
};

ClearStructures build_structures(const CleartextCorpus& corpus,
                                 IndexLayout layout, const BuildOptions& opts);

// Fresh degree-1 polynomial per cell; fixed_coeffs (fixture hook) forces the
// same coefficient vector on every cell instead.
std::vector<ServerBundle> share_structures(const ClearStructures& clear,
                                           std::size_t num_servers, Prng& prng,
                                           std::span<const Fe> fixed_coeffs = {});

// ---------------------------------------------------------------------------
// Dynamic updates. Each update is a small instruction applied additively (or
// structurally) by every server; coordinates are public, payloads are shares.

enum class UpdateKind : std::uint8_t {
    kAcRowAdd = 1,       // a = client row; vecs[0] = beta+2 deltas (grant/revoke)
    kAcMatrixAdd = 2,    // vecs[r] = row r deltas, alpha rows (oblivious keyword delete)
    kAcColumnAdd = 3,    // a = column; vecs[0] = alpha deltas (leaky keyword delete)
    kInvColumnAdd = 4,   // a = column; vecs[0] = beta+1 deltas (padded add/delete)
    kInvMatrixAdd = 5,   // vecs[r] = row r deltas (oblivious padded delete)
    kInvRowSet = 6,      // a = row; vecs[0] = replacement row (leaky padded delete)
    kInvExtend = 7,      // grow every row by one id slot (gamma += 1)
    kAddrColumnAdd = 8,  // a = 0..3 (SiP/CuT/HD/HdV); vecs[0] = beta+1 deltas
    kOptinvAdd = 9,      // vecs[0] = used_slots deltas (oblivious)
    kOptinvSlotAdd = 10, // a = slot (1-based); vecs[0] = single delta (leaky)
    kAppendKeyword = 11, // structural append of one real keyword column/row
    kReplacePhase2 = 12, // full optimized-index replacement (rebuild path)
    kAppendFile = 13,    // new file record (id, AP row, content row)
};

struct UpdateMessage {
    std::uint64_t id = 0;
    UpdateKind kind{};
    std::uint32_t a = 0;
    std::vector<std::uint64_t> dims;
    std::vector<std::vector<Fe>> vecs;
};

std::vector<std::uint8_t> encode_update(const UpdateMessage& u);
UpdateMessage decode_update(std::span<const std::uint8_t> payload);

// Per-server update lists, indexed by server (eval point - 1).
using UpdatePlan = std::vector<std::vector<UpdateMessage>>;

struct UpdateContext {
    Field field;
    std::span<const std::uint8_t> access_seed;
    std::size_t num_servers = 4;
    Prng* prng = nullptr;
    std::uint64_t update_id = 0;
};

// grant=true subtracts the PRG band value (deny -> allow); grant=false adds it.
UpdatePlan make_access_update(const UpdateContext& ctx, bool grant,
                              const std::string& keyword,
                              const std::string& client_id,
                              std::size_t client_row, std::size_t keyword_col,
                              std::size_t beta, Fe band_floor);

// Padded-index insertion. free_slot is the 0-based id-slot column, taken from
// the obliviously fetched next-free marker; nullopt triggers the row
// extension path (every row grows by one slot first).
UpdatePlan make_add_fid_padded(const UpdateContext& ctx, std::size_t row,
                               std::size_t beta, std::size_t gamma, Fe new_fid,
                               Fe old_digest,
                               std::optional<std::size_t> free_slot);

// Optimized-index insertion when the keyword's block has a reserve slot left.
// sip/cut are the obliviously fetched cleartext values, old_digest the opened
// chain cell.
UpdatePlan make_add_fid_optinv(const UpdateContext& ctx, std::size_t row,
                               std::size_t beta, std::uint64_t sip,
                               std::uint64_t cut, Fe new_fid, Fe old_digest,
                               const std::string& keyword, int keyword_groups,
                               std::size_t used_slots);

struct NewKeywordSpec {
    std::string word;
    std::vector<Fe> fids;                 // postings for already-known files
    std::set<std::string> allowed_clients;
    int reserve = 1; // empty slots appended behind the new block (optimized)
};

UpdatePlan make_add_keyword(const UpdateContext& ctx, const BundleParams& params,
                            const std::vector<std::string>& client_ids,
                            const NewKeywordSpec& spec);

UpdatePlan make_delete_keyword(const UpdateContext& ctx, const std::string& keyword,
                               std::size_t keyword_col, std::size_t beta,
                               const std::vector<std::string>& client_ids,
                               const std::vector<bool>& currently_allowed,
                               Fe band_floor, bool oblivious);

// old_ids = current id slots of the row (cleartext, obliviously fetched).
UpdatePlan make_delete_fid_padded(const UpdateContext& ctx, std::size_t row,
                                  std::size_t beta, std::size_t gamma,
                                  std::span<const Fe> old_ids, Fe fid,
                                  Fe keyword_encoding, bool oblivious);

UpdatePlan make_delete_fid_optinv(const UpdateContext& ctx, std::size_t row,
                                  std::size_t beta, std::uint64_t sip,
                                  std::uint64_t cut, std::span<const Fe> old_ids,
                                  Fe fid, const std::string& keyword,
                                  int keyword_groups, std::size_t used_slots,
                                  bool oblivious);

// Rebuild path: replaces AddrList + OptInv wholesale (flagged: reveals that a
// rebuild happened, contents stay shared).
UpdatePlan make_replace_phase2(const UpdateContext& ctx, const ClearStructures& clear);

// New file record. The id must be delta+1 (ids stay dense so fetch vectors
// can address files by id); keyword_cols lists the 0-based AC columns of the
// searchable keywords the file contains.
UpdatePlan make_append_file(const UpdateContext& ctx, const BundleParams& params,
                            Fe file_id, const std::vector<std::string>& words,
                            const std::vector<std::size_t>& keyword_cols);

// Applies one update to a bundle. Not idempotent: callers deduplicate by
// update id before applying.
void apply_update(const Field& f, ServerBundle& bundle, const UpdateMessage& u);

} // namespace docstar
