#include "docstar/datamodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "docstar/transport.hpp"

namespace docstar {

namespace {

std::string fold(std::string_view w) {
    std::string out(w);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

struct OptinvLayout {
    std::vector<std::uint64_t> sip, cut;
    std::vector<Fe> hd, hdv;
    std::vector<Fe> slots; // x*y, zero tail
    std::size_t x = 0, y = 0, used = 0;
};

// Pack per-row postings (ids then chained digest, then reserve zeros) into a
// flat slot array and derive the per-row address metadata.
OptinvLayout pack_optinv(const Field& f, std::span<const Fe> row_encodings,
                         const std::vector<std::vector<Fe>>& postings,
                         std::span<const int> reserve, std::size_t gamma,
                         std::optional<std::pair<std::size_t, std::size_t>> dims) {
    OptinvLayout l;
    const std::size_t rows = postings.size();
    std::size_t cursor = 1; // slots are addressed 1-based
    std::size_t max_capacity = 0;
    for (std::size_t r = 0; r < rows; r++) {
        const auto& ids = postings[r];
        l.sip.push_back(cursor);
        l.cut.push_back(ids.size() + 1); // ids plus the digest slot
        l.hd.push_back(hash_values(f, {static_cast<Fe>(cursor), static_cast<Fe>(ids.size() + 1),
                                       row_encodings[r]}));
        std::vector<std::uint64_t> span;
        for (std::size_t k = 0; k < ids.size() + 1; k++) span.push_back(cursor + k);
        l.hdv.push_back(position_digest_sum(f, span));
        cursor += ids.size() + 1 + static_cast<std::size_t>(reserve[r]);
        max_capacity = std::max(max_capacity,
                                ids.size() + 1 + static_cast<std::size_t>(reserve[r]));
    }
    l.used = cursor - 1;

    if (dims) {
        l.x = dims->first;
        l.y = dims->second;
    } else {
        std::size_t y = std::max<std::size_t>(
            gamma + 1, static_cast<std::size_t>(
                           std::ceil(std::sqrt(static_cast<double>(std::max<std::size_t>(l.used, 1))))));
        y = std::max(y, max_capacity > 0 ? max_capacity - 1 : 1);
        l.y = y;
        l.x = (l.used + y - 1) / y;
    }
    if (l.x * l.y < l.used) throw LayoutOverflow("optinv dims below slot count");
    if (max_capacity > l.y + 1)
        throw LayoutOverflow("keyword block would span more than two rows");

    l.slots.assign(l.x * l.y, 0);
    for (std::size_t r = 0; r < rows; r++) {
        std::size_t at = l.sip[r] - 1;
        for (Fe id : postings[r]) l.slots[at++] = id;
        l.slots[at] = hash_chain(f, postings[r], row_encodings[r]);
    }
    return l;
}

// Shares `values` element-wise; result[z][i] is server z's share of values[i].
std::vector<std::vector<Fe>> share_vector_all(const Field& f,
                                              std::span<const Fe> values,
                                              std::size_t num_servers, Prng& prng,
                                              std::span<const Fe> fixed_coeffs = {}) {
    std::vector<std::vector<Fe>> out(num_servers, std::vector<Fe>(values.size()));
    for (std::size_t i = 0; i < values.size(); i++) {
        ShareSet s = share_secret(
            f, values[i], 1,
            std::span<const std::uint32_t>(kServerEvalPoints.data(), num_servers),
            prng, fixed_coeffs);
        for (std::size_t z = 0; z < num_servers; z++) out[z][i] = s.points[z].y;
    }
    return out;
}

} // namespace

ClearStructures build_structures(const CleartextCorpus& corpus,
                                 IndexLayout layout, const BuildOptions& opts) {
    if (opts.access_seed.empty()) throw ConfigError("access seed required");
    Field f(opts.p);
    ClearStructures s;
    s.p = opts.p;
    s.layout = layout;
    s.full_ap = opts.full_ap;
    s.alpha = corpus.clients.size();
    s.beta = corpus.keywords.size();
    s.delta = corpus.files.size();

    // Keyword bookkeeping and validation.
    std::map<std::string, std::size_t> kw_index;
    int kg = std::max(1, opts.min_keyword_groups);
    for (std::size_t k = 0; k < corpus.keywords.size(); k++) {
        std::string w = fold(corpus.keywords[k]);
        if (!kw_index.emplace(w, k).second)
            throw DuplicateKeyword("duplicate keyword: " + w);
        kg = std::max(kg, static_cast<int>(w.size()));
    }
    int cg = std::max(1, opts.min_content_groups);
    for (const auto& file : corpus.files)
        for (const auto& w : file.words) cg = std::max(cg, static_cast<int>(w.size()));
    s.keyword_groups = kg;
    s.content_groups = cg;
    s.band_floor = band_floor_for_groups(kg);
    if (s.band_floor >= f.modulus())
        throw ConfigError("keyword group count leaves no denied-access band under p");
    if (band_floor_for_groups(cg) > f.modulus())
        throw ConfigError("content group count does not fit the field");

    std::set<Fe> seen_ids;
    for (const auto& file : corpus.files) {
        if (file.file_id == 0 || file.file_id >= f.modulus())
            throw ConfigError("file ids must be in [1, p)");
        if (!seen_ids.insert(file.file_id).second)
            throw ConfigError("duplicate file id");
    }
    for (const auto& c : corpus.clients)
        for (const auto& kw : c.allowed_keywords)
            if (!kw_index.count(fold(kw)))
                throw ConfigError("client grant references unknown keyword: " + kw);

    const std::size_t width = s.beta + 2;
    s.keyword_row.resize(width);
    s.pos_digest_row.resize(width);
    for (std::size_t k = 0; k < s.beta; k++)
        s.keyword_row[k] = encode_keyword(f, fold(corpus.keywords[k]), kg).numeric;
    s.keyword_row[s.beta] = fake_keyword_encoding(f, kg, kFakeAllowed);
    s.keyword_row[s.beta + 1] = fake_keyword_encoding(f, kg, kFakeDenied);
    for (std::size_t c = 0; c < width; c++)
        s.pos_digest_row[c] = hash_values(f, {column_position(c, s.beta)});

    s.capability.assign(s.alpha, std::vector<Fe>(width, 0));
    for (std::size_t a = 0; a < s.alpha; a++) {
        const auto& client = corpus.clients[a];
        s.client_ids.push_back(client.client_id);
        std::set<std::string> allowed;
        for (const auto& kw : client.allowed_keywords) allowed.insert(fold(kw));
        for (std::size_t k = 0; k < s.beta; k++) {
            const std::string kw = fold(corpus.keywords[k]);
            s.capability[a][k] = allowed.count(kw)
                                     ? 0
                                     : prg_access_value(f, opts.access_seed, kw,
                                                        client.client_id, s.band_floor);
        }
        s.capability[a][s.beta] = 0; // fake-allowed column
        s.capability[a][s.beta + 1] = prg_access_value(
            f, opts.access_seed, kFakeDeniedLabel, client.client_id, s.band_floor);
    }

    // Postings per index row (real keywords in order, then the fake row).
    std::vector<std::vector<Fe>> postings(s.beta + 1);
    for (const auto& file : corpus.files) {
        std::set<std::size_t> in_file;
        for (const auto& w : file.words) {
            auto it = kw_index.find(fold(w));
            if (it != kw_index.end()) in_file.insert(it->second);
        }
        for (std::size_t k : in_file) postings[k].push_back(file.file_id);
    }

    std::size_t max_post = 0;
    for (const auto& p : postings) max_post = std::max(max_post, p.size());

    std::vector<Fe> row_encodings(s.beta + 1);
    for (std::size_t k = 0; k < s.beta; k++) row_encodings[k] = s.keyword_row[k];
    row_encodings[s.beta] = s.keyword_row[s.beta];

    if (layout == IndexLayout::kPadded) {
        s.gamma = std::max({max_post + static_cast<std::size_t>(opts.reserve_per_keyword),
                            opts.min_gamma, std::size_t{1}});
        s.inv_rows.assign(s.beta + 1, std::vector<Fe>(s.gamma + 2, 0));
        for (std::size_t r = 0; r <= s.beta; r++) {
            auto& row = s.inv_rows[r];
            for (std::size_t j = 0; j < postings[r].size(); j++) row[j] = postings[r][j];
            row[s.gamma] = static_cast<Fe>(postings[r].size() + 1); // next free slot
            row[s.gamma + 1] = hash_chain(f, postings[r], row_encodings[r]);
        }
    } else {
        s.gamma = std::max({max_post, opts.min_gamma, std::size_t{1}});
        std::vector<int> reserve(s.beta + 1, opts.reserve_per_keyword);
        if (opts.reserve_override) {
            const auto& ov = *opts.reserve_override;
            for (std::size_t r = 0; r < s.beta + 1 && r < ov.size(); r++) reserve[r] = ov[r];
            if (ov.size() <= s.beta) reserve[s.beta] = 0;
        }
        OptinvLayout l = pack_optinv(f, row_encodings, postings, reserve, s.gamma,
                                     opts.optinv_dims);
        s.addr_sip = std::move(l.sip);
        s.addr_cut = std::move(l.cut);
        s.addr_hd = std::move(l.hd);
        s.addr_hdv = std::move(l.hdv);
        s.optinv = std::move(l.slots);
        s.x = l.x;
        s.y = l.y;
        s.used_slots = l.used;
    }

    // File records. Row 0 is the dummy file.
    std::size_t max_words = 0, max_kw_per_file = 0;
    std::vector<std::vector<std::uint64_t>> file_positions(corpus.files.size());
    for (std::size_t i = 0; i < corpus.files.size(); i++) {
        const auto& file = corpus.files[i];
        max_words = std::max(max_words, file.words.size());
        std::set<std::uint64_t> pos;
        for (const auto& w : file.words) {
            auto it = kw_index.find(fold(w));
            if (it != kw_index.end()) pos.insert(static_cast<std::uint64_t>(it->second + 1));
        }
        file_positions[i].assign(pos.begin(), pos.end());
        max_kw_per_file = std::max(max_kw_per_file, pos.size());
    }
    s.eta = std::max({max_words, opts.min_eta, std::size_t{1}});
    s.gamma_ap = std::max({max_kw_per_file, opts.min_gamma_ap, std::size_t{1}});

    const Fe pad = content_pad_word(cg);
    const std::size_t nfiles = s.delta + 1;
    s.file_ids.assign(nfiles, 0);
    s.ap_rows.assign(nfiles, std::vector<Fe>(s.gamma_ap + 1, 0));
    s.content_rows.assign(nfiles, std::vector<Fe>(s.eta + 1, 0));
    if (opts.full_ap)
        s.ap_full_rows.assign(nfiles, std::vector<Fe>(s.beta + 1, 0));

    for (std::size_t row = 0; row < nfiles; row++) {
        std::vector<Fe> words(s.eta, pad);
        Fe fid = 0;
        std::vector<std::uint64_t> positions;
        if (row > 0) {
            const auto& file = corpus.files[row - 1];
            fid = file.file_id;
            for (std::size_t w = 0; w < file.words.size(); w++)
                words[w] = encode_keyword(f, fold(file.words[w]), cg).numeric;
            positions = file_positions[row - 1];
        }
        s.file_ids[row] = fid;
        for (std::size_t j = 0; j < positions.size(); j++)
            s.ap_rows[row][j] = static_cast<Fe>(positions[j]);
        s.ap_rows[row][s.gamma_ap] = position_digest_sum(f, positions);
        if (opts.full_ap) {
            for (std::uint64_t p : positions) s.ap_full_rows[row][p - 1] = 1;
            s.ap_full_rows[row][s.beta] = position_digest_sum(f, positions);
        }
        for (std::size_t w = 0; w < s.eta; w++) s.content_rows[row][w] = words[w];
        s.content_rows[row][s.eta] = hash_chain(f, words, fid);
    }
    return s;
}

std::vector<ServerBundle> share_structures(const ClearStructures& clear,
                                           std::size_t num_servers, Prng& prng,
                                           std::span<const Fe> fixed_coeffs) {
    Field f(clear.p);
    std::vector<ServerBundle> bundles(num_servers);

    auto share_into = [&](Fe value, auto&& sink) {
        ShareSet s = share_secret(
            f, value, 1,
            std::span<const std::uint32_t>(kServerEvalPoints.data(), num_servers),
            prng, fixed_coeffs);
        for (std::size_t z = 0; z < num_servers; z++) sink(z, s.points[z].y);
    };

    for (std::size_t z = 0; z < num_servers; z++) {
        auto& b = bundles[z];
        b.server_index = static_cast<int>(z + 1);
        b.params.p = clear.p;
        b.params.layout = clear.layout;
        b.params.keyword_groups = clear.keyword_groups;
        b.params.content_groups = clear.content_groups;
        b.params.band_floor = clear.band_floor;
        b.params.alpha = clear.alpha;
        b.params.beta = clear.beta;
        b.params.gamma = clear.gamma;
        b.params.delta = clear.delta;
        b.params.eta = clear.eta;
        b.params.gamma_ap = clear.gamma_ap;
        b.params.x = clear.x;
        b.params.y = clear.y;
        b.params.used_slots = clear.used_slots;
        b.params.full_ap = clear.full_ap;
        b.client_ids = clear.client_ids;

        const std::size_t width = clear.beta + 2;
        b.ac = ShareMatrix{2 + clear.alpha, width,
                           std::vector<Fe>((2 + clear.alpha) * width, 0)};
        if (clear.layout == IndexLayout::kPadded)
            b.inv = ShareMatrix{clear.beta + 1, clear.gamma + 2,
                                std::vector<Fe>((clear.beta + 1) * (clear.gamma + 2), 0)};
        else {
            b.addr = ShareMatrix{clear.beta + 1, 3,
                                 std::vector<Fe>((clear.beta + 1) * 3, 0)};
            b.addr_hdv.assign(clear.beta + 1, 0);
            b.optinv.assign(clear.optinv.size(), 0);
        }
        const std::size_t nfiles = clear.delta + 1;
        b.file_ids.assign(nfiles, 0);
        b.ap = ShareMatrix{nfiles, clear.gamma_ap + 1,
                           std::vector<Fe>(nfiles * (clear.gamma_ap + 1), 0)};
        if (clear.full_ap)
            b.ap_full = ShareMatrix{nfiles, clear.beta + 1,
                                    std::vector<Fe>(nfiles * (clear.beta + 1), 0)};
        b.content = ShareMatrix{nfiles, clear.eta + 1,
                                std::vector<Fe>(nfiles * (clear.eta + 1), 0)};
    }

    const std::size_t width = clear.beta + 2;
    for (std::size_t c = 0; c < width; c++) {
        share_into(clear.keyword_row[c],
                   [&](std::size_t z, Fe y) { bundles[z].ac.at(0, c) = y; });
        share_into(clear.pos_digest_row[c],
                   [&](std::size_t z, Fe y) { bundles[z].ac.at(1, c) = y; });
    }
    for (std::size_t a = 0; a < clear.alpha; a++)
        for (std::size_t c = 0; c < width; c++)
            share_into(clear.capability[a][c],
                       [&](std::size_t z, Fe y) { bundles[z].ac.at(2 + a, c) = y; });

    if (clear.layout == IndexLayout::kPadded) {
        for (std::size_t r = 0; r <= clear.beta; r++)
            for (std::size_t c = 0; c < clear.gamma + 2; c++)
                share_into(clear.inv_rows[r][c],
                           [&](std::size_t z, Fe y) { bundles[z].inv.at(r, c) = y; });
    } else {
        for (std::size_t r = 0; r <= clear.beta; r++) {
            share_into(static_cast<Fe>(clear.addr_sip[r]),
                       [&](std::size_t z, Fe y) { bundles[z].addr.at(r, 0) = y; });
            share_into(static_cast<Fe>(clear.addr_cut[r]),
                       [&](std::size_t z, Fe y) { bundles[z].addr.at(r, 1) = y; });
            share_into(clear.addr_hd[r],
                       [&](std::size_t z, Fe y) { bundles[z].addr.at(r, 2) = y; });
            share_into(clear.addr_hdv[r],
                       [&](std::size_t z, Fe y) { bundles[z].addr_hdv[r] = y; });
        }
        for (std::size_t i = 0; i < clear.optinv.size(); i++)
            share_into(clear.optinv[i],
                       [&](std::size_t z, Fe y) { bundles[z].optinv[i] = y; });
    }

    const std::size_t nfiles = clear.delta + 1;
    for (std::size_t r = 0; r < nfiles; r++) {
        share_into(clear.file_ids[r],
                   [&](std::size_t z, Fe y) { bundles[z].file_ids[r] = y; });
        for (std::size_t c = 0; c <= clear.gamma_ap; c++)
            share_into(clear.ap_rows[r][c],
                       [&](std::size_t z, Fe y) { bundles[z].ap.at(r, c) = y; });
        if (clear.full_ap)
            for (std::size_t c = 0; c <= clear.beta; c++)
                share_into(clear.ap_full_rows[r][c],
                           [&](std::size_t z, Fe y) { bundles[z].ap_full.at(r, c) = y; });
        for (std::size_t c = 0; c <= clear.eta; c++)
            share_into(clear.content_rows[r][c],
                       [&](std::size_t z, Fe y) { bundles[z].content.at(r, c) = y; });
    }
    return bundles;
}

// ---------------------------------------------------------------------------
// Updates

std::vector<std::uint8_t> encode_update(const UpdateMessage& u) {
    PayloadWriter w;
    w.u64(u.id);
    w.u8(static_cast<std::uint8_t>(u.kind));
    w.u32(u.a);
    w.u32(static_cast<std::uint32_t>(u.dims.size()));
    for (auto d : u.dims) w.u64(d);
    w.u32(static_cast<std::uint32_t>(u.vecs.size()));
    for (const auto& v : u.vecs) w.fe_vector(v);
    return w.take();
}

UpdateMessage decode_update(std::span<const std::uint8_t> payload) {
    PayloadReader r(payload);
    UpdateMessage u;
    u.id = r.u64();
    u.kind = static_cast<UpdateKind>(r.u8());
    u.a = r.u32();
    const auto nd = r.u32();
    u.dims.resize(nd);
    for (std::uint32_t i = 0; i < nd; i++) u.dims[i] = r.u64();
    const auto nv = r.u32();
    u.vecs.resize(nv);
    for (std::uint32_t i = 0; i < nv; i++) u.vecs[i] = r.fe_vector();
    r.require_end();
    return u;
}

namespace {

// One logical update shared to every server: same id/kind/coords, per-server
// share payloads.
UpdatePlan plan_shell(const UpdateContext& ctx, UpdateKind kind, std::uint32_t a,
                      std::vector<std::uint64_t> dims = {}) {
    UpdatePlan plan(ctx.num_servers);
    const std::uint64_t id = ctx.prng->next_u64();
    for (auto& msgs : plan) {
        UpdateMessage m;
        m.id = id;
        m.kind = kind;
        m.a = a;
        m.dims = dims;
        msgs.push_back(std::move(m));
    }
    return plan;
}

void attach_shared_vector(const UpdateContext& ctx, UpdatePlan& plan,
                          std::span<const Fe> clear) {
    auto shares = share_vector_all(ctx.field, clear, ctx.num_servers, *ctx.prng);
    for (std::size_t z = 0; z < ctx.num_servers; z++)
        plan[z].back().vecs.push_back(std::move(shares[z]));
}

void merge_plans(UpdatePlan& into, UpdatePlan&& more) {
    if (into.empty()) {
        into = std::move(more);
        return;
    }
    for (std::size_t z = 0; z < into.size(); z++)
        for (auto& m : more[z]) into[z].push_back(std::move(m));
}

} // namespace

UpdatePlan make_access_update(const UpdateContext& ctx, bool grant,
                              const std::string& keyword,
                              const std::string& client_id,
                              std::size_t client_row, std::size_t keyword_col,
                              std::size_t beta, Fe band_floor) {
    const Field& f = ctx.field;
    Fe band = prg_access_value(f, ctx.access_seed, fold(keyword), client_id, band_floor);
    std::vector<Fe> delta(beta + 2, 0);
    delta[keyword_col] = grant ? f.neg(band) : band;
    auto plan = plan_shell(ctx, UpdateKind::kAcRowAdd,
                           static_cast<std::uint32_t>(client_row));
    attach_shared_vector(ctx, plan, delta);
    return plan;
}

UpdatePlan make_add_fid_padded(const UpdateContext& ctx, std::size_t row,
                               std::size_t beta, std::size_t gamma, Fe new_fid,
                               Fe old_digest,
                               std::optional<std::size_t> free_slot) {
    const Field& f = ctx.field;
    UpdatePlan plan;
    std::size_t slot;
    std::size_t cur_gamma = gamma;
    if (free_slot) {
        if (*free_slot >= gamma) throw RowFull("free slot index out of range");
        slot = *free_slot;
    } else {
        // No free slot: grow every row by one id slot, then insert into it.
        plan = plan_shell(ctx, UpdateKind::kInvExtend, 0);
        cur_gamma = gamma + 1;
        slot = gamma;
    }
    const std::size_t rows = beta + 1;
    auto column = [&](std::size_t target, Fe value) {
        std::vector<Fe> v(rows, 0);
        v[row] = value;
        (void)target;
        return v;
    };
    auto p1 = plan_shell(ctx, UpdateKind::kInvColumnAdd, static_cast<std::uint32_t>(slot));
    attach_shared_vector(ctx, p1, column(slot, new_fid));
    merge_plans(plan, std::move(p1));

    auto p2 = plan_shell(ctx, UpdateKind::kInvColumnAdd, static_cast<std::uint32_t>(cur_gamma));
    attach_shared_vector(ctx, p2, column(cur_gamma, 1));
    merge_plans(plan, std::move(p2));

    const Fe new_digest = hash_chain_extend(f, new_fid, old_digest);
    auto p3 = plan_shell(ctx, UpdateKind::kInvColumnAdd,
                         static_cast<std::uint32_t>(cur_gamma + 1));
    attach_shared_vector(ctx, p3, column(cur_gamma + 1, f.sub(new_digest, old_digest)));
    merge_plans(plan, std::move(p3));
    return plan;
}

UpdatePlan make_add_fid_optinv(const UpdateContext& ctx, std::size_t row,
                               std::size_t beta, std::uint64_t sip,
                               std::uint64_t cut, Fe new_fid, Fe old_digest,
                               const std::string& keyword, int keyword_groups,
                               std::size_t used_slots) {
    const Field& f = ctx.field;
    const Fe enc = encode_keyword(f, fold(keyword), keyword_groups).numeric;
    const Fe new_digest = hash_chain_extend(f, new_fid, old_digest);

    // The new id takes the digest's slot; the digest moves one slot right.
    std::vector<Fe> slot_delta(used_slots, 0);
    const std::size_t digest_slot = sip + cut - 1; // 1-based linear index
    if (digest_slot + 1 > used_slots)
        throw RowFull("no reserve slot behind the keyword block");
    slot_delta[digest_slot - 1] = f.sub(new_fid, old_digest);
    slot_delta[digest_slot] = new_digest;
    auto plan = plan_shell(ctx, UpdateKind::kOptinvAdd, 0);
    attach_shared_vector(ctx, plan, slot_delta);

    const std::size_t rows = beta + 1;
    auto addr_col = [&](std::uint32_t col, Fe value) {
        std::vector<Fe> v(rows, 0);
        v[row] = value;
        auto p = plan_shell(ctx, UpdateKind::kAddrColumnAdd, col);
        attach_shared_vector(ctx, p, v);
        return p;
    };
    merge_plans(plan, addr_col(1, 1)); // CuT += 1
    const Fe hd_old = hash_values(f, {sip, cut, enc});
    const Fe hd_new = hash_values(f, {sip, cut + 1, enc});
    merge_plans(plan, addr_col(2, f.sub(hd_new, hd_old)));
    merge_plans(plan, addr_col(3, hash_values(f, {static_cast<Fe>(sip + cut)})));
    return plan;
}

UpdatePlan make_add_keyword(const UpdateContext& ctx, const BundleParams& params,
                            const std::vector<std::string>& client_ids,
                            const NewKeywordSpec& spec) {
    const Field& f = ctx.field;
    const std::string word = fold(spec.word);
    const Fe enc = encode_keyword(f, word, params.keyword_groups).numeric;
    const std::uint64_t position = params.beta + 1;

    std::vector<Fe> ac_col;
    ac_col.push_back(enc);
    ac_col.push_back(hash_values(f, {position}));
    for (const auto& c : client_ids)
        ac_col.push_back(spec.allowed_clients.count(c)
                             ? 0
                             : prg_access_value(f, ctx.access_seed, word, c,
                                                params.band_floor));

    auto plan = plan_shell(ctx, UpdateKind::kAppendKeyword, 0);
    attach_shared_vector(ctx, plan, ac_col);

    if (params.layout == IndexLayout::kPadded) {
        if (spec.fids.size() > params.gamma)
            throw LayoutOverflow("new keyword has more file-ids than row capacity");
        std::vector<Fe> row(params.gamma + 2, 0);
        for (std::size_t j = 0; j < spec.fids.size(); j++) row[j] = spec.fids[j];
        row[params.gamma] = static_cast<Fe>(spec.fids.size() + 1);
        row[params.gamma + 1] = hash_chain(f, spec.fids, enc);
        attach_shared_vector(ctx, plan, row);
    } else {
        const std::uint64_t cut = spec.fids.size() + 1;
        if (cut > params.y + 1)
            throw LayoutOverflow("new keyword block would span more than two rows");
        const std::uint64_t sip = params.used_slots + 1;
        std::vector<std::uint64_t> span;
        for (std::uint64_t k = 0; k < cut; k++) span.push_back(sip + k);
        std::vector<Fe> addr_entry{static_cast<Fe>(sip), static_cast<Fe>(cut),
                                   hash_values(f, {sip, cut, enc}),
                                   position_digest_sum(f, span)};
        attach_shared_vector(ctx, plan, addr_entry);
        std::vector<Fe> block(spec.fids.begin(), spec.fids.end());
        block.push_back(hash_chain(f, spec.fids, enc));
        block.resize(block.size() + static_cast<std::size_t>(spec.reserve), 0);
        attach_shared_vector(ctx, plan, block);
    }
    return plan;
}

UpdatePlan make_delete_keyword(const UpdateContext& ctx, const std::string& keyword,
                               std::size_t keyword_col, std::size_t beta,
                               const std::vector<std::string>& client_ids,
                               const std::vector<bool>& currently_allowed,
                               Fe band_floor, bool oblivious) {
    const Field& f = ctx.field;
    const std::string word = fold(keyword);
    if (oblivious) {
        auto plan = plan_shell(ctx, UpdateKind::kAcMatrixAdd, 0);
        for (std::size_t a = 0; a < client_ids.size(); a++) {
            std::vector<Fe> row(beta + 2, 0);
            if (currently_allowed[a])
                row[keyword_col] = prg_access_value(f, ctx.access_seed, word,
                                                    client_ids[a], band_floor);
            attach_shared_vector(ctx, plan, row);
        }
        return plan;
    }
    std::vector<Fe> col(client_ids.size(), 0);
    for (std::size_t a = 0; a < client_ids.size(); a++)
        if (currently_allowed[a])
            col[a] = prg_access_value(f, ctx.access_seed, word, client_ids[a], band_floor);
    auto plan = plan_shell(ctx, UpdateKind::kAcColumnAdd,
                           static_cast<std::uint32_t>(keyword_col));
    attach_shared_vector(ctx, plan, col);
    return plan;
}

namespace {

// New padded row contents after removing `fid`: ids compacted, marker moved
// back one, digest rebuilt over the remaining chain.
std::vector<Fe> padded_row_after_delete(const Field& f, std::span<const Fe> old_ids,
                                        Fe fid, std::size_t gamma, Fe enc) {
    std::vector<Fe> remaining;
    bool found = false;
    for (Fe id : old_ids) {
        if (!found && id == fid) {
            found = true;
            continue;
        }
        if (id != 0) remaining.push_back(id);
    }
    if (!found) throw BadAddress("file id not present in row");
    std::vector<Fe> row(gamma + 2, 0);
    for (std::size_t j = 0; j < remaining.size(); j++) row[j] = remaining[j];
    row[gamma] = static_cast<Fe>(remaining.size() + 1);
    row[gamma + 1] = hash_chain(f, remaining, enc);
    return row;
}

} // namespace

UpdatePlan make_delete_fid_padded(const UpdateContext& ctx, std::size_t row,
                                  std::size_t beta, std::size_t gamma,
                                  std::span<const Fe> old_ids, Fe fid,
                                  Fe keyword_encoding, bool oblivious) {
    const Field& f = ctx.field;
    std::vector<Fe> old_row(old_ids.begin(), old_ids.end());
    std::size_t real = 0;
    for (Fe id : old_ids)
        if (id != 0) real++;
    old_row.resize(gamma, 0);
    old_row.push_back(static_cast<Fe>(real + 1));
    old_row.push_back(hash_chain(
        f, std::vector<Fe>(old_ids.begin(), old_ids.begin() + static_cast<long>(real)),
        keyword_encoding));
    auto new_row = padded_row_after_delete(f, old_ids, fid, gamma, keyword_encoding);

    if (!oblivious) {
        auto plan = plan_shell(ctx, UpdateKind::kInvRowSet, static_cast<std::uint32_t>(row));
        attach_shared_vector(ctx, plan, new_row);
        return plan;
    }
    auto plan = plan_shell(ctx, UpdateKind::kInvMatrixAdd, 0);
    for (std::size_t r = 0; r <= beta; r++) {
        std::vector<Fe> delta(gamma + 2, 0);
        if (r == row)
            for (std::size_t c = 0; c < gamma + 2; c++)
                delta[c] = f.sub(new_row[c], old_row[c]);
        attach_shared_vector(ctx, plan, delta);
    }
    return plan;
}

UpdatePlan make_delete_fid_optinv(const UpdateContext& ctx, std::size_t row,
                                  std::size_t beta, std::uint64_t sip,
                                  std::uint64_t cut, std::span<const Fe> old_ids,
                                  Fe fid, const std::string& keyword,
                                  int keyword_groups, std::size_t used_slots,
                                  bool oblivious) {
    const Field& f = ctx.field;
    const Fe enc = encode_keyword(f, fold(keyword), keyword_groups).numeric;

    std::vector<Fe> remaining;
    bool found = false;
    for (Fe id : old_ids) {
        if (!found && id == fid) {
            found = true;
            continue;
        }
        remaining.push_back(id);
    }
    if (!found) throw BadAddress("file id not present in block");
    const Fe old_digest = hash_chain(f, old_ids, enc);
    const Fe new_digest = hash_chain(f, remaining, enc);

    // Old block: ids then digest occupying [sip, sip+cut-1]. New block has one
    // fewer slot; the freed slot becomes reserve (zero).
    std::vector<Fe> old_block(old_ids.begin(), old_ids.end());
    old_block.push_back(old_digest);
    std::vector<Fe> new_block(remaining.begin(), remaining.end());
    new_block.push_back(new_digest);
    new_block.push_back(0);

    std::vector<Fe> slot_delta(used_slots, 0);
    for (std::uint64_t k = 0; k < cut; k++)
        slot_delta[sip - 1 + k] = f.sub(new_block[k], old_block[k]);

    UpdatePlan plan;
    if (oblivious) {
        plan = plan_shell(ctx, UpdateKind::kOptinvAdd, 0);
        attach_shared_vector(ctx, plan, slot_delta);
    } else {
        for (std::uint64_t k = 0; k < cut; k++) {
            if (slot_delta[sip - 1 + k] == 0) continue;
            auto p = plan_shell(ctx, UpdateKind::kOptinvSlotAdd,
                                static_cast<std::uint32_t>(sip + k));
            attach_shared_vector(ctx, p, std::vector<Fe>{slot_delta[sip - 1 + k]});
            merge_plans(plan, std::move(p));
        }
    }

    const std::size_t rows = beta + 1;
    auto addr_col = [&](std::uint32_t col, Fe value) {
        std::vector<Fe> v(rows, 0);
        v[row] = value;
        auto p = plan_shell(ctx, UpdateKind::kAddrColumnAdd, col);
        attach_shared_vector(ctx, p, v);
        return p;
    };
    merge_plans(plan, addr_col(1, f.neg(1))); // CuT -= 1
    const Fe hd_old = hash_values(f, {sip, cut, enc});
    const Fe hd_new = hash_values(f, {sip, cut - 1, enc});
    merge_plans(plan, addr_col(2, f.sub(hd_new, hd_old)));
    merge_plans(plan, addr_col(3, f.neg(hash_values(f, {static_cast<Fe>(sip + cut - 1)}))));
    return plan;
}

UpdatePlan make_replace_phase2(const UpdateContext& ctx, const ClearStructures& clear) {
    auto plan = plan_shell(ctx, UpdateKind::kReplacePhase2, 0,
                           {clear.x, clear.y, clear.used_slots, clear.gamma});
    std::vector<Fe> sip(clear.addr_sip.begin(), clear.addr_sip.end());
    std::vector<Fe> cut(clear.addr_cut.begin(), clear.addr_cut.end());
    attach_shared_vector(ctx, plan, sip);
    attach_shared_vector(ctx, plan, cut);
    attach_shared_vector(ctx, plan, clear.addr_hd);
    attach_shared_vector(ctx, plan, clear.addr_hdv);
    attach_shared_vector(ctx, plan, clear.optinv);
    return plan;
}

UpdatePlan make_append_file(const UpdateContext& ctx, const BundleParams& params,
                            Fe file_id, const std::vector<std::string>& words,
                            const std::vector<std::size_t>& keyword_cols) {
    const Field& f = ctx.field;
    if (file_id != params.delta + 1)
        throw BadAddress("file ids must stay dense: expected delta+1");
    if (words.size() > params.eta)
        throw LayoutOverflow("file longer than the padded content length");
    if (keyword_cols.size() > params.gamma_ap)
        throw LayoutOverflow("file holds more keywords than the AP row width");

    std::vector<std::uint64_t> positions;
    for (std::size_t col : keyword_cols) positions.push_back(col + 1);
    std::sort(positions.begin(), positions.end());

    std::vector<Fe> ap(params.gamma_ap + 1, 0);
    for (std::size_t j = 0; j < positions.size(); j++)
        ap[j] = static_cast<Fe>(positions[j]);
    ap[params.gamma_ap] = position_digest_sum(f, positions);

    const Fe pad = content_pad_word(params.content_groups);
    std::vector<Fe> content(params.eta + 1, 0);
    for (std::size_t w = 0; w < params.eta; w++)
        content[w] = w < words.size()
                         ? encode_keyword(f, fold(words[w]), params.content_groups).numeric
                         : pad;
    content[params.eta] =
        hash_chain(f, std::span<const Fe>(content.data(), params.eta), file_id);

    auto plan = plan_shell(ctx, UpdateKind::kAppendFile, 0);
    attach_shared_vector(ctx, plan, std::vector<Fe>{file_id});
    attach_shared_vector(ctx, plan, ap);
    attach_shared_vector(ctx, plan, content);
    if (params.full_ap) {
        std::vector<Fe> bits(params.beta + 1, 0);
        for (std::uint64_t p : positions) bits[p - 1] = 1;
        bits[params.beta] = ap[params.gamma_ap];
        attach_shared_vector(ctx, plan, bits);
    }
    return plan;
}

namespace {

void require(bool ok) {
    if (!ok) throw AbortError(AbortReason::kBadUpdate);
}

} // namespace

void apply_update(const Field& f, ServerBundle& b, const UpdateMessage& u) {
    auto& p = b.params;
    switch (u.kind) {
        case UpdateKind::kAcRowAdd: {
            require(u.vecs.size() == 1 && u.vecs[0].size() == p.beta + 2);
            // Row index is resolved by the caller (client row); u.a carries it.
            require(u.a < p.alpha);
            for (std::size_t c = 0; c < p.beta + 2; c++)
                b.ac.at(2 + u.a, c) = f.add(b.ac.at(2 + u.a, c), u.vecs[0][c]);
            return;
        }
        case UpdateKind::kAcMatrixAdd: {
            require(u.vecs.size() == p.alpha);
            for (std::size_t a = 0; a < p.alpha; a++) {
                require(u.vecs[a].size() == p.beta + 2);
                for (std::size_t c = 0; c < p.beta + 2; c++)
                    b.ac.at(2 + a, c) = f.add(b.ac.at(2 + a, c), u.vecs[a][c]);
            }
            return;
        }
        case UpdateKind::kAcColumnAdd: {
            require(u.vecs.size() == 1 && u.vecs[0].size() == p.alpha && u.a < p.beta + 2);
            for (std::size_t a = 0; a < p.alpha; a++)
                b.ac.at(2 + a, u.a) = f.add(b.ac.at(2 + a, u.a), u.vecs[0][a]);
            return;
        }
        case UpdateKind::kInvColumnAdd: {
            require(p.layout == IndexLayout::kPadded);
            require(u.vecs.size() == 1 && u.vecs[0].size() == p.beta + 1 &&
                    u.a < p.gamma + 2);
            for (std::size_t r = 0; r <= p.beta; r++)
                b.inv.at(r, u.a) = f.add(b.inv.at(r, u.a), u.vecs[0][r]);
            return;
        }
        case UpdateKind::kInvMatrixAdd: {
            require(p.layout == IndexLayout::kPadded && u.vecs.size() == p.beta + 1);
            for (std::size_t r = 0; r <= p.beta; r++) {
                require(u.vecs[r].size() == p.gamma + 2);
                for (std::size_t c = 0; c < p.gamma + 2; c++)
                    b.inv.at(r, c) = f.add(b.inv.at(r, c), u.vecs[r][c]);
            }
            return;
        }
        case UpdateKind::kInvRowSet: {
            require(p.layout == IndexLayout::kPadded && u.vecs.size() == 1 &&
                    u.vecs[0].size() == p.gamma + 2 && u.a < p.beta + 1);
            for (std::size_t c = 0; c < p.gamma + 2; c++) b.inv.at(u.a, c) = u.vecs[0][c];
            return;
        }
        case UpdateKind::kInvExtend: {
            require(p.layout == IndexLayout::kPadded);
            ShareMatrix next{p.beta + 1, p.gamma + 3,
                             std::vector<Fe>((p.beta + 1) * (p.gamma + 3), 0)};
            for (std::size_t r = 0; r <= p.beta; r++) {
                for (std::size_t c = 0; c < p.gamma; c++) next.at(r, c) = b.inv.at(r, c);
                // New empty id slot is a plain zero share; marker and digest
                // shift right.
                next.at(r, p.gamma + 1) = b.inv.at(r, p.gamma);
                next.at(r, p.gamma + 2) = b.inv.at(r, p.gamma + 1);
            }
            b.inv = std::move(next);
            p.gamma += 1;
            return;
        }
        case UpdateKind::kAddrColumnAdd: {
            require(p.layout == IndexLayout::kOptimized && u.vecs.size() == 1 &&
                    u.vecs[0].size() == p.beta + 1 && u.a < 4);
            for (std::size_t r = 0; r <= p.beta; r++) {
                if (u.a == 3)
                    b.addr_hdv[r] = f.add(b.addr_hdv[r], u.vecs[0][r]);
                else
                    b.addr.at(r, u.a) = f.add(b.addr.at(r, u.a), u.vecs[0][r]);
            }
            return;
        }
        case UpdateKind::kOptinvAdd: {
            require(p.layout == IndexLayout::kOptimized && u.vecs.size() == 1 &&
                    u.vecs[0].size() <= b.optinv.size());
            for (std::size_t i = 0; i < u.vecs[0].size(); i++)
                b.optinv[i] = f.add(b.optinv[i], u.vecs[0][i]);
            return;
        }
        case UpdateKind::kOptinvSlotAdd: {
            require(p.layout == IndexLayout::kOptimized && u.vecs.size() == 1 &&
                    u.vecs[0].size() == 1 && u.a >= 1 && u.a <= b.optinv.size());
            b.optinv[u.a - 1] = f.add(b.optinv[u.a - 1], u.vecs[0][0]);
            return;
        }
        case UpdateKind::kAppendKeyword: {
            require(!u.vecs.empty() && u.vecs[0].size() == 2 + p.alpha);
            const std::size_t old_beta = p.beta;
            ShareMatrix next{2 + p.alpha, old_beta + 3,
                             std::vector<Fe>((2 + p.alpha) * (old_beta + 3), 0)};
            for (std::size_t r = 0; r < 2 + p.alpha; r++) {
                for (std::size_t c = 0; c < old_beta; c++) next.at(r, c) = b.ac.at(r, c);
                next.at(r, old_beta) = u.vecs[0][r];
                next.at(r, old_beta + 1) = b.ac.at(r, old_beta);     // fake-allowed
                next.at(r, old_beta + 2) = b.ac.at(r, old_beta + 1); // fake-denied
            }
            b.ac = std::move(next);

            if (p.layout == IndexLayout::kPadded) {
                require(u.vecs.size() == 2 && u.vecs[1].size() == p.gamma + 2);
                ShareMatrix inv{old_beta + 2, p.gamma + 2,
                                std::vector<Fe>((old_beta + 2) * (p.gamma + 2), 0)};
                for (std::size_t r = 0; r < old_beta; r++)
                    for (std::size_t c = 0; c < p.gamma + 2; c++)
                        inv.at(r, c) = b.inv.at(r, c);
                for (std::size_t c = 0; c < p.gamma + 2; c++) {
                    inv.at(old_beta, c) = u.vecs[1][c];
                    inv.at(old_beta + 1, c) = b.inv.at(old_beta, c); // fake row
                }
                b.inv = std::move(inv);
            } else {
                require(u.vecs.size() == 3 && u.vecs[1].size() == 4);
                ShareMatrix addr{old_beta + 2, 3,
                                 std::vector<Fe>((old_beta + 2) * 3, 0)};
                std::vector<Fe> hdv(old_beta + 2, 0);
                for (std::size_t r = 0; r < old_beta; r++) {
                    for (std::size_t c = 0; c < 3; c++) addr.at(r, c) = b.addr.at(r, c);
                    hdv[r] = b.addr_hdv[r];
                }
                for (std::size_t c = 0; c < 3; c++) {
                    addr.at(old_beta, c) = u.vecs[1][c];
                    addr.at(old_beta + 1, c) = b.addr.at(old_beta, c);
                }
                hdv[old_beta] = u.vecs[1][3];
                hdv[old_beta + 1] = b.addr_hdv[old_beta];
                b.addr = std::move(addr);
                b.addr_hdv = std::move(hdv);

                const std::size_t block = u.vecs[2].size();
                p.used_slots += block;
                p.x = (p.used_slots + p.y - 1) / p.y;
                b.optinv.resize(p.x * p.y, 0);
                for (std::size_t k = 0; k < block; k++)
                    b.optinv[p.used_slots - block + k] = u.vecs[2][k];
            }
            // The AP matrices do not grow: new keywords apply to files added
            // afterwards only.
            if (p.full_ap && b.ap_full.rows > 0) {
                ShareMatrix apf{b.ap_full.rows, old_beta + 2,
                                std::vector<Fe>(b.ap_full.rows * (old_beta + 2), 0)};
                for (std::size_t r = 0; r < b.ap_full.rows; r++) {
                    for (std::size_t c = 0; c < old_beta; c++)
                        apf.at(r, c) = b.ap_full.at(r, c);
                    apf.at(r, old_beta) = 0; // absent from every existing file
                    apf.at(r, old_beta + 1) = b.ap_full.at(r, old_beta);
                }
                b.ap_full = std::move(apf);
            }
            p.beta += 1;
            return;
        }
        case UpdateKind::kAppendFile: {
            const std::size_t want = p.full_ap ? 4 : 3;
            require(u.vecs.size() == want && u.vecs[0].size() == 1 &&
                    u.vecs[1].size() == p.gamma_ap + 1 &&
                    u.vecs[2].size() == p.eta + 1);
            b.file_ids.push_back(u.vecs[0][0]);
            b.ap.cells.insert(b.ap.cells.end(), u.vecs[1].begin(), u.vecs[1].end());
            b.ap.rows++;
            b.content.cells.insert(b.content.cells.end(), u.vecs[2].begin(),
                                   u.vecs[2].end());
            b.content.rows++;
            if (p.full_ap) {
                require(u.vecs[3].size() == p.beta + 1);
                b.ap_full.cells.insert(b.ap_full.cells.end(), u.vecs[3].begin(),
                                       u.vecs[3].end());
                b.ap_full.rows++;
            }
            p.delta += 1;
            return;
        }
        case UpdateKind::kReplacePhase2: {
            require(p.layout == IndexLayout::kOptimized && u.dims.size() == 4 &&
                    u.vecs.size() == 5);
            const std::size_t rows = p.beta + 1;
            require(u.vecs[0].size() == rows && u.vecs[1].size() == rows &&
                    u.vecs[2].size() == rows && u.vecs[3].size() == rows);
            p.x = u.dims[0];
            p.y = u.dims[1];
            p.used_slots = u.dims[2];
            p.gamma = u.dims[3];
            require(u.vecs[4].size() == p.x * p.y);
            for (std::size_t r = 0; r < rows; r++) {
                b.addr.at(r, 0) = u.vecs[0][r];
                b.addr.at(r, 1) = u.vecs[1][r];
                b.addr.at(r, 2) = u.vecs[2][r];
                b.addr_hdv[r] = u.vecs[3][r];
            }
            b.optinv = u.vecs[4];
            return;
        }
    }
    throw AbortError(AbortReason::kBadUpdate);
}

} // namespace docstar
