#include "docstar/server.hpp"

#include "docstar/kernels.hpp"

namespace docstar {

namespace {

// Tag spaces per protocol step keep concurrent exchanges within a session
// disjoint; the low bits come from the per-session step counter.
constexpr std::uint32_t kTagStep = 0x10000000u;

Frame make_frame(MsgType type, const SessionId& session, std::vector<std::uint8_t> payload) {
    Frame f;
    f.type = type;
    f.session = session;
    f.payload = std::move(payload);
    return f;
}

} // namespace

std::vector<std::uint8_t> encode_params(const BundleParams& p) {
    PayloadWriter w;
    w.u64(p.p);
    w.u8(static_cast<std::uint8_t>(p.layout));
    w.u32(static_cast<std::uint32_t>(p.keyword_groups));
    w.u32(static_cast<std::uint32_t>(p.content_groups));
    w.u64(p.band_floor);
    w.u64(p.alpha);
    w.u64(p.beta);
    w.u64(p.gamma);
    w.u64(p.delta);
    w.u64(p.eta);
    w.u64(p.gamma_ap);
    w.u64(p.x);
    w.u64(p.y);
    w.u64(p.used_slots);
    w.u8(p.full_ap ? 1 : 0);
    return w.take();
}

BundleParams decode_params(std::span<const std::uint8_t> payload) {
    PayloadReader r(payload);
    BundleParams p;
    p.p = r.u64();
    p.layout = static_cast<IndexLayout>(r.u8());
    p.keyword_groups = static_cast<int>(r.u32());
    p.content_groups = static_cast<int>(r.u32());
    p.band_floor = r.u64();
    p.alpha = r.u64();
    p.beta = r.u64();
    p.gamma = r.u64();
    p.delta = r.u64();
    p.eta = r.u64();
    p.gamma_ap = r.u64();
    p.x = r.u64();
    p.y = r.u64();
    p.used_slots = r.u64();
    p.full_ap = r.u8() == 1;
    r.require_end();
    return p;
}

Node::Node(ServerBundle bundle, NodeConfig cfg)
    : bundle_(std::move(bundle)), cfg_(std::move(cfg)) {}

void Node::stop() {
    stopped_.store(true);
    mailbox_.shutdown();
}

std::size_t Node::client_row_of(const std::string& client_id) const {
    for (std::size_t a = 0; a < bundle_.client_ids.size(); a++)
        if (bundle_.client_ids[a] == client_id) return a;
    throw AbortError(AbortReason::kUnknownClient);
}

std::size_t Node::pool_budget() const {
    const auto& p = bundle_.params;
    // Phase 1 consumes one multiplier per AC column; phase 2 needs the
    // access-test randomizer (and its reduction mask) plus the column masks of
    // two optimized fetch rounds; every phase-3 fetch needs the file masks,
    // the test-5 reduction mask, and (full AP) one mask per AP bit.
    std::size_t per_fetch = 2 + p.eta + 1 + (p.full_ap ? p.beta : 0);
    return p.beta + 2 + 4 + 2 * p.y + p.gamma * per_fetch + 8;
}

void Node::ensure_pool(Session& s, std::size_t need) {
    while (s.pool.cursor + need > s.pool.rn.size()) {
        RnOptions opts;
        if (cfg_.rn_fixture) opts.fixture = &*cfg_.rn_fixture;
        const Field f(bundle_.params.p);
        RnPool fresh = rn_generate(f, peers_, s.id, s.next_batch, s.batch_size,
                                   s.prng, opts);
        if (!cfg_.rn_fixture) rn_verify(f, peers_, s.id, s.next_batch, fresh);
        s.next_batch++;
        // Unconsumed remainder of the previous batch is discarded: one pool
        // per query step sequence, never shared across batches.
        const std::size_t keep = s.pool.rn.size() - s.pool.cursor;
        if (keep == 0) {
            s.pool = std::move(fresh);
        } else {
            s.pool.rn.erase(s.pool.rn.begin(),
                            s.pool.rn.begin() + static_cast<long>(s.pool.cursor));
            s.pool.m0src.erase(s.pool.m0src.begin(),
                               s.pool.m0src.begin() + static_cast<long>(s.pool.cursor));
            s.pool.m0.erase(s.pool.m0.begin(),
                            s.pool.m0.begin() + static_cast<long>(s.pool.cursor));
            s.pool.cursor = 0;
            s.pool.rn.insert(s.pool.rn.end(), fresh.rn.begin(), fresh.rn.end());
            s.pool.m0src.insert(s.pool.m0src.end(), fresh.m0src.begin(), fresh.m0src.end());
            s.pool.m0.insert(s.pool.m0.end(), fresh.m0.begin(), fresh.m0.end());
        }
    }
}

std::vector<Fe> Node::take_rn(Session& s, std::size_t n) {
    ensure_pool(s, n);
    std::vector<Fe> out(s.pool.rn.begin() + static_cast<long>(s.pool.cursor),
                        s.pool.rn.begin() + static_cast<long>(s.pool.cursor + n));
    s.pool.cursor += n;
    return out;
}

std::pair<std::vector<Fe>, std::vector<Fe>> Node::take_rn_m0(Session& s, std::size_t n) {
    ensure_pool(s, n);
    std::vector<Fe> rn(s.pool.rn.begin() + static_cast<long>(s.pool.cursor),
                       s.pool.rn.begin() + static_cast<long>(s.pool.cursor + n));
    std::vector<Fe> m0(s.pool.m0.begin() + static_cast<long>(s.pool.cursor),
                       s.pool.m0.begin() + static_cast<long>(s.pool.cursor + n));
    s.pool.cursor += n;
    return {std::move(rn), std::move(m0)};
}

void Node::record_test1(Fe local, Fe open) {
    std::lock_guard lk(trace_mu_);
    trace_.test1_local = local;
    trace_.test1_open = open;
    trace_.test1_set = true;
}

std::vector<Fe> Node::constant_onehot(std::size_t len, std::size_t index) {
    std::vector<Fe> v(len, 0);
    v[index] = 1;
    return v;
}

void Node::serve_client(const LinkPtr& link) {
    auto session = std::make_unique<Session>();
    bool have_session = false;
    while (!stopped_.load()) {
        auto frame = link->recv(std::chrono::milliseconds(200));
        if (!frame) {
            if (stopped_.load()) return;
            continue;
        }
        dispatch_client_frame(link, *frame, session, have_session);
    }
}

void Node::serve_client_with(const LinkPtr& link, const Frame& first) {
    auto session = std::make_unique<Session>();
    bool have_session = false;
    dispatch_client_frame(link, first, session, have_session);
    while (!stopped_.load()) {
        auto frame = link->recv(std::chrono::milliseconds(200));
        if (!frame) {
            if (stopped_.load()) return;
            continue;
        }
        dispatch_client_frame(link, *frame, session, have_session);
    }
}

void Node::dispatch_client_frame(const LinkPtr& link, const Frame& frame,
                                 std::unique_ptr<Session>& session,
                                 bool& have_session) {
    if (!have_session || frame.session != session->id) {
        session = std::make_unique<Session>();
        session->id = frame.session;
        have_session = true;
    }
    try {
        link->send(handle(*session, frame));
    } catch (const AbortError& e) {
        PayloadWriter w;
        w.u16(static_cast<std::uint16_t>(e.reason));
        link->send(make_frame(MsgType::kAbort, session->id, w.take()));
        session->phase = -1; // session dead
    } catch (const ProtocolError&) {
        PayloadWriter w;
        w.u16(static_cast<std::uint16_t>(AbortReason::kProtocol));
        link->send(make_frame(MsgType::kAbort, session->id, w.take()));
        session->phase = -1;
    } catch (const std::exception&) {
        if (stopped_.load()) return; // shutdown race
        PayloadWriter w;
        w.u16(static_cast<std::uint16_t>(AbortReason::kProtocol));
        link->send(make_frame(MsgType::kAbort, session->id, w.take()));
        session->phase = -1;
    }
}

Frame Node::handle(Session& s, const Frame& in) {
    if (s.phase < 0) throw AbortError(AbortReason::kProtocol);
    switch (in.type) {
        case MsgType::kHello: return on_hello(s, in);
        case MsgType::kP1Query: return on_p1_query(s, in);
        case MsgType::kP2Vector: return on_p2_vector(s, in);
        case MsgType::kOptinvVectors: return on_optinv_vectors(s, in);
        case MsgType::kP3Vector: return on_p3_vector(s, in);
        case MsgType::kP3Kpv: return on_p3_kpv(s, in);
        case MsgType::kUpdate: return on_update(s, in);
        default: throw AbortError(AbortReason::kProtocol);
    }
}

Frame Node::on_hello(Session& s, const Frame& in) {
    (void)in;
    std::shared_lock lk(bundle_mu_);
    s.batch_size = pool_budget();
    // Randomness is provisioned before query execution starts.
    ensure_pool(s, 1);
    return make_frame(MsgType::kHello, s.id, encode_params(bundle_.params));
}

Frame Node::on_p1_query(Session& s, const Frame& in) {
    PayloadReader r(in.payload);
    const std::string client_id = r.str();
    const Fe uw = r.fe();
    r.require_end();

    std::shared_lock lk(bundle_mu_);
    const Field f(bundle_.params.p);
    s.client_id = client_id;
    s.client_row = client_row_of(client_id);
    if (s.batch_size == 0) s.batch_size = pool_budget();

    const std::size_t width = bundle_.ac.cols;
    auto [rn, m0] = take_rn_m0(s, width);
    std::vector<Fe> ans(width);
    kernels::scan_columns(f, bundle_.ac.row(0), uw, bundle_.ac.row(2 + s.client_row),
                          rn, m0, ans);
    if (cfg_.tamper && cfg_.tamper->phase == 1 && cfg_.tamper->index < ans.size())
        ans[cfg_.tamper->index] = f.add(ans[cfg_.tamper->index], cfg_.tamper->delta);
    s.phase = 1;
    PayloadWriter w;
    w.fe_vector(ans);
    return make_frame(MsgType::kP1Ans, s.id, w.take());
}

void Node::run_tests_ab(Session& s, std::span<const Fe> v) {
    const Field f(bundle_.params.p);
    const Fe a_local = kernels::sum(f, v);
    const Fe a_open = exchange_and_open(f, peers_, s.id, kTagStep * 1 + next_tag(s),
                                        a_local, 1);
    if (a_open != 1) throw AbortError(AbortReason::kMalformedVectorA);
    const Fe b_local = kernels::sum_squares(f, v);
    const Fe b_open = exchange_and_open(f, peers_, s.id, kTagStep * 1 + next_tag(s),
                                        b_local, 2);
    if (b_open != 1) throw AbortError(AbortReason::kMalformedVectorB);
}

bool Node::test1_access(Session& s, std::span<const Fe> v) {
    const Field f(bundle_.params.p);
    // v indexes the beta+1 index rows, which line up with the first beta+1
    // AC-matrix columns (real keywords then the fake-allowed column).
    auto cap = bundle_.ac.row(2 + s.client_row);
    const Fe local = kernels::dot(f, cap.subspan(0, v.size()), v);
    Fe opened;
    if (cfg_.plain_test1) {
        opened = exchange_and_open(f, peers_, s.id, kTagStep * 2 + next_tag(s), local, 2);
    } else {
        // Degree-reduce the dot product, then blind it with one fresh random
        // multiplier so a failing open reveals nothing about the cell value.
        auto mask = take_rn(s, 2);
        auto reduced = reduce_degree(f, peers_, s.id, kTagStep * 2 + next_tag(s),
                                     {&local, 1}, {mask.data(), 1}, s.prng);
        const Fe blinded = f.mul(reduced[0], mask[1]);
        opened = exchange_and_open(f, peers_, s.id, kTagStep * 2 + next_tag(s),
                                   blinded, 2);
    }
    record_test1(local, opened);
    return opened == 0;
}

Frame Node::on_p2_vector(Session& s, const Frame& in) {
    PayloadReader r(in.payload);
    std::vector<Fe> v = r.fe_vector();
    r.require_end();

    std::shared_lock lk(bundle_mu_);
    const auto& p = bundle_.params;
    const Field f(p.p);
    const std::size_t nrows = p.layout == IndexLayout::kPadded ? bundle_.inv.rows
                                                               : bundle_.addr.rows;
    if (s.phase < 1 || v.size() != nrows) throw AbortError(AbortReason::kProtocol);

    run_tests_ab(s, v);
    if (!test1_access(s, v)) {
        if (!cfg_.fake_continue) throw AbortError(AbortReason::kAccessDenied);
        // Serve the fake keyword's row instead; every server opened the same
        // failed test, so they all make the same substitution.
        v = constant_onehot(nrows, nrows - 1);
    }

    if (p.layout == IndexLayout::kPadded) {
        const std::size_t cols = bundle_.inv.cols;
        std::vector<Fe> out(cols);
        kernels::matvec_columns(f, bundle_.inv.cells, nrows, cols, v, out);
        s.claimable.assign(out.begin(), out.begin() + static_cast<long>(cols - 2));
        if (cfg_.tamper && cfg_.tamper->phase == 2 && cfg_.tamper->index < out.size())
            out[cfg_.tamper->index] = f.add(out[cfg_.tamper->index], cfg_.tamper->delta);
        s.phase = 2;
        PayloadWriter w;
        w.fe_vector(out);
        return make_frame(MsgType::kP2Ans, s.id, w.take());
    }

    std::vector<Fe> out(3);
    kernels::matvec_columns(f, bundle_.addr.cells, nrows, 3, v, out);
    s.hdv_share = kernels::dot(f, bundle_.addr_hdv, v);
    s.have_hdv = true;
    if (cfg_.tamper && cfg_.tamper->phase == 2 && cfg_.tamper->index < out.size())
        out[cfg_.tamper->index] = f.add(out[cfg_.tamper->index], cfg_.tamper->delta);
    s.phase = 2;
    PayloadWriter w;
    w.fe_vector(out);
    return make_frame(MsgType::kAddrAns, s.id, w.take());
}

Frame Node::on_optinv_vectors(Session& s, const Frame& in) {
    PayloadReader r(in.payload);
    const std::uint32_t pairs = r.u32();
    std::vector<std::vector<Fe>> row_vecs(pairs), pos_vecs(pairs);
    for (std::uint32_t k = 0; k < pairs; k++) {
        row_vecs[k] = r.fe_vector();
        pos_vecs[k] = r.fe_vector();
    }
    r.require_end();

    std::shared_lock lk(bundle_mu_);
    const auto& p = bundle_.params;
    const Field f(p.p);
    if (p.layout != IndexLayout::kOptimized || s.phase < 2 || !s.have_hdv ||
        pairs == 0 || pairs > 2)
        throw AbortError(AbortReason::kProtocol);
    for (std::uint32_t k = 0; k < pairs; k++)
        if (row_vecs[k].size() != p.x || pos_vecs[k].size() != p.y)
            throw AbortError(AbortReason::kProtocol);

    // Address verification: the selected positions' digest sum must equal the
    // held-back HdV of the row fetched in the previous step.
    Fe val = 0;
    for (std::uint32_t k = 0; k < pairs; k++) {
        for (std::size_t j = 0; j < p.y; j++) {
            Fe hrow = 0;
            for (std::size_t i = 0; i < p.x; i++) {
                const Fe h = hash_values(f, {static_cast<Fe>(i * p.y + j + 1)});
                hrow = f.add(hrow, f.mul(h, row_vecs[k][i]));
            }
            const Fe comp = f.sub(1, pos_vecs[k][j]);
            val = f.add(val, f.mul(hrow, comp));
        }
    }
    const Fe op_local = f.sub(val, s.hdv_share);
    const Fe op = exchange_and_open(f, peers_, s.id, kTagStep * 3 + next_tag(s),
                                    op_local, 2);
    if (op != 0) throw AbortError(AbortReason::kOptinvVerifyFailed);

    std::vector<Fe> out;
    out.reserve(pairs * p.y);
    for (std::uint32_t k = 0; k < pairs; k++) {
        std::vector<Fe> fids(p.y);
        kernels::matvec_columns(f, bundle_.optinv, p.x, p.y, row_vecs[k], fids);
        auto rn = take_rn(s, p.y);
        std::vector<Fe> masked(p.y);
        kernels::mask_add(f, fids, rn, pos_vecs[k], masked);
        out.insert(out.end(), masked.begin(), masked.end());
    }
    s.claimable = out;
    s.phase = 2;
    PayloadWriter w;
    w.fe_vector(out);
    return make_frame(MsgType::kOptinvAns, s.id, w.take());
}

Frame Node::on_p3_vector(Session& s, const Frame& in) {
    PayloadReader r(in.payload);
    const std::uint32_t claimed = r.u32();
    const auto members = r.u32_vector();
    std::vector<Fe> v = r.fe_vector();
    r.require_end();

    std::shared_lock lk(bundle_mu_);
    const auto& p = bundle_.params;
    const Field f(p.p);
    const std::size_t nfiles = p.delta + 1;
    if (s.phase < 2 || s.awaiting_kpv) throw AbortError(AbortReason::kProtocol);
    if (members.empty()) {
        if (v.size() != nfiles) throw AbortError(AbortReason::kProtocol);
    } else {
        if (v.size() != members.size()) throw AbortError(AbortReason::kProtocol);
        for (auto m : members)
            if (m >= nfiles) throw AbortError(AbortReason::kProtocol);
    }

    run_tests_ab(s, v);

    // Test 2: the selected file-id must be one the servers themselves
    // returned in the previous phase (or the dummy file).
    Fe sel;
    if (members.empty()) {
        sel = kernels::dot(f, bundle_.file_ids, v);
    } else {
        sel = 0;
        for (std::size_t i = 0; i < members.size(); i++)
            sel = f.add(sel, f.mul(bundle_.file_ids[members[i]], v[i]));
    }
    Fe claimed_share = 0; // dummy claim: the dummy id is the constant 0
    if (claimed != 0xFFFFFFFFu) {
        if (claimed >= s.claimable.size()) throw AbortError(AbortReason::kProtocol);
        claimed_share = s.claimable[claimed];
    }
    const Fe t2_local = f.sub(sel, claimed_share);
    const Fe t2 = exchange_and_open(f, peers_, s.id, kTagStep * 4 + next_tag(s),
                                    t2_local, 2);
    if (t2 != 0) throw AbortError(AbortReason::kTest2Failed);

    s.p3_vector = v;
    s.p3_members.assign(members.begin(), members.end());

    if (!p.full_ap) {
        // Test 3 over the reduced AP rows: positions go to the client, the
        // digest share stays here for Test 4.
        std::vector<Fe> out(p.gamma_ap + 1);
        if (members.empty())
            kernels::matvec_columns(f, bundle_.ap.cells, nfiles, p.gamma_ap + 1, v, out);
        else
            kernels::matvec_columns_rows(f, bundle_.ap.cells, p.gamma_ap + 1, members,
                                         v, out);
        s.hap_share = out[p.gamma_ap];
        out.pop_back();
        s.awaiting_kpv = true;
        PayloadWriter w;
        w.fe_vector(out);
        return make_frame(MsgType::kP3Positions, s.id, w.take());
    }

    // Full AP rows: derive the keyword-position bits here via degree
    // reduction instead of a client round-trip, then return the file.
    std::vector<Fe> bits(p.beta + 1);
    if (members.empty())
        kernels::matvec_columns(f, bundle_.ap_full.cells, nfiles, p.beta + 1, v, bits);
    else
        kernels::matvec_columns_rows(f, bundle_.ap_full.cells, p.beta + 1, members, v,
                                     bits);
    s.hap_share = bits[p.beta];
    bits.pop_back();
    auto masks = take_rn(s, p.beta);
    auto kpv = reduce_degree(f, peers_, s.id, kTagStep * 5 + next_tag(s), bits, masks,
                             s.prng);
    auto out = return_file(s, kpv);
    PayloadWriter w;
    w.fe_vector(out);
    return make_frame(MsgType::kP3File, s.id, w.take());
}

Frame Node::on_p3_kpv(Session& s, const Frame& in) {
    PayloadReader r(in.payload);
    std::vector<Fe> kpv = r.fe_vector();
    r.require_end();

    std::shared_lock lk(bundle_mu_);
    const auto& p = bundle_.params;
    if (!s.awaiting_kpv || p.full_ap || kpv.size() != p.beta)
        throw AbortError(AbortReason::kProtocol);
    auto out = return_file(s, kpv);
    s.awaiting_kpv = false;
    PayloadWriter w;
    w.fe_vector(out);
    return make_frame(MsgType::kP3File, s.id, w.take());
}

std::vector<Fe> Node::return_file(Session& s, std::span<const Fe> kpv) {
    const auto& p = bundle_.params;
    const Field f(p.p);

    // Test C: every kpv element must be a bit.
    std::vector<Fe> c_local(kpv.size());
    kernels::square_minus_self(f, kpv, c_local);
    auto c_open = exchange_and_open_vec(f, peers_, s.id, kTagStep * 6 + next_tag(s),
                                        c_local, 2);
    for (Fe v : c_open)
        if (v != 0) throw AbortError(AbortReason::kMalformedVectorC);

    // Test 4: selected position digests must sum to the held-back AP digest.
    auto pos_digests = bundle_.ac.row(1);
    const Fe t4_local =
        f.sub(kernels::dot(f, pos_digests.subspan(0, kpv.size()), kpv), s.hap_share);
    const Fe t4 = exchange_and_open(f, peers_, s.id, kTagStep * 6 + next_tag(s),
                                    t4_local, 2);
    if (t4 != 0) throw AbortError(AbortReason::kTest4Failed);

    // Test 5: access check across every keyword present in the file. The
    // output stays shared; it blinds the content unless it is zero.
    auto cap = bundle_.ac.row(2 + s.client_row);
    const Fe t5_local = kernels::dot(f, cap.subspan(0, kpv.size()), kpv);
    auto t5_mask = take_rn(s, 1);
    auto t5_reduced = reduce_degree(f, peers_, s.id, kTagStep * 6 + next_tag(s),
                                    {&t5_local, 1}, {t5_mask.data(), 1}, s.prng);

    const std::size_t nfiles = p.delta + 1;
    std::vector<Fe> out(p.eta + 1);
    if (s.p3_members.empty())
        kernels::matvec_columns(f, bundle_.content.cells, nfiles, p.eta + 1,
                                s.p3_vector, out);
    else
        kernels::matvec_columns_rows(f, bundle_.content.cells, p.eta + 1, s.p3_members,
                                     s.p3_vector, out);
    auto rn = take_rn(s, p.eta + 1);
    kernels::scale_mask_add(f, out, t5_reduced[0], rn);
    if (cfg_.tamper && cfg_.tamper->phase == 3 && cfg_.tamper->index < out.size())
        out[cfg_.tamper->index] = f.add(out[cfg_.tamper->index], cfg_.tamper->delta);
    return out;
}

Frame Node::on_update(Session& s, const Frame& in) {
    UpdateMessage u = decode_update(in.payload);
    {
        std::lock_guard lk(updates_mu_);
        if (!applied_updates_.insert(u.id).second) {
            PayloadWriter w;
            w.u8(1); // duplicate, already applied
            return make_frame(MsgType::kUpdate, s.id, w.take());
        }
    }
    std::unique_lock lk(bundle_mu_);
    const Field f(bundle_.params.p);
    apply_update(f, bundle_, u);
    PayloadWriter w;
    w.u8(0);
    return make_frame(MsgType::kUpdate, s.id, w.take());
}

} // namespace docstar
