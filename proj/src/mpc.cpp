#include "docstar/mpc.hpp"

#include <algorithm>

namespace docstar {

void Mailbox::deliver(int from, const Frame& frame) {
    if (frame.payload.size() < 4) return; // peer frames always carry a tag
    std::uint32_t tag = 0;
    for (int i = 0; i < 4; i++) tag = (tag << 8) | frame.payload[static_cast<std::size_t>(i)];
    std::vector<std::uint8_t> body(frame.payload.begin() + 4, frame.payload.end());
    {
        std::lock_guard lk(mu_);
        slots_[Key{from, frame.type, frame.session, tag}].push_back(std::move(body));
    }
    cv_.notify_all();
}

std::vector<std::uint8_t> Mailbox::take(int from, MsgType type,
                                        const SessionId& session, std::uint32_t tag,
                                        std::chrono::milliseconds timeout) {
    const Key key{from, type, session, tag};
    std::unique_lock lk(mu_);
    if (!cv_.wait_for(lk, timeout, [&] {
            if (down_) return true;
            auto it = slots_.find(key);
            return it != slots_.end() && !it->second.empty();
        }))
        throw PeerTimeout("no frame from peer " + std::to_string(from));
    if (down_) throw PeerTimeout("mailbox shut down");
    auto it = slots_.find(key);
    auto body = std::move(it->second.front());
    it->second.pop_front();
    if (it->second.empty()) slots_.erase(it);
    return body;
}

void Mailbox::shutdown() {
    {
        std::lock_guard lk(mu_);
        down_ = true;
    }
    cv_.notify_all();
}

void PeerGroup::send(int to, MsgType type, const SessionId& session,
                     std::uint32_t tag, std::span<const std::uint8_t> body) const {
    Frame f;
    f.type = type;
    f.session = session;
    f.payload.reserve(4 + body.size());
    for (int i = 3; i >= 0; i--)
        f.payload.push_back(static_cast<std::uint8_t>(tag >> (8 * i)));
    f.payload.insert(f.payload.end(), body.begin(), body.end());
    links[static_cast<std::size_t>(to)]->send(f);
}

void PeerGroup::broadcast(MsgType type, const SessionId& session, std::uint32_t tag,
                          std::span<const std::uint8_t> body) const {
    for (int z : others()) send(z, type, session, tag, body);
}

std::vector<std::uint8_t> PeerGroup::recv_from(int from, MsgType type,
                                               const SessionId& session,
                                               std::uint32_t tag) const {
    try {
        return mailbox->take(from, type, session, tag, timeout);
    } catch (const PeerTimeout&) {
        throw AbortError(AbortReason::kPeerTimeout);
    }
}

namespace {

constexpr int kContributors = 3;

std::vector<std::uint8_t> fe_body(std::span<const Fe> v) {
    PayloadWriter w;
    w.fe_vector(v);
    return w.take();
}

std::vector<Fe> fe_from_body(std::span<const std::uint8_t> body) {
    PayloadReader r(body);
    auto v = r.fe_vector();
    r.require_end();
    return v;
}

} // namespace

RnPool rn_generate(const Field& f, PeerGroup& group, const SessionId& session,
                   std::uint32_t batch, std::size_t count, Prng& prng,
                   const RnOptions& opts) {
    RnPool pool;
    const std::size_t total = 2 * count;

    if (opts.fixture) {
        // Local, deterministic, message-free: every server evaluates the same
        // pinned polynomials at its own point.
        pool.rn.resize(count);
        pool.m0src.resize(count);
        pool.m0.resize(count);
        const auto& polys = opts.fixture->polys;
        for (std::size_t i = 0; i < count; i++) {
            const auto& [coeff, secret] = polys[i % polys.size()];
            pool.rn[i] = f.add(f.mul(coeff, static_cast<Fe>(group.self)), secret);
            const auto& [c2, s2] = polys[(i + count) % polys.size()];
            pool.m0src[i] = f.add(f.mul(c2, static_cast<Fe>(group.self)), s2);
            pool.m0[i] = opts.fixture->zero_m0
                             ? 0
                             : f.mul(pool.m0src[i], static_cast<Fe>(group.self));
        }
        return pool;
    }

    std::vector<Fe> aggregate(total, 0);
    if (group.self <= kContributors) {
        // Contribute: fresh nonzero secret and coefficient per slot, shares
        // evaluated at x = 1..4.
        std::vector<std::vector<Fe>> per_server(5, std::vector<Fe>(total, 0));
        for (std::size_t i = 0; i < total; i++) {
            const Fe secret = f.random_nonzero(prng);
            const Fe coeff = f.random_nonzero(prng);
            for (int z = 1; z <= 4; z++) {
                Fe share = f.add(f.mul(coeff, static_cast<Fe>(z)), secret);
                if (opts.tamper) share = opts.tamper(i, z, share);
                per_server[static_cast<std::size_t>(z)][i] = share;
            }
        }
        for (int z : group.others())
            group.send(z, MsgType::kRnContrib, session, batch,
                       fe_body(per_server[static_cast<std::size_t>(z)]));
        for (std::size_t i = 0; i < total; i++)
            aggregate[i] = per_server[static_cast<std::size_t>(group.self)][i];
    }
    for (int z = 1; z <= kContributors; z++) {
        if (z == group.self) continue;
        auto body = group.recv_from(z, MsgType::kRnContrib, session, batch);
        auto contrib = fe_from_body(body);
        if (contrib.size() != total) throw AbortError(AbortReason::kProtocol);
        for (std::size_t i = 0; i < total; i++)
            aggregate[i] = f.add(aggregate[i], contrib[i]);
    }

    pool.rn.assign(aggregate.begin(), aggregate.begin() + static_cast<long>(count));
    pool.m0src.assign(aggregate.begin() + static_cast<long>(count), aggregate.end());
    pool.m0.resize(count);
    for (std::size_t i = 0; i < count; i++)
        pool.m0[i] = f.mul(pool.m0src[i], static_cast<Fe>(group.self));
    return pool;
}

void rn_verify(const Field& f, PeerGroup& group, const SessionId& session,
               std::uint32_t batch, const RnPool& pool) {
    // Seed-derived multipliers, agreed from the session handshake transcript.
    std::vector<std::uint8_t> seed(session.begin(), session.end());
    seed.push_back(static_cast<std::uint8_t>(batch >> 24));
    seed.push_back(static_cast<std::uint8_t>(batch >> 16));
    seed.push_back(static_cast<std::uint8_t>(batch >> 8));
    seed.push_back(static_cast<std::uint8_t>(batch));
    seed.push_back('r');
    Prng prg(seed);

    Fe a_local = 0;
    for (Fe share : pool.rn)
        a_local = f.add(a_local, f.mul(f.random_element(prg), share));
    for (Fe share : pool.m0src)
        a_local = f.add(a_local, f.mul(f.random_element(prg), share));

    const std::uint32_t tag = 0x52000000u | batch;
    group.broadcast(MsgType::kRnCheck, session, tag, fe_body({&a_local, 1}));

    std::array<Fe, 5> a{};
    a[static_cast<std::size_t>(group.self)] = a_local;
    for (int z : group.others()) {
        auto v = fe_from_body(group.recv_from(z, MsgType::kRnCheck, session, tag));
        if (v.size() != 1) throw AbortError(AbortReason::kProtocol);
        a[static_cast<std::size_t>(z)] = v[0];
    }

    // Honest folds lie on one degree-1 polynomial; check collinearity, which
    // is equivalent to every pairwise interpolation at zero agreeing.
    const Fe slope = f.mul(f.sub(a[2], a[1]), f.inv(f.sub(2, 1)));
    for (int z = 3; z <= 4; z++) {
        const Fe expect = f.add(a[1], f.mul(slope, f.sub(static_cast<Fe>(z), 1)));
        if (a[static_cast<std::size_t>(z)] != expect)
            throw AbortError(AbortReason::kTamperedRandomness);
    }
}

namespace {

Fe open_all_subsets(const Field& f, const std::array<Fe, 5>& shares, int degree) {
    if (degree == 0) {
        // Constant sharing: every share is the value itself.
        for (int z = 2; z <= 4; z++)
            if (shares[static_cast<std::size_t>(z)] != shares[1])
                throw AbortError(AbortReason::kMaliciousServerDetected);
        return shares[1];
    }
    const int need = degree + 1;
    std::array<int, 4> idx{1, 2, 3, 4};
    std::optional<Fe> value;
    // Enumerate every (degree+1)-subset of the four points.
    std::vector<int> pick(static_cast<std::size_t>(need));
    std::function<void(int, int)> rec = [&](int start, int chosen) {
        if (chosen == need) {
            std::vector<SharePoint> pts;
            for (int i = 0; i < need; i++)
                pts.push_back({static_cast<std::uint32_t>(pick[static_cast<std::size_t>(i)]),
                               shares[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])]});
            Fe v = interpolate_at_zero(f, pts);
            if (!value)
                value = v;
            else if (*value != v)
                throw AbortError(AbortReason::kMaliciousServerDetected);
            return;
        }
        for (int i = start; i < 4; i++) {
            pick[static_cast<std::size_t>(chosen)] = idx[static_cast<std::size_t>(i)];
            rec(i + 1, chosen + 1);
        }
    };
    rec(0, 0);
    return *value;
}

} // namespace

Fe exchange_and_open(const Field& f, PeerGroup& group, const SessionId& session,
                     std::uint32_t tag, Fe local_share, int degree) {
    return exchange_and_open_vec(f, group, session, tag, {&local_share, 1}, degree)[0];
}

std::vector<Fe> exchange_and_open_vec(const Field& f, PeerGroup& group,
                                      const SessionId& session, std::uint32_t tag,
                                      std::span<const Fe> local_shares, int degree) {
    group.broadcast(MsgType::kTestShare, session, tag, fe_body(local_shares));
    std::array<std::vector<Fe>, 5> all{};
    all[static_cast<std::size_t>(group.self)].assign(local_shares.begin(),
                                                     local_shares.end());
    for (int z : group.others()) {
        all[static_cast<std::size_t>(z)] =
            fe_from_body(group.recv_from(z, MsgType::kTestShare, session, tag));
        if (all[static_cast<std::size_t>(z)].size() != local_shares.size())
            throw AbortError(AbortReason::kProtocol);
    }
    std::vector<Fe> opened(local_shares.size());
    for (std::size_t i = 0; i < local_shares.size(); i++) {
        std::array<Fe, 5> shares{};
        for (int z = 1; z <= 4; z++)
            shares[static_cast<std::size_t>(z)] = all[static_cast<std::size_t>(z)][i];
        opened[i] = open_all_subsets(f, shares, degree);
    }
    return opened;
}

std::vector<Fe> reduce_degree(const Field& f, PeerGroup& group,
                              const SessionId& session, std::uint32_t tag,
                              std::span<const Fe> deg2_shares,
                              std::span<const Fe> mask_rn, Prng& prng) {
    const std::size_t n = deg2_shares.size();
    std::vector<Fe> masked(n);
    for (std::size_t i = 0; i < n; i++) masked[i] = f.add(deg2_shares[i], mask_rn[i]);

    std::vector<Fe> reshare(n);
    if (group.self == 1) {
        // Open the masked values here only, then hand out fresh degree-1
        // shares of each.
        std::array<std::vector<Fe>, 4> from{};
        from[1] = masked;
        for (int z : {2, 3}) {
            from[static_cast<std::size_t>(z)] =
                fe_from_body(group.recv_from(z, MsgType::kDegredMasked, session, tag));
            if (from[static_cast<std::size_t>(z)].size() != n)
                throw AbortError(AbortReason::kProtocol);
        }
        std::vector<std::vector<Fe>> out(5, std::vector<Fe>(n));
        for (std::size_t i = 0; i < n; i++) {
            std::vector<SharePoint> pts{{1, from[1][i]}, {2, from[2][i]}, {3, from[3][i]}};
            const Fe opened = interpolate_at_zero(f, pts);
            ShareSet s = share_secret(f, opened, 1, kServerEvalPoints, prng);
            for (int z = 1; z <= 4; z++)
                out[static_cast<std::size_t>(z)][i] =
                    s.points[static_cast<std::size_t>(z - 1)].y;
        }
        for (int z : group.others())
            group.send(z, MsgType::kDegredReshare, session, tag,
                       fe_body(out[static_cast<std::size_t>(z)]));
        reshare = out[1];
    } else {
        if (group.self == 2 || group.self == 3)
            group.send(1, MsgType::kDegredMasked, session, tag, fe_body(masked));
        reshare = fe_from_body(group.recv_from(1, MsgType::kDegredReshare, session, tag));
        if (reshare.size() != n) throw AbortError(AbortReason::kProtocol);
    }

    std::vector<Fe> out(n);
    for (std::size_t i = 0; i < n; i++) out[i] = f.sub(reshare[i], mask_rn[i]);
    return out;
}

} // namespace docstar
