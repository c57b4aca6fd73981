#include "docstar/client.hpp"

#include <algorithm>
#include <map>

namespace docstar {

namespace {

constexpr auto kRecvTimeout = std::chrono::milliseconds(30000);

std::vector<SharePoint> points_of(const std::array<std::vector<Fe>, 4>& shares,
                                  std::span<const int> servers, std::size_t col) {
    std::vector<SharePoint> pts;
    for (int z : servers)
        pts.push_back({static_cast<std::uint32_t>(z),
                       shares[static_cast<std::size_t>(z - 1)][col]});
    return pts;
}

} // namespace

SessionId Client::new_session(Prng& prng) {
    SessionId id{};
    prng.fill(id);
    return id;
}

void Client::send_all(const Frame& frame, int phase, Transcript& t) {
    for (auto& link : links_) link->send(frame);
    if (phase >= 1 && phase <= 3) {
        // Count-prefixed field-element payloads: subtract framing, divide by 8.
        // Good enough because every client-bound message is one fe_vector plus
        // fixed-size scalars.
        t.phase_counts[static_cast<std::size_t>(phase)].elements_sent +=
            4 * (frame.payload.size() / 8);
    }
}

std::array<std::vector<Fe>, 4> Client::recv_vectors(const SessionId& session,
                                                    MsgType expect, int phase,
                                                    Transcript& t) {
    std::array<std::vector<Fe>, 4> out;
    for (std::size_t z = 0; z < 4; z++) {
        auto frame = links_[z]->recv(kRecvTimeout);
        if (!frame || frame->session != session)
            throw ProtocolError("missing reply from server " + std::to_string(z + 1));
        if (frame->type == MsgType::kAbort) {
            PayloadReader r(frame->payload);
            throw AbortSignal{static_cast<AbortReason>(r.u16())};
        }
        if (frame->type != expect) throw ProtocolError("unexpected reply type");
        PayloadReader r(frame->payload);
        out[z] = r.fe_vector();
        r.require_end();
        if (phase >= 1 && phase <= 3)
            t.phase_counts[static_cast<std::size_t>(phase)].elements_received +=
                out[z].size();
    }
    return out;
}

std::vector<Fe> Client::open_columns(const Field& f,
                                     const std::array<std::vector<Fe>, 4>& shares,
                                     bool verify, int phase) {
    const std::size_t n = shares[0].size();
    std::vector<Fe> out(n);
    static constexpr std::array<std::array<int, 3>, 4> kTriples{
        {{1, 2, 3}, {1, 2, 4}, {1, 3, 4}, {2, 3, 4}}};
    for (std::size_t c = 0; c < n; c++) {
        const auto base = points_of(shares, kTriples[0], c);
        const Fe v = interpolate_at_zero(f, base);
        if (verify) {
            for (std::size_t k = 1; k < kTriples.size(); k++) {
                const auto pts = points_of(shares, kTriples[k], c);
                if (interpolate_at_zero(f, pts) != v) throw MisbehaviorSignal{phase};
            }
        }
        out[c] = v;
    }
    return out;
}

std::array<std::vector<Fe>, 4> Client::share_vector(const Field& f,
                                                    std::span<const Fe> clear,
                                                    Prng& prng,
                                                    const QueryOptions& opts) const {
    std::array<std::vector<Fe>, 4> out;
    for (auto& v : out) v.resize(clear.size());
    std::span<const Fe> coeffs;
    if (opts.vec_coeffs) coeffs = *opts.vec_coeffs;
    for (std::size_t i = 0; i < clear.size(); i++) {
        ShareSet s = share_secret(f, clear[i], 1, kServerEvalPoints, prng, coeffs);
        for (std::size_t z = 0; z < 4; z++) out[z][i] = s.points[z].y;
    }
    return out;
}

std::vector<Fe> Client::build_onehot(std::size_t length, std::size_t index) {
    if (index >= length) throw BadAddress("one-hot index out of range");
    std::vector<Fe> v(length, 0);
    v[index] = 1;
    return v;
}

std::vector<OptinvFetchPair> Client::build_optinv_vectors(std::uint64_t sip,
                                                          std::uint64_t cut,
                                                          std::size_t x,
                                                          std::size_t y) {
    if (sip == 0 || cut == 0 || sip + cut - 1 > x * y)
        throw BadAddress("span outside the slot matrix");
    std::vector<OptinvFetchPair> pairs;
    std::uint64_t begin = sip;
    const std::uint64_t end = sip + cut - 1;
    while (begin <= end) {
        const std::size_t row = static_cast<std::size_t>((begin - 1) / y);
        const std::uint64_t row_end = static_cast<std::uint64_t>(row + 1) * y;
        const std::uint64_t stop = std::min(end, row_end);
        OptinvFetchPair pair;
        pair.row_vec.assign(x, 0);
        pair.row_vec[row] = 1;
        pair.pos_vec.assign(y, 1);
        for (std::uint64_t s = begin; s <= stop; s++)
            pair.pos_vec[static_cast<std::size_t>((s - 1) % y)] = 0;
        pairs.push_back(std::move(pair));
        begin = stop + 1;
    }
    if (pairs.size() > 2) throw BadAddress("span crosses more than two rows");
    return pairs;
}

std::vector<Fe> Client::build_kpv(std::span<const Fe> positions, std::size_t beta) {
    std::vector<Fe> kpv(beta, 0);
    for (Fe pos : positions) {
        if (pos == 0) continue; // padding sentinel
        if (pos > beta) throw BadAddress("keyword position out of range");
        kpv[static_cast<std::size_t>(pos - 1)] = 1;
    }
    return kpv;
}

std::vector<FetchBin> Client::plan_multi_fetch(std::span<const Fe> target_rows,
                                               std::size_t delta, std::size_t gamma,
                                               std::size_t bins, Prng& prng) {
    if (bins < target_rows.size())
        throw InsufficientBins("more targets than bins");
    (void)gamma;
    const std::size_t domain = delta + 1;
    const std::size_t size = std::min(domain, std::max<std::size_t>(2, domain / bins + 2));

    // Targets land in distinct random bins; every bin carries the dummy row.
    std::vector<std::size_t> bin_order(bins);
    for (std::size_t i = 0; i < bins; i++) bin_order[i] = i;
    for (std::size_t i = bins; i > 1; i--)
        std::swap(bin_order[i - 1], bin_order[prng.uniform_below(i)]);

    std::vector<FetchBin> out(bins);
    std::vector<std::optional<Fe>> assigned(bins);
    for (std::size_t t = 0; t < target_rows.size(); t++)
        assigned[bin_order[t]] = target_rows[t];

    for (std::size_t b = 0; b < bins; b++) {
        std::set<std::uint32_t> members{0}; // dummy row
        if (assigned[b]) members.insert(static_cast<std::uint32_t>(*assigned[b]));
        while (members.size() < size)
            members.insert(static_cast<std::uint32_t>(prng.uniform_below(domain)));
        std::vector<std::uint32_t> list(members.begin(), members.end());
        for (std::size_t i = list.size(); i > 1; i--)
            std::swap(list[i - 1], list[prng.uniform_below(i)]);
        const std::uint32_t want =
            assigned[b] ? static_cast<std::uint32_t>(*assigned[b]) : 0;
        out[b].members = list;
        out[b].select = static_cast<std::size_t>(
            std::find(list.begin(), list.end(), want) - list.begin());
    }
    return out;
}

BundleParams Client::fetch_params() {
    Prng prng;
    const SessionId session = new_session(prng);
    Frame hello;
    hello.type = MsgType::kHello;
    hello.session = session;
    for (auto& link : links_) link->send(hello);
    for (std::size_t z = 0; z < 4; z++) {
        auto frame = links_[z]->recv(kRecvTimeout);
        if (!frame || frame->type != MsgType::kHello)
            throw ProtocolError("no hello reply from server " + std::to_string(z + 1));
        params_ = decode_params(frame->payload);
    }
    have_params_ = true;
    return params_;
}

void Client::send_update(const UpdatePlan& plan) {
    Prng prng;
    const SessionId session = new_session(prng);
    const std::size_t count = plan[0].size();
    for (std::size_t m = 0; m < count; m++) {
        for (std::size_t z = 0; z < 4; z++) {
            Frame f;
            f.type = MsgType::kUpdate;
            f.session = session;
            f.payload = encode_update(plan[z][m]);
            links_[z]->send(f);
        }
        for (std::size_t z = 0; z < 4; z++) {
            auto frame = links_[z]->recv(kRecvTimeout);
            if (!frame) throw ProtocolError("no update ack");
            if (frame->type == MsgType::kAbort) {
                PayloadReader r(frame->payload);
                throw AbortError(static_cast<AbortReason>(r.u16()));
            }
            if (frame->type != MsgType::kUpdate)
                throw ProtocolError("unexpected update reply");
        }
    }
}

Client::RowFetch Client::fetch_row(const std::string& client_id,
                                   const std::string& keyword) {
    RowFetch out;
    Prng prng;
    Transcript scratch;
    try {
        const SessionId session = new_session(prng);
        Frame hello;
        hello.type = MsgType::kHello;
        hello.session = session;
        for (auto& link : links_) link->send(hello);
        for (std::size_t z = 0; z < 4; z++) {
            auto frame = links_[z]->recv(kRecvTimeout);
            if (!frame || frame->type != MsgType::kHello)
                throw ProtocolError("no hello reply");
            params_ = decode_params(frame->payload);
        }
        have_params_ = true;
        const Field f(params_.p);
        const Fe enc = encode_keyword(f, keyword, params_.keyword_groups).numeric;
        ShareSet uw = share_secret(f, enc, 1, kServerEvalPoints, prng);
        for (std::size_t z = 0; z < 4; z++) {
            PayloadWriter w;
            w.str(client_id);
            w.fe(uw.points[z].y);
            Frame q;
            q.type = MsgType::kP1Query;
            q.session = session;
            q.payload = w.take();
            links_[z]->send(q);
        }
        auto p1 = recv_vectors(session, MsgType::kP1Ans, 0, scratch);
        auto opened = open_columns(f, p1, false, 1);
        std::size_t row = static_cast<std::size_t>(-1);
        for (std::size_t c = 0; c <= params_.beta; c++)
            if (opened[c] == 0) {
                row = c;
                break;
            }
        if (row == static_cast<std::size_t>(-1)) return out;
        out.keyword_column = row;

        QueryOptions plain;
        auto v = build_onehot(params_.beta + 1, row);
        auto shares = share_vector(f, v, prng, plain);
        Frame q;
        q.type = MsgType::kP2Vector;
        q.session = session;
        for (std::size_t z = 0; z < 4; z++) {
            PayloadWriter w;
            w.fe_vector(shares[z]);
            q.payload = w.take();
            links_[z]->send(q);
        }
        if (params_.layout == IndexLayout::kPadded) {
            auto ans = recv_vectors(session, MsgType::kP2Ans, 0, scratch);
            auto opened_row = open_columns(f, ans, false, 2);
            out.id_slots.assign(opened_row.begin(),
                                opened_row.begin() + static_cast<long>(params_.gamma));
            out.marker = opened_row[params_.gamma];
            out.digest = opened_row[params_.gamma + 1];
        } else {
            auto ans = recv_vectors(session, MsgType::kAddrAns, 0, scratch);
            auto addr = open_columns(f, ans, false, 2);
            out.sip = addr[0];
            out.cut = addr[1];
            auto pairs = build_optinv_vectors(out.sip, out.cut, params_.x, params_.y);
            while (pairs.size() < 2) {
                OptinvFetchPair dummy;
                dummy.row_vec = build_onehot(params_.x, 0);
                dummy.pos_vec.assign(params_.y, 1);
                pairs.push_back(std::move(dummy));
            }
            Frame oq;
            oq.type = MsgType::kOptinvVectors;
            oq.session = session;
            std::vector<std::array<std::vector<Fe>, 4>> row_sh, pos_sh;
            for (const auto& pair : pairs) {
                row_sh.push_back(share_vector(f, pair.row_vec, prng, plain));
                pos_sh.push_back(share_vector(f, pair.pos_vec, prng, plain));
            }
            for (std::size_t z = 0; z < 4; z++) {
                PayloadWriter w;
                w.u32(static_cast<std::uint32_t>(pairs.size()));
                for (std::size_t k = 0; k < pairs.size(); k++) {
                    w.fe_vector(row_sh[k][z]);
                    w.fe_vector(pos_sh[k][z]);
                }
                oq.payload = w.take();
                links_[z]->send(oq);
            }
            auto slots_ans = recv_vectors(session, MsgType::kOptinvAns, 0, scratch);
            auto slots = open_columns(f, slots_ans, false, 2);
            std::uint64_t seen = 0;
            for (std::size_t k = 0; k < pairs.size() && seen < out.cut; k++)
                for (std::size_t j = 0; j < params_.y && seen < out.cut; j++) {
                    if (pairs[k].pos_vec[j] != 0) continue;
                    out.block.push_back(slots[k * params_.y + j]);
                    seen++;
                }
            out.digest = out.block.empty() ? 0 : out.block.back();
        }
        out.ok = true;
        return out;
    } catch (const AbortSignal&) {
        return out;
    } catch (const MisbehaviorSignal&) {
        return out;
    }
}

QueryOutcome Client::run_query(const std::string& client_id,
                               const std::string& keyword,
                               const QueryOptions& opts) {
    QueryOutcome outcome;
    Prng prng = opts.prng_seed ? Prng(opts.prng_seed) : Prng();
    try {
        const SessionId session = new_session(prng);
        Frame hello;
        hello.type = MsgType::kHello;
        hello.session = session;
        for (auto& link : links_) link->send(hello);
        for (std::size_t z = 0; z < 4; z++) {
            auto frame = links_[z]->recv(kRecvTimeout);
            if (!frame || frame->type != MsgType::kHello)
                throw ProtocolError("no hello reply");
            params_ = decode_params(frame->payload);
        }
        have_params_ = true;
        const Field f(params_.p);
        const std::size_t beta = params_.beta;

        // Phase 1: send the shared keyword, scan for the zero column. A word
        // that cannot encode under the deployment's group count cannot be in
        // the matrix either; query with a pad-band substitute so the
        // transcript keeps its shape and the answer comes back all-random.
        Fe enc;
        try {
            enc = encode_keyword(f, keyword, params_.keyword_groups).numeric;
        } catch (const EncodingOverflow&) {
            std::vector<std::uint8_t> label(keyword.begin(), keyword.end());
            Prng h(label);
            const Fe floor = band_floor_for_groups(params_.keyword_groups);
            enc = floor / 100 * 37 + h.uniform_below(floor / 100 * 63);
        }
        std::span<const Fe> uw_coeffs;
        if (opts.uw_coeffs) uw_coeffs = *opts.uw_coeffs;
        ShareSet uw = share_secret(f, enc, 1, kServerEvalPoints, prng, uw_coeffs);
        for (std::size_t z = 0; z < 4; z++) {
            PayloadWriter w;
            w.str(client_id);
            w.fe(uw.points[z].y);
            Frame q;
            q.type = MsgType::kP1Query;
            q.session = session;
            q.payload = w.take();
            links_[z]->send(q);
            outcome.transcript.phase_counts[1].elements_sent += 1;
        }
        auto p1 = recv_vectors(session, MsgType::kP1Ans, 1, outcome.transcript);
        outcome.transcript.p1_answers = p1;
        auto opened = open_columns(f, p1, opts.verify, 1);
        outcome.transcript.p1_opened = opened;

        std::size_t target_row = static_cast<std::size_t>(-1);
        for (std::size_t c = 0; c <= beta && target_row == static_cast<std::size_t>(-1);
             c++)
            if (opened[c] == 0) target_row = c;
        bool denied = false;
        if (target_row == static_cast<std::size_t>(-1)) {
            denied = true;
            if (!opts.fake_continue) {
                outcome.status = QueryStatus::kNoAccessOrAbsent;
                return outcome;
            }
            target_row = beta; // fake keyword row: keeps the transcript shape
        }
        outcome.keyword_column = denied ? static_cast<std::size_t>(-1) : target_row;
        const Fe row_enc = target_row == beta
                               ? fake_keyword_encoding(f, params_.keyword_groups,
                                                       kFakeAllowed)
                               : enc;

        // Phase 2: fetch the row of file-ids (padded) or its address entry
        // plus slot spans (optimized).
        auto v1 = build_onehot(beta + 1, target_row);
        auto v1_shares = share_vector(f, v1, prng, opts);
        {
            Frame q;
            q.type = MsgType::kP2Vector;
            q.session = session;
            for (std::size_t z = 0; z < 4; z++) {
                PayloadWriter w;
                w.fe_vector(v1_shares[z]);
                q.payload = w.take();
                links_[z]->send(q);
                outcome.transcript.phase_counts[2].elements_sent += v1.size();
            }
        }

        std::vector<Fe> fids;                  // real file ids (row indices)
        std::map<Fe, std::uint32_t> claim_of;  // fid -> claimable index
        if (params_.layout == IndexLayout::kPadded) {
            auto ans = recv_vectors(session, MsgType::kP2Ans, 2, outcome.transcript);
            auto row = open_columns(f, ans, opts.verify, 2);
            std::vector<Fe> real;
            for (std::size_t j = 0; j < params_.gamma; j++) {
                if (row[j] == 0) continue;
                real.push_back(row[j]);
                if (!claim_of.count(row[j]))
                    claim_of[row[j]] = static_cast<std::uint32_t>(j);
            }
            if (opts.verify &&
                hash_chain(f, real, row_enc) != row[params_.gamma + 1])
                throw MisbehaviorSignal{2};
            fids = std::move(real);
        } else {
            auto ans = recv_vectors(session, MsgType::kAddrAns, 2, outcome.transcript);
            auto addr = open_columns(f, ans, opts.verify, 2);
            const std::uint64_t sip = addr[0], cut = addr[1];
            if (hash_values(f, {sip, cut, row_enc}) != addr[2])
                throw MisbehaviorSignal{2};
            auto pairs = build_optinv_vectors(sip, cut, params_.x, params_.y);
            while (pairs.size() < 2) {
                // Dummy pair: contributes nothing to the digest equation and
                // keeps the message shape independent of the span.
                OptinvFetchPair dummy;
                dummy.row_vec = build_onehot(params_.x, 0);
                dummy.pos_vec.assign(params_.y, 1);
                pairs.push_back(std::move(dummy));
            }
            Frame q;
            q.type = MsgType::kOptinvVectors;
            q.session = session;
            std::vector<std::array<std::vector<Fe>, 4>> row_shares, pos_shares;
            for (const auto& pair : pairs) {
                row_shares.push_back(share_vector(f, pair.row_vec, prng, opts));
                pos_shares.push_back(share_vector(f, pair.pos_vec, prng, opts));
            }
            for (std::size_t z = 0; z < 4; z++) {
                PayloadWriter w;
                w.u32(static_cast<std::uint32_t>(pairs.size()));
                for (std::size_t k = 0; k < pairs.size(); k++) {
                    w.fe_vector(row_shares[k][z]);
                    w.fe_vector(pos_shares[k][z]);
                }
                q.payload = w.take();
                links_[z]->send(q);
                outcome.transcript.phase_counts[2].elements_sent +=
                    pairs.size() * (params_.x + params_.y);
            }
            auto slots_ans =
                recv_vectors(session, MsgType::kOptinvAns, 2, outcome.transcript);
            auto slots = open_columns(f, slots_ans, opts.verify, 2);
            // Unmasked offsets of pair 0 (and pair 1 when the span wraps) hold
            // ids then the chain digest.
            std::vector<Fe> real;
            Fe opened_digest = 0;
            std::uint64_t seen = 0;
            for (std::size_t k = 0; k < pairs.size() && seen < cut; k++) {
                for (std::size_t j = 0; j < params_.y && seen < cut; j++) {
                    if (pairs[k].pos_vec[j] != 0) continue;
                    const Fe value = slots[k * params_.y + j];
                    seen++;
                    if (seen == cut) {
                        opened_digest = value;
                    } else if (value != 0) {
                        real.push_back(value);
                        claim_of.emplace(value,
                                         static_cast<std::uint32_t>(k * params_.y + j));
                    }
                }
            }
            if (opts.verify && hash_chain(f, real, row_enc) != opened_digest)
                throw MisbehaviorSignal{2};
            fids = std::move(real);
        }

        // Phase 3: always gamma fetches; spares select the dummy file.
        std::vector<Fe> targets;
        for (Fe fid : fids) {
            if (fid <= params_.delta && targets.size() < params_.gamma)
                targets.push_back(fid);
        }
        std::vector<FetchBin> bins;
        if (opts.bins > 0)
            bins = plan_multi_fetch(targets, params_.delta,
                                    params_.gamma, std::max(opts.bins, params_.gamma),
                                    prng);

        for (std::size_t fetch = 0; fetch < params_.gamma; fetch++) {
            Fe fid;
            std::vector<std::uint32_t> members;
            std::vector<Fe> v;
            if (opts.bins > 0) {
                members = bins[fetch].members;
                v = build_onehot(members.size(), bins[fetch].select);
                fid = members[bins[fetch].select];
            } else {
                fid = fetch < targets.size() ? targets[fetch] : 0;
                v = build_onehot(params_.delta + 1, static_cast<std::size_t>(fid));
            }
            const bool is_real = fid != 0;
            const std::uint32_t claim =
                is_real ? claim_of.at(fid) : 0xFFFFFFFFu;
            auto v_shares = share_vector(f, v, prng, opts);
            Frame q;
            q.type = MsgType::kP3Vector;
            q.session = session;
            for (std::size_t z = 0; z < 4; z++) {
                PayloadWriter w;
                w.u32(claim);
                w.u32_vector(members);
                w.fe_vector(v_shares[z]);
                q.payload = w.take();
                links_[z]->send(q);
                outcome.transcript.phase_counts[3].elements_sent += v.size();
            }

            if (!params_.full_ap) {
                auto pos_ans =
                    recv_vectors(session, MsgType::kP3Positions, 3, outcome.transcript);
                auto positions = open_columns(f, pos_ans, opts.verify, 3);
                auto kpv = build_kpv(positions, beta);
                auto kpv_shares = share_vector(f, kpv, prng, opts);
                Frame kq;
                kq.type = MsgType::kP3Kpv;
                kq.session = session;
                for (std::size_t z = 0; z < 4; z++) {
                    PayloadWriter w;
                    w.fe_vector(kpv_shares[z]);
                    kq.payload = w.take();
                    links_[z]->send(kq);
                    outcome.transcript.phase_counts[3].elements_sent += kpv.size();
                }
            }
            auto file_ans = recv_vectors(session, MsgType::kP3File, 3, outcome.transcript);
            auto file = open_columns(f, file_ans, opts.verify, 3);
            if (!is_real) continue; // dummy fetch, discard

            FileResult result;
            result.file_id = fid;
            std::vector<Fe> words(file.begin(), file.end() - 1);
            const Fe digest = file.back();
            if (hash_chain(f, words, fid) == digest) {
                result.delivered = true;
                for (Fe wv : words) {
                    if (is_content_pad(f, wv, params_.content_groups)) continue;
                    auto text = decode_word(f, wv, params_.content_groups);
                    if (!text.empty()) result.words.push_back(std::move(text));
                }
            }
            outcome.files.push_back(std::move(result));
        }
        if (denied) outcome.status = QueryStatus::kNoAccessOrAbsent;
        return outcome;
    } catch (const AbortSignal& a) {
        outcome.status = QueryStatus::kAborted;
        outcome.abort_reason = a.reason;
        return outcome;
    } catch (const MisbehaviorSignal& m) {
        outcome.status = QueryStatus::kServerMisbehavior;
        outcome.transcript.misbehavior_phase = m.phase;
        return outcome;
    }
}

} // namespace docstar
