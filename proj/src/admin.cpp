#include "docstar/admin.hpp"

#include <algorithm>

namespace docstar {

namespace {

std::string fold(std::string_view w) {
    std::string out(w);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

} // namespace

AdminOps::AdminOps(Client& client, CleartextCorpus corpus,
                   std::vector<std::uint8_t> access_seed, int reserve_per_keyword)
    : client_(client),
      corpus_(std::move(corpus)),
      seed_(std::move(access_seed)),
      reserve_(reserve_per_keyword) {
    for (const auto& kw : corpus_.keywords)
        capacity_.push_back(postings_of(kw) + 1 +
                            static_cast<std::uint64_t>(reserve_));
}

std::size_t AdminOps::postings_of(const std::string& kw) const {
    std::size_t n = 0;
    for (const auto& file : corpus_.files) {
        for (const auto& w : file.words)
            if (fold(w) == fold(kw)) {
                n++;
                break;
            }
    }
    return n;
}

UpdateContext AdminOps::ctx() {
    return UpdateContext{Field(client_.params().p), seed_, 4, &prng_, 0};
}

std::size_t AdminOps::keyword_col(const std::string& kw) const {
    for (std::size_t k = 0; k < corpus_.keywords.size(); k++)
        if (fold(corpus_.keywords[k]) == fold(kw)) return k;
    throw ConfigError("keyword not outsourced: " + kw);
}

std::size_t AdminOps::client_row(const std::string& id) const {
    for (std::size_t a = 0; a < corpus_.clients.size(); a++)
        if (corpus_.clients[a].client_id == id) return a;
    throw ConfigError("unknown client: " + id);
}

void AdminOps::set_access(const std::string& client_id, const std::string& keyword,
                          bool grant) {
    // The deltas are additive, not idempotent: granting an already-granted
    // keyword would subtract the band value twice. The owner's record decides.
    const bool currently = corpus_.clients[client_row(client_id)]
                               .allowed_keywords.count(fold(keyword)) > 0;
    if (grant == currently) return;
    auto params = client_.fetch_params();
    auto c = ctx();
    client_.send_update(make_access_update(c, grant, keyword, client_id,
                                           client_row(client_id),
                                           keyword_col(keyword), params.beta,
                                           params.band_floor));
    auto& allowed = corpus_.clients[client_row(client_id)].allowed_keywords;
    if (grant)
        allowed.insert(fold(keyword));
    else
        allowed.erase(fold(keyword));
}

void AdminOps::grant(const std::string& client_id, const std::string& keyword) {
    set_access(client_id, keyword, true);
}

void AdminOps::revoke(const std::string& client_id, const std::string& keyword) {
    set_access(client_id, keyword, false);
}

Fe AdminOps::add_file(const std::vector<std::string>& words) {
    auto params = client_.fetch_params();
    auto c = ctx();
    const Fe fid = params.delta + 1;
    std::vector<std::size_t> cols;
    for (std::size_t k = 0; k < corpus_.keywords.size(); k++)
        for (const auto& w : words)
            if (fold(w) == fold(corpus_.keywords[k])) {
                cols.push_back(k);
                break;
            }
    client_.send_update(make_append_file(c, params, fid, words, cols));

    bool replaced = false;
    for (std::size_t col : cols) {
        if (replaced) break; // the rebuild below already indexed every keyword
        const auto& kw = corpus_.keywords[col];
        auto params2 = client_.fetch_params();
        auto fetched = client_.fetch_row(kOwnerClientId, kw);
        if (!fetched.ok) throw ProtocolError("owner fetch failed for " + kw);
        if (params2.layout == IndexLayout::kPadded) {
            std::optional<std::size_t> slot;
            if (fetched.marker <= params2.gamma)
                slot = static_cast<std::size_t>(fetched.marker - 1);
            client_.send_update(make_add_fid_padded(c, col, params2.beta,
                                                    params2.gamma, fid,
                                                    fetched.digest, slot));
            continue;
        }
        // The live block can absorb the id iff its fixed capacity still has a
        // reserve slot; otherwise the owner rebuilds the whole structure,
        // which indexes every keyword of the new file at once.
        if (fetched.cut + 1 <= capacity_[col]) {
            client_.send_update(make_add_fid_optinv(
                c, col, params2.beta, fetched.sip, fetched.cut, fid, fetched.digest,
                kw, params2.keyword_groups, params2.used_slots));
        } else {
            corpus_.files.push_back({fid, words});
            BuildOptions o;
            o.access_seed = seed_;
            o.min_gamma = params2.gamma;
            o.reserve_per_keyword = reserve_;
            auto rebuilt = build_structures(indexing_view(), IndexLayout::kOptimized, o);
            client_.send_update(make_replace_phase2(c, rebuilt));
            corpus_.files.pop_back();
            for (std::size_t k = 0; k < corpus_.keywords.size(); k++)
                capacity_[k] = rebuilt.addr_cut[k] +
                               static_cast<std::uint64_t>(reserve_);
            replaced = true;
        }
    }
    corpus_.files.push_back({fid, words});
    return fid;
}

CleartextCorpus AdminOps::indexing_view() const {
    CleartextCorpus view = corpus_;
    for (auto& file : view.files)
        file.words.erase(std::remove_if(file.words.begin(), file.words.end(),
                                        [&](const std::string& w) {
                                            return removed_postings_.count(
                                                {fold(w), file.file_id});
                                        }),
                         file.words.end());
    return view;
}

void AdminOps::add_keyword(const std::string& word,
                           const std::set<std::string>& allowed_clients) {
    auto params = client_.fetch_params();
    auto c = ctx();
    NewKeywordSpec spec;
    spec.word = fold(word);
    spec.allowed_clients = allowed_clients;
    spec.allowed_clients.insert(kOwnerClientId);
    spec.reserve = reserve_;
    std::vector<std::string> ids;
    for (const auto& cl : corpus_.clients) ids.push_back(cl.client_id);
    client_.send_update(make_add_keyword(c, params, ids, spec));
    corpus_.keywords.push_back(spec.word);
    capacity_.push_back(spec.fids.size() + 1 + static_cast<std::uint64_t>(reserve_));
    for (auto& cl : corpus_.clients)
        if (spec.allowed_clients.count(cl.client_id))
            cl.allowed_keywords.insert(spec.word);
    // Existing files are not retrofitted: their AP rows predate the keyword,
    // so the owner's record drops the word from them to stay faithful.
    for (auto& file : corpus_.files)
        file.words.erase(std::remove_if(file.words.begin(), file.words.end(),
                                        [&](const std::string& w) {
                                            return fold(w) == spec.word;
                                        }),
                         file.words.end());
}

void AdminOps::delete_keyword(const std::string& word, bool oblivious) {
    auto params = client_.fetch_params();
    auto c = ctx();
    std::vector<std::string> ids;
    std::vector<bool> allowed;
    for (const auto& cl : corpus_.clients) {
        ids.push_back(cl.client_id);
        // The owner's own cell stays untouched: later insertions still need
        // the oblivious row fetch, and a re-granted keyword must find the
        // index complete.
        allowed.push_back(cl.client_id != kOwnerClientId &&
                          cl.allowed_keywords.count(fold(word)) > 0);
    }
    client_.send_update(make_delete_keyword(c, word, keyword_col(word), params.beta,
                                            ids, allowed, params.band_floor,
                                            oblivious));
    for (auto& cl : corpus_.clients)
        if (cl.client_id != kOwnerClientId) cl.allowed_keywords.erase(fold(word));
}

void AdminOps::delete_fid(const std::string& keyword, Fe fid, bool oblivious) {
    auto params = client_.fetch_params();
    auto c = ctx();
    auto fetched = client_.fetch_row(kOwnerClientId, keyword);
    if (!fetched.ok) throw ProtocolError("owner fetch failed for " + keyword);
    const std::size_t col = keyword_col(keyword);
    if (params.layout == IndexLayout::kPadded) {
        const Field f(params.p);
        const Fe enc = encode_keyword(f, fold(keyword), params.keyword_groups).numeric;
        client_.send_update(make_delete_fid_padded(c, col, params.beta, params.gamma,
                                                   fetched.id_slots, fid, enc,
                                                   oblivious));
    } else {
        std::vector<Fe> old_ids(fetched.block.begin(), fetched.block.end() - 1);
        client_.send_update(make_delete_fid_optinv(
            c, col, params.beta, fetched.sip, fetched.cut, old_ids, fid, keyword,
            params.keyword_groups, params.used_slots, oblivious));
    }
    // The AP row still lists the keyword, so the file keeps blocking clients
    // without access to it; only the posting goes away.
    removed_postings_.insert({fold(keyword), fid});
}

} // namespace docstar
