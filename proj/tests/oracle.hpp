#pragma once

// Test oracles: brute-force cleartext access semantics and randomized corpus
// generation. Independent of the server/client implementation paths.

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <vector>

#include "docstar/datamodel.hpp"

namespace docstar::testing {

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline bool file_contains(const CorpusFile& file, const std::string& kw) {
    for (const auto& w : file.words)
        if (lower(w) == lower(kw)) return true;
    return false;
}

inline bool client_allows(const CorpusClient& c, const std::string& kw) {
    for (const auto& k : c.allowed_keywords)
        if (lower(k) == lower(kw)) return true;
    return false;
}

// Delivered set: files containing the keyword whose every searchable keyword
// is allowed to the client. Requires the client to hold access to the queried
// keyword in the first place.
inline std::set<Fe> oracle_delivered(const CleartextCorpus& corpus,
                                     const std::string& client_id,
                                     const std::string& keyword) {
    const CorpusClient* client = nullptr;
    for (const auto& c : corpus.clients)
        if (c.client_id == client_id) client = &c;
    if (!client || !client_allows(*client, keyword)) return {};
    std::set<Fe> out;
    for (const auto& file : corpus.files) {
        if (!file_contains(file, keyword)) continue;
        bool blocked = false;
        for (const auto& kw : corpus.keywords)
            if (file_contains(file, kw) && !client_allows(*client, kw)) blocked = true;
        if (!blocked) out.insert(file.file_id);
    }
    return out;
}

// Files the client can see exist (phase-2 view) but cannot open.
inline std::set<Fe> oracle_restricted(const CleartextCorpus& corpus,
                                      const std::string& client_id,
                                      const std::string& keyword) {
    const CorpusClient* client = nullptr;
    for (const auto& c : corpus.clients)
        if (c.client_id == client_id) client = &c;
    if (!client || !client_allows(*client, keyword)) return {};
    std::set<Fe> out;
    for (const auto& file : corpus.files)
        if (file_contains(file, keyword)) out.insert(file.file_id);
    for (Fe fid : oracle_delivered(corpus, client_id, keyword)) out.erase(fid);
    return out;
}

inline bool oracle_has_access(const CleartextCorpus& corpus,
                              const std::string& client_id,
                              const std::string& keyword) {
    bool present = false;
    for (const auto& kw : corpus.keywords)
        if (lower(kw) == lower(keyword)) present = true;
    if (!present) return false;
    for (const auto& c : corpus.clients)
        if (c.client_id == client_id) return client_allows(c, keyword);
    return false;
}

inline std::string random_word(Prng& prng, std::size_t min_len, std::size_t max_len) {
    const std::size_t len = min_len + prng.uniform_below(max_len - min_len + 1);
    std::string w;
    for (std::size_t i = 0; i < len; i++)
        w.push_back(static_cast<char>('a' + prng.uniform_below(26)));
    return w;
}

struct CorpusLimits {
    std::size_t max_files = 30;
    std::size_t max_keywords = 10;
    std::size_t max_clients = 4;
    std::size_t max_words_per_file = 8;
};

inline CleartextCorpus random_corpus(Prng& prng, const CorpusLimits& lim = {}) {
    CleartextCorpus c;
    const std::size_t nkw = 1 + prng.uniform_below(lim.max_keywords);
    std::set<std::string> kws;
    while (kws.size() < nkw) kws.insert(random_word(prng, 2, 6));
    c.keywords.assign(kws.begin(), kws.end());

    const std::size_t nfiles = 1 + prng.uniform_below(lim.max_files);
    for (std::size_t i = 0; i < nfiles; i++) {
        CorpusFile file;
        file.file_id = static_cast<Fe>(i + 1);
        const std::size_t nw = 1 + prng.uniform_below(lim.max_words_per_file);
        for (std::size_t w = 0; w < nw; w++) {
            if (prng.uniform_below(100) < 55)
                file.words.push_back(
                    c.keywords[prng.uniform_below(c.keywords.size())]);
            else
                file.words.push_back(random_word(prng, 2, 6));
        }
        c.files.push_back(std::move(file));
    }

    const std::size_t nclients = 1 + prng.uniform_below(lim.max_clients);
    for (std::size_t i = 0; i < nclients; i++) {
        CorpusClient cl;
        cl.client_id = "client" + std::to_string(i);
        for (const auto& kw : c.keywords)
            if (prng.uniform_below(100) < 60) cl.allowed_keywords.insert(kw);
        c.clients.push_back(std::move(cl));
    }
    return c;
}

} // namespace docstar::testing
