#pragma once

#include "docstar/client.hpp"

namespace docstar {

// Owner-side orchestration of dynamic updates. Holds the owner's own record
// of the corpus and policy (the source of grant positions, block capacities,
// and rebuild inputs) and drives the oblivious fetches plus update pushes
// through a connected client under the reserved "dbo" identity.
class AdminOps {
public:
    AdminOps(Client& client, CleartextCorpus corpus,
             std::vector<std::uint8_t> access_seed, int reserve_per_keyword);

    const CleartextCorpus& corpus() const { return corpus_; }
    CleartextCorpus& corpus() { return corpus_; }

    void grant(const std::string& client_id, const std::string& keyword);
    void revoke(const std::string& client_id, const std::string& keyword);

    // Appends the file record and indexes every searchable keyword in it.
    // Returns the new (dense) file id.
    Fe add_file(const std::vector<std::string>& words);

    void add_keyword(const std::string& word,
                     const std::set<std::string>& allowed_clients);

    void delete_keyword(const std::string& word, bool oblivious);
    void delete_fid(const std::string& keyword, Fe fid, bool oblivious);

    // Postings removed via delete_fid: the file stays blocked by the keyword
    // (its AP row is untouched) but is no longer discoverable through it.
    const std::set<std::pair<std::string, Fe>>& removed_postings() const {
        return removed_postings_;
    }

private:
    UpdateContext ctx();
    void set_access(const std::string& client_id, const std::string& keyword,
                    bool grant);
    std::size_t keyword_col(const std::string& kw) const;
    std::size_t client_row(const std::string& id) const;
    std::size_t postings_of(const std::string& kw) const;
    // The owner's corpus with removed postings scrubbed: what rebuilds index.
    CleartextCorpus indexing_view() const;

    Client& client_;
    CleartextCorpus corpus_;
    std::vector<std::uint8_t> seed_;
    int reserve_;
    Prng prng_;
    // Optimized layout: live slot capacity per keyword block. Fixed at
    // outsource/rebuild time; insertions consume it, deletions do not return
    // it to neighbouring blocks.
    std::vector<std::uint64_t> capacity_;
    std::set<std::pair<std::string, Fe>> removed_postings_;
};

inline constexpr const char* kOwnerClientId = "dbo";

} // namespace docstar
