// Command-line front end: corpus outsourcing, server daemon, queries, access
// administration, dynamic updates, and the desk-scale benchmark.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "docstar/admin.hpp"
#include "docstar/bundle_io.hpp"
#include "docstar/kernels.hpp"
#include "docstar/runtime.hpp"

using namespace docstar;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoAccess = 2;
constexpr int kExitVerifyFailed = 3;
constexpr int kExitAborted = 4;

// ---------------------------------------------------------------------------
// Corpus and owner-state files

CleartextCorpus corpus_from_json(const json& j) {
    CleartextCorpus c;
    for (const auto& kw : j.at("keywords")) c.keywords.push_back(kw.get<std::string>());
    for (const auto& file : j.at("files")) {
        CorpusFile cf;
        cf.file_id = file.at("id").get<Fe>();
        for (const auto& w : file.at("words")) cf.words.push_back(w.get<std::string>());
        c.files.push_back(std::move(cf));
    }
    for (const auto& client : j.at("clients")) {
        CorpusClient cc;
        cc.client_id = client.at("id").get<std::string>();
        for (const auto& kw : client.value("allow", json::array()))
            cc.allowed_keywords.insert(kw.get<std::string>());
        c.clients.push_back(std::move(cc));
    }
    return c;
}

json corpus_to_json(const CleartextCorpus& c) {
    json j;
    j["keywords"] = c.keywords;
    j["files"] = json::array();
    for (const auto& f : c.files)
        j["files"].push_back({{"id", f.file_id}, {"words", f.words}});
    j["clients"] = json::array();
    for (const auto& cl : c.clients) {
        std::vector<std::string> allow(cl.allowed_keywords.begin(),
                                       cl.allowed_keywords.end());
        j["clients"].push_back({{"id", cl.client_id}, {"allow", allow}});
    }
    return j;
}

CleartextCorpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    json j;
    in >> j;
    return corpus_from_json(j);
}

// The owner's sidecar: its own record of the corpus and policy, which grant
// positions, capacities, and rebuilds are derived from.
void save_admin(const std::string& dir, const CleartextCorpus& corpus) {
    std::ofstream out(fs::path(dir) / "admin.json", std::ios::trunc);
    out << corpus_to_json(corpus).dump(2) << "\n";
}

CleartextCorpus load_admin(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "admin.json");
    if (!in) throw ConfigError("no admin.json in " + dir + " (owner state required)");
    json j;
    in >> j;
    return corpus_from_json(j);
}

struct AdminSession {
    DeployConfig cfg;
    std::string dir;
    Client client;
    AdminOps ops;

    AdminSession(const std::string& config_path, const std::string& bundle_dir)
        : cfg(load_config(config_path)),
          dir(bundle_dir),
          client(connect_tcp_clients(cfg)),
          ops(client, load_admin(bundle_dir), decode_hex(cfg.access_seed_hex),
              cfg.reserve_per_keyword) {
        if (cfg.access_seed_hex.empty())
            throw ConfigError("config has no access_seed (owner copy?)");
        client.fetch_params();
    }

    void persist() { save_admin(dir, ops.corpus()); }
};

int report_query(const QueryOutcome& outcome, bool as_json) {
    if (as_json) {
        json j;
        j["status"] = static_cast<int>(outcome.status);
        j["files"] = json::array();
        std::size_t restricted = 0;
        for (const auto& fr : outcome.files) {
            if (fr.delivered) {
                std::string text;
                for (const auto& w : fr.words) {
                    if (!text.empty()) text += ' ';
                    text += w;
                }
                j["files"].push_back({{"id", fr.file_id}, {"content", text}});
            } else {
                restricted++;
            }
        }
        j["restricted"] = restricted;
        if (outcome.status == QueryStatus::kAborted)
            j["abort"] = abort_reason_name(outcome.abort_reason);
        std::cout << j.dump(2) << "\n";
    } else {
        switch (outcome.status) {
            case QueryStatus::kOk: {
                std::size_t restricted = 0;
                for (const auto& fr : outcome.files) {
                    if (!fr.delivered) {
                        restricted++;
                        continue;
                    }
                    std::cout << "file " << fr.file_id << ":";
                    for (const auto& w : fr.words) std::cout << " " << w;
                    std::cout << "\n";
                }
                std::cout << restricted << " file(s) restricted\n";
                break;
            }
            case QueryStatus::kNoAccessOrAbsent:
                std::cout << "no access or keyword absent\n";
                break;
            case QueryStatus::kAborted:
                std::cout << "aborted: " << abort_reason_name(outcome.abort_reason)
                          << "\n";
                break;
            case QueryStatus::kServerMisbehavior:
                std::cout << "server misbehavior detected in phase "
                          << outcome.transcript.misbehavior_phase << "\n";
                break;
        }
    }
    switch (outcome.status) {
        case QueryStatus::kOk: return kExitOk;
        case QueryStatus::kNoAccessOrAbsent: return kExitNoAccess;
        case QueryStatus::kServerMisbehavior: return kExitVerifyFailed;
        case QueryStatus::kAborted: return kExitAborted;
    }
    return kExitError;
}

// ---------------------------------------------------------------------------
// bench

struct BenchStats {
    double phase_ms[4] = {0, 0, 0, 0};
    std::uint64_t phase_bytes[4] = {0, 0, 0, 0};
    std::uint64_t structure_bytes = 0;
    int rounds_phase2 = 0;
};

CleartextCorpus bench_corpus(bool skew, Prng& prng) {
    (void)prng;
    CleartextCorpus c;
    const std::size_t nkw = 500, nfiles = 500;
    for (std::size_t k = 0; k < nkw; k++) {
        std::string name = "kw";
        std::size_t v = k;
        for (int d = 0; d < 3; d++) {
            name.push_back(static_cast<char>('a' + v % 26));
            v /= 26;
        }
        c.keywords.push_back(name);
    }
    for (std::size_t i = 0; i < nfiles; i++) {
        CorpusFile f;
        f.file_id = static_cast<Fe>(i + 1);
        if (skew) {
            // One heavy keyword in every file; the rest land in 1-2 files.
            f.words.push_back(c.keywords[0]);
            f.words.push_back(c.keywords[1 + i % (nkw - 1)]);
        } else {
            // Every keyword appears in exactly five files.
            for (std::size_t j = 0; j < 5; j++)
                f.words.push_back(c.keywords[(5 * i + j) % nkw]);
        }
        f.words.push_back("word");
        c.files.push_back(std::move(f));
    }
    CorpusClient all;
    all.client_id = "bench";
    for (const auto& kw : c.keywords) all.allowed_keywords.insert(kw);
    c.clients.push_back(std::move(all));
    return c;
}

std::uint64_t phase2_structure_bytes(const ClearStructures& s) {
    if (s.layout == IndexLayout::kPadded)
        return static_cast<std::uint64_t>(s.inv_rows.size()) * (s.gamma + 2) * 8;
    return static_cast<std::uint64_t>(4 * s.addr_sip.size() + s.optinv.size()) * 8;
}

BenchStats bench_layout(const CleartextCorpus& corpus, IndexLayout layout,
                        const std::vector<std::string>& keywords, int repeats) {
    BuildOptions o;
    o.access_seed = {0xB, 0xE, 0x9, 0xC};
    auto clear = build_structures(corpus, layout, o);
    BenchStats stats;
    stats.structure_bytes = phase2_structure_bytes(clear);
    stats.rounds_phase2 = layout == IndexLayout::kPadded ? 1 : 2;

    Prng prng;
    auto bundles = share_structures(clear, 4, prng);
    LoopbackCluster cluster(std::move(bundles), NodeConfig{});
    Client client(cluster.connect_client());

    using clock = std::chrono::steady_clock;
    for (int r = 0; r < repeats; r++) {
        for (const auto& kw : keywords) {
            const auto t0 = clock::now();
            auto outcome = client.run_query("bench", kw);
            const auto t1 = clock::now();
            if (outcome.status != QueryStatus::kOk &&
                outcome.status != QueryStatus::kNoAccessOrAbsent)
                throw ProtocolError("bench query failed");
            const double total_ms =
                std::chrono::duration<double, std::milli>(t1 - t0).count();
            std::uint64_t elems[4] = {0, 0, 0, 0};
            std::uint64_t total_elems = 0;
            for (int ph = 1; ph <= 3; ph++) {
                const auto& pc =
                    outcome.transcript.phase_counts[static_cast<std::size_t>(ph)];
                elems[ph] = pc.elements_sent + pc.elements_received;
                total_elems += elems[ph];
                stats.phase_bytes[ph] += elems[ph] * 8;
            }
            // Attribute wall time proportionally to per-phase traffic; the
            // loopback harness has no per-phase clock on the server side.
            for (int ph = 1; ph <= 3; ph++)
                stats.phase_ms[ph] += total_elems
                                          ? total_ms * static_cast<double>(elems[ph]) /
                                                static_cast<double>(total_elems)
                                          : 0;
        }
    }
    return stats;
}

int run_bench(const std::string& mode, bool kernels_too, bool as_json) {
    json out;
    Prng prng(0xBE9C);
    std::ostringstream table;
    table << "scenario   layout     p2-structure-bytes  p2-rounds  p1-bytes  p2-bytes  p3-bytes  p1-ms   p2-ms   p3-ms\n";

    auto run_scenario = [&](const std::string& name, bool skew) {
        auto corpus = bench_corpus(skew, prng);
        // A handful of query keywords: the heavy one (if any) plus lights.
        std::vector<std::string> kws{corpus.keywords[0], corpus.keywords[1],
                                     corpus.keywords[2]};
        BenchStats padded = bench_layout(corpus, IndexLayout::kPadded, kws, 1);
        BenchStats optimized = bench_layout(corpus, IndexLayout::kOptimized, kws, 1);
        for (auto* s : {&padded, &optimized}) {
            const char* lname = s == &padded ? "padded   " : "optimized";
            table << name << "  " << lname << "  " << std::setw(18)
                  << s->structure_bytes << "  " << std::setw(9) << s->rounds_phase2;
            for (int ph = 1; ph <= 3; ph++) table << "  " << std::setw(8) << s->phase_bytes[ph];
            for (int ph = 1; ph <= 3; ph++)
                table << "  " << std::fixed << std::setprecision(1) << std::setw(6)
                      << s->phase_ms[ph];
            table << "\n";
        }
        json sj;
        sj["padded"] = {{"p2_structure_bytes", padded.structure_bytes},
                        {"p2_rounds", padded.rounds_phase2},
                        {"p2_bytes", padded.phase_bytes[2]}};
        sj["optimized"] = {{"p2_structure_bytes", optimized.structure_bytes},
                           {"p2_rounds", optimized.rounds_phase2},
                           {"p2_bytes", optimized.phase_bytes[2]}};
        if (skew)
            sj["optimized_smaller_structure"] =
                optimized.structure_bytes < padded.structure_bytes;
        else
            sj["padded_fewer_rounds"] = padded.rounds_phase2 <= optimized.rounds_phase2;
        out[name] = sj;
    };

    if (mode == "high" || mode == "both") run_scenario("skew", true);
    if (mode == "uniform" || mode == "both") run_scenario("uniform", false);

    if (kernels_too) {
        // Serial vs OpenMP comparison on the phase-1 scan and the content
        // contraction, the two hottest loops.
        Field f;
        Prng kp(7);
        const std::size_t n = 1 << 20;
        std::vector<Fe> a(n), b(n), c(n), d(n), outv(n);
        for (auto* v : {&a, &b, &c, &d})
            for (auto& x : *v) x = f.random_element(kp);
        using clock = std::chrono::steady_clock;
        auto t0 = clock::now();
        kernels::scan_columns_serial(f, a, 17, b, c, d, outv);
        auto t1 = clock::now();
        kernels::scan_columns_parallel(f, a, 17, b, c, d, outv);
        auto t2 = clock::now();
        json kj;
        kj["scan_serial_ms"] = std::chrono::duration<double, std::milli>(t1 - t0).count();
        kj["scan_parallel_ms"] = std::chrono::duration<double, std::milli>(t2 - t1).count();
        out["kernels"] = kj;
        table << "kernels: scan 2^20 serial " << kj["scan_serial_ms"]
              << " ms, parallel " << kj["scan_parallel_ms"] << " ms\n";
    }

    if (as_json)
        std::cout << out.dump(2) << "\n";
    else
        std::cout << table.str();
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"key-level access-controlled key-document store over secret shares"};
    app.require_subcommand(1);

    // outsource
    auto* outsource = app.add_subcommand(
        "outsource", "build shares from a cleartext corpus and write bundles");
    std::string corpus_path, out_dir, layout_name = "padded";
    Fe prime = Field::kDefaultPrime;
    int reserve = 1;
    bool full_ap = false;
    std::string seed_hex;
    outsource->add_option("--corpus", corpus_path, "corpus JSON")->required();
    outsource->add_option("--out", out_dir, "output directory")->required();
    outsource->add_option("--layout", layout_name, "padded|optimized");
    outsource->add_option("--p", prime, "field modulus (prime)");
    outsource->add_option("--reserve", reserve, "reserve slots per keyword");
    outsource->add_flag("--full-ap", full_ap, "also build full-length AP rows");
    outsource->add_option("--seed", seed_hex, "owner secret seed (hex)");

    // serve
    auto* serve = app.add_subcommand("serve", "run one server node");
    std::string config_path, bundle_dir;
    int index = 1;
    bool plain_test1 = false, fake_continue = false;
    serve->add_option("--config", config_path, "config.json")->required();
    serve->add_option("--bundle", bundle_dir, "server bundle directory")->required();
    serve->add_option("--index", index, "server index 1..4")->required();
    serve->add_flag("--plain-test1", plain_test1, "open the raw access test");
    serve->add_flag("--fake-continue", fake_continue,
                    "serve the fake row instead of aborting on a failed access test");

    // query
    auto* query = app.add_subcommand("query", "run a keyword query");
    std::string q_config, q_client, q_keyword;
    bool q_verify = false, q_fake = false, q_json = false;
    std::size_t q_bins = 0;
    query->add_option("--config", q_config, "config.json")->required();
    query->add_option("--client", q_client, "client id")->required();
    query->add_option("--keyword", q_keyword, "query keyword")->required();
    query->add_flag("--verify", q_verify, "cross-check all four servers");
    query->add_flag("--fake-continue", q_fake, "keep the transcript shape on denial");
    query->add_option("--bins", q_bins, "binned fetch vectors");
    query->add_flag("--json", q_json, "machine-readable output");

    // grant / revoke
    std::string g_config, g_dir, g_client, g_keyword;
    auto* grant = app.add_subcommand("grant", "grant a client a keyword");
    auto* revoke = app.add_subcommand("revoke", "revoke a client's keyword");
    for (auto* cmd : {grant, revoke}) {
        cmd->add_option("--config", g_config, "config.json")->required();
        cmd->add_option("--bundle-root", g_dir, "directory holding admin.json")
            ->required();
        cmd->add_option("--client", g_client, "client id")->required();
        cmd->add_option("--keyword", g_keyword, "keyword")->required();
    }

    // add-file
    auto* add_file = app.add_subcommand("add-file", "append a new file");
    std::string af_config, af_dir, af_words;
    add_file->add_option("--config", af_config)->required();
    add_file->add_option("--bundle-root", af_dir)->required();
    add_file->add_option("--words", af_words, "space-separated file content")
        ->required();

    // add-keyword
    auto* add_kw = app.add_subcommand("add-keyword", "append a searchable keyword");
    std::string ak_config, ak_dir, ak_word;
    std::vector<std::string> ak_allow;
    add_kw->add_option("--config", ak_config)->required();
    add_kw->add_option("--bundle-root", ak_dir)->required();
    add_kw->add_option("--keyword", ak_word)->required();
    add_kw->add_option("--allow", ak_allow, "clients granted the new keyword");

    // del-keyword
    auto* del_kw = app.add_subcommand("del-keyword", "deny a keyword to everyone");
    std::string dk_config, dk_dir, dk_word;
    bool dk_fast = false;
    del_kw->add_option("--config", dk_config)->required();
    del_kw->add_option("--bundle-root", dk_dir)->required();
    del_kw->add_option("--keyword", dk_word)->required();
    del_kw->add_flag("--fast", dk_fast,
                     "column update: quicker, reveals the keyword position");

    // del-file
    auto* del_file = app.add_subcommand("del-file", "remove a file id from a keyword");
    std::string df_config, df_dir, df_word;
    Fe df_id = 0;
    bool df_fast = false;
    del_file->add_option("--config", df_config)->required();
    del_file->add_option("--bundle-root", df_dir)->required();
    del_file->add_option("--keyword", df_word)->required();
    del_file->add_option("--id", df_id)->required();
    del_file->add_flag("--fast", df_fast,
                       "row update: quicker, reveals the row position");

    // bench
    auto* bench = app.add_subcommand("bench", "desk-scale benchmark");
    std::string b_skew = "both";
    bool b_kernels = false, b_json = false;
    bench->add_option("--skew", b_skew, "high|uniform|both");
    bench->add_flag("--kernels", b_kernels, "include the serial/OpenMP comparison");
    bench->add_flag("--json", b_json, "machine-readable output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (outsource->parsed()) {
            auto corpus = load_corpus(corpus_path);
            // The owner enrolls itself with universal access; oblivious update
            // fetches ride on this identity.
            CorpusClient owner;
            owner.client_id = "dbo";
            for (const auto& kw : corpus.keywords) owner.allowed_keywords.insert(kw);
            corpus.clients.push_back(std::move(owner));

            BuildOptions o;
            o.p = prime;
            o.reserve_per_keyword = reserve;
            o.full_ap = full_ap;
            if (seed_hex.empty()) {
                std::vector<std::uint8_t> seed(32);
                Prng entropy;
                entropy.fill(seed);
                seed_hex = encode_hex(seed);
            }
            o.access_seed = decode_hex(seed_hex);
            const IndexLayout layout = layout_name == "optimized"
                                           ? IndexLayout::kOptimized
                                           : IndexLayout::kPadded;
            auto clear = build_structures(corpus, layout, o);
            Prng prng;
            auto bundles = share_structures(clear, 4, prng);
            fs::create_directories(out_dir);
            for (int i = 0; i < 4; i++)
                save_bundle((fs::path(out_dir) / ("server" + std::to_string(i + 1)))
                                .string(),
                            bundles[static_cast<std::size_t>(i)]);
            DeployConfig cfg;
            cfg.p = prime;
            cfg.layout = layout;
            cfg.full_ap = full_ap;
            cfg.reserve_per_keyword = reserve;
            cfg.access_seed_hex = seed_hex;
            save_config((fs::path(out_dir) / "config.json").string(), cfg);
            save_admin(out_dir, corpus);
            std::cout << "wrote 4 bundles + config.json + admin.json under "
                      << out_dir << "\n";
            return kExitOk;
        }
        if (serve->parsed()) {
            auto cfg = load_config(config_path);
            NodeConfig node_cfg;
            node_cfg.plain_test1 = plain_test1 || cfg.plain_test1;
            node_cfg.fake_continue = fake_continue || cfg.fake_continue;
            run_tcp_server(cfg, index, bundle_dir, node_cfg, nullptr);
            return kExitOk;
        }
        if (query->parsed()) {
            auto cfg = load_config(q_config);
            Client client(connect_tcp_clients(cfg));
            QueryOptions qo;
            qo.verify = q_verify || cfg.verify;
            qo.fake_continue = q_fake || cfg.fake_continue;
            qo.bins = q_bins;
            auto outcome = client.run_query(q_client, q_keyword, qo);
            return report_query(outcome, q_json);
        }
        if (grant->parsed() || revoke->parsed()) {
            AdminSession admin(g_config, g_dir);
            const bool granting = grant->parsed();
            if (granting)
                admin.ops.grant(g_client, g_keyword);
            else
                admin.ops.revoke(g_client, g_keyword);
            admin.persist();
            std::cout << (granting ? "granted\n" : "revoked\n");
            return kExitOk;
        }
        if (add_file->parsed()) {
            AdminSession admin(af_config, af_dir);
            std::vector<std::string> words;
            std::istringstream ws(af_words);
            for (std::string w; ws >> w;) words.push_back(w);
            const Fe fid = admin.ops.add_file(words);
            admin.persist();
            std::cout << "added file " << fid << "\n";
            return kExitOk;
        }
        if (add_kw->parsed()) {
            AdminSession admin(ak_config, ak_dir);
            std::set<std::string> allow(ak_allow.begin(), ak_allow.end());
            admin.ops.add_keyword(ak_word, allow);
            admin.persist();
            std::cout << "added keyword " << ak_word << "\n";
            return kExitOk;
        }
        if (del_kw->parsed()) {
            AdminSession admin(dk_config, dk_dir);
            admin.ops.delete_keyword(dk_word, !dk_fast);
            admin.persist();
            std::cout << "deleted keyword " << dk_word << "\n";
            return kExitOk;
        }
        if (del_file->parsed()) {
            AdminSession admin(df_config, df_dir);
            admin.ops.delete_fid(df_word, df_id, !df_fast);
            admin.persist();
            std::cout << "deleted file " << df_id << " from " << df_word << "\n";
            return kExitOk;
        }
        if (bench->parsed()) return run_bench(b_skew, b_kernels, b_json);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitError;
    } catch (const AbortError& e) {
        std::cerr << "protocol abort: " << e.what() << "\n";
        return kExitAborted;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
