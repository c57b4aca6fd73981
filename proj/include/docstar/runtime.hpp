#pragma once

#include <memory>
#include <thread>
#include <vector>

#include "docstar/client.hpp"
#include "docstar/config.hpp"
#include "docstar/server.hpp"

namespace docstar {

// Four nodes over in-process links; the deterministic harness used by tests,
// the acceptance suite, and the bench command.
class LoopbackCluster {
public:
    LoopbackCluster(std::vector<ServerBundle> bundles,
                    std::vector<NodeConfig> configs);
    LoopbackCluster(std::vector<ServerBundle> bundles, const NodeConfig& config);
    ~LoopbackCluster();

    Node& node(std::size_t i) { return *nodes_[i]; }

    // Fresh client connection (4 links); reusable across sequential queries.
    std::array<LinkPtr, 4> connect_client();

    // Total bytes moved over the inter-server mesh so far.
    std::uint64_t peer_bytes() const;

    void stop();

private:
    void start();
    std::array<std::unique_ptr<Node>, 4> nodes_;
    std::vector<LinkPtr> mesh_links_;
    std::vector<LinkPtr> client_links_;
    std::vector<std::jthread> threads_;
    bool stopped_ = false;
};

// Blocking TCP server entry point used by the CLI `serve` command.
// server_index is 1-based. Returns when `stop` (optional) flips true.
void run_tcp_server(const DeployConfig& cfg, int server_index,
                    const std::string& bundle_dir, NodeConfig node_cfg,
                    const std::atomic<bool>* stop_flag = nullptr);

// Client-side TCP dial helper.
std::array<LinkPtr, 4> connect_tcp_clients(const DeployConfig& cfg);

} // namespace docstar
