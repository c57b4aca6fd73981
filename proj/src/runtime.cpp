#include "docstar/runtime.hpp"

#include "docstar/bundle_io.hpp"

namespace docstar {

LoopbackCluster::LoopbackCluster(std::vector<ServerBundle> bundles,
                                 std::vector<NodeConfig> configs) {
    for (std::size_t i = 0; i < 4; i++)
        nodes_[i] = std::make_unique<Node>(std::move(bundles[i]), configs[i]);
    start();
}

LoopbackCluster::LoopbackCluster(std::vector<ServerBundle> bundles,
                                 const NodeConfig& config)
    : LoopbackCluster(std::move(bundles), std::vector<NodeConfig>(4, config)) {}

void LoopbackCluster::start() {
    std::array<PeerGroup, 4> groups;
    for (int a = 0; a < 4; a++) {
        groups[static_cast<std::size_t>(a)].self = a + 1;
        groups[static_cast<std::size_t>(a)].mailbox = &nodes_[static_cast<std::size_t>(a)]->mailbox();
    }
    for (int a = 0; a < 4; a++) {
        for (int b = a + 1; b < 4; b++) {
            auto [la, lb] = make_loopback_pair();
            groups[static_cast<std::size_t>(a)].links[static_cast<std::size_t>(b + 1)] = la;
            groups[static_cast<std::size_t>(b)].links[static_cast<std::size_t>(a + 1)] = lb;
            mesh_links_.push_back(la);
            mesh_links_.push_back(lb);
            // One reader per link end, feeding the owner's mailbox.
            threads_.emplace_back([node = nodes_[static_cast<std::size_t>(a)].get(),
                                   link = la, from = b + 1] {
                while (!node->stopped()) {
                    auto frame = link->recv(std::chrono::milliseconds(200));
                    if (frame) node->mailbox().deliver(from, *frame);
                }
            });
            threads_.emplace_back([node = nodes_[static_cast<std::size_t>(b)].get(),
                                   link = lb, from = a + 1] {
                while (!node->stopped()) {
                    auto frame = link->recv(std::chrono::milliseconds(200));
                    if (frame) node->mailbox().deliver(from, *frame);
                }
            });
        }
    }
    for (int a = 0; a < 4; a++)
        nodes_[static_cast<std::size_t>(a)]->attach_peers(groups[static_cast<std::size_t>(a)]);
}

std::array<LinkPtr, 4> LoopbackCluster::connect_client() {
    std::array<LinkPtr, 4> ends;
    for (std::size_t i = 0; i < 4; i++) {
        auto [client_end, server_end] = make_loopback_pair();
        ends[i] = client_end;
        client_links_.push_back(server_end);
        threads_.emplace_back(
            [node = nodes_[i].get(), link = server_end] { node->serve_client(link); });
    }
    return ends;
}

std::uint64_t LoopbackCluster::peer_bytes() const {
    std::uint64_t total = 0;
    for (const auto& link : mesh_links_) total += link->stats().bytes_sent;
    return total;
}

void LoopbackCluster::stop() {
    if (stopped_) return;
    stopped_ = true;
    for (auto& n : nodes_) n->stop();
    for (auto& l : mesh_links_) l->close();
    for (auto& l : client_links_) l->close();
}

LoopbackCluster::~LoopbackCluster() {
    stop();
    threads_.clear(); // joins
}

// ---------------------------------------------------------------------------
// TCP serving

namespace {

Frame peer_hello(int self) {
    Frame f;
    f.type = MsgType::kHello;
    f.session.fill(0);
    f.payload = {1, static_cast<std::uint8_t>(self)};
    return f;
}

} // namespace

void run_tcp_server(const DeployConfig& cfg, int server_index,
                    const std::string& bundle_dir, NodeConfig node_cfg,
                    const std::atomic<bool>* stop_flag) {
    Node node(load_bundle(bundle_dir), std::move(node_cfg));
    const std::size_t self = static_cast<std::size_t>(server_index);

    TcpListener listener(cfg.server_hosts[self - 1], cfg.server_ports[self - 1]);

    PeerGroup group;
    group.self = server_index;
    group.mailbox = &node.mailbox();

    std::vector<std::jthread> threads;
    auto add_peer = [&](int peer, const LinkPtr& link) {
        group.links[static_cast<std::size_t>(peer)] = link;
        threads.emplace_back([&node, link, peer] {
            while (!node.stopped()) {
                auto frame = link->recv(std::chrono::milliseconds(200));
                if (frame) node.mailbox().deliver(peer, *frame);
            }
        });
    };

    // Lower-indexed servers dial higher-indexed ones; the dialer announces
    // itself with a peer hello. Everything below us dials in through the
    // accept loop.
    int peers_up = 0;
    for (int peer = server_index + 1; peer <= 4; peer++) {
        LinkPtr link;
        for (;;) {
            try {
                link = tcp_connect(cfg.server_hosts[static_cast<std::size_t>(peer - 1)],
                                   cfg.server_ports[static_cast<std::size_t>(peer - 1)],
                                   std::chrono::milliseconds(1000));
                break;
            } catch (const ProtocolError&) {
                std::this_thread::sleep_for(std::chrono::milliseconds(200));
                if (stop_flag && stop_flag->load()) return;
            }
        }
        link->send(peer_hello(server_index));
        add_peer(peer, link);
        peers_up++;
    }
    if (peers_up == 3) node.attach_peers(group);

    // Accept loop: peer hellos from below, client connections from anywhere.
    while (!(stop_flag && stop_flag->load())) {
        auto link = listener.accept(std::chrono::milliseconds(200));
        if (!link) continue;
        auto first = link->recv(std::chrono::milliseconds(5000));
        if (!first) continue;
        if (first->type == MsgType::kHello && first->payload.size() == 2 &&
            first->payload[0] == 1) {
            const int peer = first->payload[1];
            if (peer >= 1 && peer <= 4 && peer != server_index) {
                add_peer(peer, link);
                peers_up++;
                if (peers_up == 3) node.attach_peers(group);
            }
            continue;
        }
        // A client connection; hand the first frame to the session loop.
        if (peers_up < 3) {
            // Not ready; refuse politely.
            PayloadWriter w;
            w.u16(static_cast<std::uint16_t>(AbortReason::kProtocol));
            Frame abort;
            abort.type = MsgType::kAbort;
            abort.session = first->session;
            abort.payload = w.take();
            link->send(abort);
            continue;
        }
        threads.emplace_back([&node, link, first = *first]() mutable {
            node.serve_client_with(link, first);
        });
    }
    node.stop();
}

std::array<LinkPtr, 4> connect_tcp_clients(const DeployConfig& cfg) {
    std::array<LinkPtr, 4> links;
    for (std::size_t i = 0; i < 4; i++)
        links[i] = tcp_connect(cfg.server_hosts[i], cfg.server_ports[i],
                               std::chrono::milliseconds(3000));
    return links;
}

} // namespace docstar
