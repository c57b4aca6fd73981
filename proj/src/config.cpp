#include "docstar/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace docstar {

using nlohmann::json;

std::string to_json(const DeployConfig& cfg) {
    json j;
    j["version"] = cfg.version;
    j["p"] = cfg.p;
    j["layout"] = cfg.layout == IndexLayout::kPadded ? "padded" : "optimized";
    j["servers"] = json::array();
    for (int i = 0; i < 4; i++)
        j["servers"].push_back({{"host", cfg.server_hosts[static_cast<std::size_t>(i)]},
                                {"port", cfg.server_ports[static_cast<std::size_t>(i)]}});
    j["flags"] = {{"verify", cfg.verify},
                  {"plain_test1", cfg.plain_test1},
                  {"full_ap", cfg.full_ap},
                  {"fake_continue", cfg.fake_continue}};
    j["reserve_per_keyword"] = cfg.reserve_per_keyword;
    if (!cfg.access_seed_hex.empty()) j["access_seed"] = cfg.access_seed_hex;
    return j.dump(2) + "\n";
}

DeployConfig config_from_json(const std::string& text) {
    DeployConfig cfg;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    cfg.version = j.value("version", 1);
    cfg.p = j.value("p", Field::kDefaultPrime);
    const std::string layout = j.value("layout", "padded");
    if (layout == "padded")
        cfg.layout = IndexLayout::kPadded;
    else if (layout == "optimized")
        cfg.layout = IndexLayout::kOptimized;
    else
        throw ConfigError("layout must be padded or optimized");
    if (j.contains("servers")) {
        const auto& servers = j["servers"];
        if (!servers.is_array() || servers.size() != 4)
            throw ConfigError("config needs exactly 4 servers");
        for (std::size_t i = 0; i < 4; i++) {
            cfg.server_hosts[i] = servers[i].value("host", "127.0.0.1");
            cfg.server_ports[i] = servers[i].value("port", 7001 + static_cast<int>(i));
        }
    }
    if (j.contains("flags")) {
        const auto& flags = j["flags"];
        cfg.verify = flags.value("verify", false);
        cfg.plain_test1 = flags.value("plain_test1", false);
        cfg.full_ap = flags.value("full_ap", false);
        cfg.fake_continue = flags.value("fake_continue", false);
    }
    cfg.reserve_per_keyword = j.value("reserve_per_keyword", 1);
    cfg.access_seed_hex = j.value("access_seed", "");
    return cfg;
}

void save_config(const std::string& path, const DeployConfig& cfg) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    out << to_json(cfg);
}

DeployConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::vector<std::uint8_t> decode_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) throw ConfigError("hex string has odd length");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw ConfigError("bad hex digit");
    };
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); i++)
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return out;
}

std::string encode_hex(std::span<const std::uint8_t> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

} // namespace docstar
