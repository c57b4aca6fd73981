#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "docstar/datamodel.hpp"

namespace docstar {

// Deployment descriptor persisted as config.json next to the bundles. One
// versioned file; every protocol variant is a flag here so experiments are
// reproducible without code edits.
struct DeployConfig {
    int version = 1;
    Fe p = Field::kDefaultPrime;
    IndexLayout layout = IndexLayout::kPadded;
    std::array<std::string, 4> server_hosts{"127.0.0.1", "127.0.0.1", "127.0.0.1",
                                            "127.0.0.1"};
    std::array<std::uint16_t, 4> server_ports{7001, 7002, 7003, 7004};
    bool verify = false;
    bool plain_test1 = false;
    bool full_ap = false;
    bool fake_continue = false;
    int reserve_per_keyword = 1;
    // Hex-encoded DBO secret seed for denied-access PRG values. Present only
    // in the owner's copy of the config.
    std::string access_seed_hex;
};

std::string to_json(const DeployConfig& cfg);
DeployConfig config_from_json(const std::string& text);
void save_config(const std::string& path, const DeployConfig& cfg);
DeployConfig load_config(const std::string& path);

std::vector<std::uint8_t> decode_hex(const std::string& hex);
std::string encode_hex(std::span<const std::uint8_t> bytes);

} // namespace docstar
