#include "docstar/bundle_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace docstar {

namespace {

void put_u64(std::ofstream& out, std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; i++) b[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& in) {
    std::uint8_t b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw ConfigError("truncated bundle file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; i++) v = (v << 8) | b[i];
    return v;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; i++) b[i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    std::uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ConfigError("truncated bundle file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; i++) v = (v << 8) | b[i];
    return v;
}

void write_header(std::ofstream& out, const BundleParams& p) {
    out.write(kBundleMagic, 8);
    put_u64(out, p.p);
    put_u64(out, p.alpha);
    put_u64(out, p.beta);
    put_u64(out, p.gamma);
    put_u64(out, p.delta);
    put_u64(out, p.eta);
    out.put(static_cast<char>(p.layout));
}

void read_header(std::ifstream& in, BundleParams& p) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kBundleMagic, 8) != 0)
        throw ConfigError("bad bundle magic");
    p.p = get_u64(in);
    p.alpha = get_u64(in);
    p.beta = get_u64(in);
    p.gamma = get_u64(in);
    p.delta = get_u64(in);
    p.eta = get_u64(in);
    int tag = in.get();
    if (tag != 0 && tag != 1) throw ConfigError("bad layout tag");
    p.layout = static_cast<IndexLayout>(tag);
}

void check_header(std::ifstream& in, const BundleParams& expect) {
    BundleParams got;
    read_header(in, got);
    if (got.p != expect.p || got.alpha != expect.alpha || got.beta != expect.beta ||
        got.gamma != expect.gamma || got.delta != expect.delta ||
        got.eta != expect.eta || got.layout != expect.layout)
        throw ConfigError("bundle structure headers disagree");
}

void write_matrix(std::ofstream& out, const ShareMatrix& m) {
    put_u64(out, m.rows);
    put_u64(out, m.cols);
    for (Fe v : m.cells) put_u64(out, v);
}

ShareMatrix read_matrix(std::ifstream& in) {
    ShareMatrix m;
    m.rows = get_u64(in);
    m.cols = get_u64(in);
    m.cells.resize(m.rows * m.cols);
    for (auto& v : m.cells) v = get_u64(in);
    return m;
}

void write_vector(std::ofstream& out, std::span<const Fe> v) {
    put_u64(out, v.size());
    for (Fe x : v) put_u64(out, x);
}

std::vector<Fe> read_vector(std::ifstream& in) {
    std::vector<Fe> v(get_u64(in));
    for (auto& x : v) x = get_u64(in);
    return v;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + p.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    return in;
}

} // namespace

void save_bundle(const std::string& dir, const ServerBundle& b) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& p = b.params;

    {
        auto out = open_out(fs::path(dir) / "acmatrix.bin");
        write_header(out, p);
        put_u32(out, static_cast<std::uint32_t>(b.server_index));
        put_u32(out, static_cast<std::uint32_t>(p.keyword_groups));
        put_u32(out, static_cast<std::uint32_t>(p.content_groups));
        put_u64(out, p.band_floor);
        out.put(p.full_ap ? 1 : 0);
        put_u32(out, static_cast<std::uint32_t>(b.client_ids.size()));
        for (const auto& id : b.client_ids) {
            put_u32(out, static_cast<std::uint32_t>(id.size()));
            out.write(id.data(), static_cast<std::streamsize>(id.size()));
        }
        write_matrix(out, b.ac);
    }
    if (p.layout == IndexLayout::kPadded) {
        auto out = open_out(fs::path(dir) / "index.bin");
        write_header(out, p);
        write_matrix(out, b.inv);
    } else {
        auto out = open_out(fs::path(dir) / "addrlist.bin");
        write_header(out, p);
        write_matrix(out, b.addr);
        write_vector(out, b.addr_hdv);
        auto out2 = open_out(fs::path(dir) / "optinv.bin");
        write_header(out2, p);
        put_u64(out2, p.x);
        put_u64(out2, p.y);
        put_u64(out2, p.used_slots);
        write_vector(out2, b.optinv);
    }
    {
        auto out = open_out(fs::path(dir) / "files.bin");
        write_header(out, p);
        put_u64(out, p.gamma_ap);
        write_vector(out, b.file_ids);
        write_matrix(out, b.ap);
        out.put(p.full_ap ? 1 : 0);
        if (p.full_ap) write_matrix(out, b.ap_full);
        write_matrix(out, b.content);
    }
}

ServerBundle load_bundle(const std::string& dir) {
    namespace fs = std::filesystem;
    ServerBundle b;

    {
        auto in = open_in(fs::path(dir) / "acmatrix.bin");
        read_header(in, b.params);
        b.server_index = static_cast<int>(get_u32(in));
        b.params.keyword_groups = static_cast<int>(get_u32(in));
        b.params.content_groups = static_cast<int>(get_u32(in));
        b.params.band_floor = get_u64(in);
        b.params.full_ap = in.get() == 1;
        const auto n = get_u32(in);
        b.client_ids.resize(n);
        for (auto& id : b.client_ids) {
            id.resize(get_u32(in));
            in.read(id.data(), static_cast<std::streamsize>(id.size()));
        }
        b.ac = read_matrix(in);
    }
    if (b.params.layout == IndexLayout::kPadded) {
        auto in = open_in(fs::path(dir) / "index.bin");
        check_header(in, b.params);
        b.inv = read_matrix(in);
    } else {
        auto in = open_in(fs::path(dir) / "addrlist.bin");
        check_header(in, b.params);
        b.addr = read_matrix(in);
        b.addr_hdv = read_vector(in);
        auto in2 = open_in(fs::path(dir) / "optinv.bin");
        check_header(in2, b.params);
        b.params.x = get_u64(in2);
        b.params.y = get_u64(in2);
        b.params.used_slots = get_u64(in2);
        b.optinv = read_vector(in2);
    }
    {
        auto in = open_in(fs::path(dir) / "files.bin");
        check_header(in, b.params);
        b.params.gamma_ap = get_u64(in);
        b.file_ids = read_vector(in);
        b.ap = read_matrix(in);
        const bool has_full = in.get() == 1;
        if (has_full) b.ap_full = read_matrix(in);
        b.content = read_matrix(in);
    }
    return b;
}

} // namespace docstar
