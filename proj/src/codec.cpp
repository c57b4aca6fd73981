#include "docstar/codec.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <cctype>
#include <cstring>

namespace docstar {

namespace {

void put_be64(std::uint8_t* out, std::uint64_t v) {
    for (int i = 0; i < 8; i++) out[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
}

Fe digest_to_field(const Field& f, const std::uint8_t md[32]) {
    // Big-endian 256-bit value mod p, via repeated shift-in of bytes.
    Fe acc = 0;
    for (int i = 0; i < 32; i++) {
        acc = f.reduce(static_cast<Fe>(
            (static_cast<__uint128_t>(acc) << 8 | md[i]) % f.modulus()));
    }
    return acc;
}

} // namespace

Fe hash_values(const Field& f, std::span<const Fe> args) {
    std::vector<std::uint8_t> buf(args.size() * 8);
    for (std::size_t i = 0; i < args.size(); i++) put_be64(buf.data() + 8 * i, args[i]);
    std::uint8_t md[32];
    unsigned int len = 0;
    EVP_Digest(buf.data(), buf.size(), md, &len, EVP_sha256(), nullptr);
    return digest_to_field(f, md);
}

Fe hash_values(const Field& f, std::initializer_list<Fe> args) {
    return hash_values(f, std::span<const Fe>(args.begin(), args.size()));
}

KeywordEncoding encode_keyword(const Field& f, std::string_view word,
                               int target_groups) {
    if (word.empty()) throw UnsupportedCharacter("empty word");
    if (static_cast<int>(word.size()) > target_groups)
        throw EncodingOverflow("word longer than target group count");

    KeywordEncoding enc;
    enc.groups.reserve(static_cast<std::size_t>(target_groups));
    for (char c : word) {
        if (!std::isalpha(static_cast<unsigned char>(c)))
            throw UnsupportedCharacter(std::string("non-letter character in word: ") +
                                       std::string(word));
        int k = std::tolower(static_cast<unsigned char>(c)) - 'a' + 1;
        enc.groups.push_back(k + kLetterGroupBase - 1);
    }

    if (static_cast<int>(enc.groups.size()) < target_groups) {
        // Pad stream derived from the word so all parties agree.
        std::uint8_t md[32];
        unsigned int len = 0;
        EVP_Digest(word.data(), word.size(), md, &len, EVP_sha256(), nullptr);
        std::size_t mi = 0;
        while (static_cast<int>(enc.groups.size()) < target_groups) {
            if (mi == 32) {
                EVP_Digest(md, 32, md, &len, EVP_sha256(), nullptr);
                mi = 0;
            }
            enc.groups.push_back(kPadGroupMin + md[mi++] % (kPadGroupMax - kPadGroupMin + 1));
        }
    }

    __uint128_t numeric = 0;
    for (int g : enc.groups) numeric = numeric * 100 + static_cast<unsigned>(g);
    if (numeric >= f.modulus())
        throw EncodingOverflow("numeric encoding does not fit the field");
    enc.numeric = static_cast<Fe>(numeric);
    return enc;
}

Fe hash_chain(const Field& f, std::span<const Fe> items, Fe seed_label) {
    Fe d = hash_values(f, {seed_label});
    for (Fe item : items) d = hash_values(f, {item, d});
    return d;
}

Fe hash_chain_extend(const Field& f, Fe item, Fe chain) {
    return hash_values(f, {item, chain});
}

Fe position_digest_sum(const Field& f, std::span<const std::uint64_t> positions) {
    Fe acc = 0;
    for (std::uint64_t pos : positions) acc = f.add(acc, hash_values(f, {pos}));
    return acc;
}

Fe band_floor_for_groups(int groups) {
    __uint128_t floor = 1;
    for (int i = 0; i < 2 * groups; i++) floor *= 10;
    if (floor > ~static_cast<std::uint64_t>(0))
        throw EncodingOverflow("group count too large for 64-bit band floor");
    return static_cast<Fe>(floor);
}

Fe prg_access_value(const Field& f, std::span<const std::uint8_t> seed,
                    std::string_view keyword, std::string_view client_id,
                    Fe band_floor) {
    if (seed.empty()) throw ConfigError("empty access seed");
    if (band_floor >= f.modulus())
        throw ConfigError("band floor must be below the field modulus");
    std::vector<std::uint8_t> msg;
    msg.reserve(keyword.size() + 1 + client_id.size());
    msg.insert(msg.end(), keyword.begin(), keyword.end());
    msg.push_back(0x00);
    msg.insert(msg.end(), client_id.begin(), client_id.end());

    std::uint8_t md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    HMAC(EVP_sha256(), seed.data(), static_cast<int>(seed.size()), msg.data(),
         msg.size(), md, &len);

    Fe acc = 0;
    const Fe width = f.modulus() - band_floor;
    for (unsigned int i = 0; i < len; i++)
        acc = static_cast<Fe>((static_cast<__uint128_t>(acc) << 8 | md[i]) % width);
    return band_floor + acc;
}

Fe fake_keyword_encoding(const Field& f, int target_groups, int which) {
    const std::string_view label =
        which == kFakeAllowed ? kFakeAllowedLabel : kFakeDeniedLabel;
    std::uint8_t md[32];
    unsigned int len = 0;
    EVP_Digest(label.data(), label.size(), md, &len, EVP_sha256(), nullptr);
    __uint128_t numeric = 0;
    for (int i = 0; i < target_groups; i++) {
        int g = kPadGroupMin + md[i % 32] % (kPadGroupMax - kPadGroupMin + 1);
        numeric = numeric * 100 + static_cast<unsigned>(g);
    }
    if (numeric >= f.modulus())
        throw EncodingOverflow("fake keyword encoding does not fit the field");
    return static_cast<Fe>(numeric);
}

Fe content_pad_word(int groups) {
    __uint128_t numeric = 0;
    for (int i = 0; i < groups; i++) numeric = numeric * 100 + 99;
    return static_cast<Fe>(numeric);
}

bool is_content_pad(const Field& f, Fe word, int groups) {
    (void)f;
    // Any value whose leading group is outside the letter band is padding.
    __uint128_t v = word;
    __uint128_t div = 1;
    for (int i = 0; i < groups - 1; i++) div *= 100;
    auto first = static_cast<unsigned>(v / div);
    return first < kLetterGroupBase || first > kLetterGroupBase + 25;
}

std::string decode_word(const Field& f, Fe value, int groups) {
    (void)f;
    std::vector<int> gs(static_cast<std::size_t>(groups));
    __uint128_t v = value;
    for (int i = groups - 1; i >= 0; i--) {
        gs[static_cast<std::size_t>(i)] = static_cast<int>(v % 100);
        v /= 100;
    }
    if (v != 0) return {};
    std::string out;
    bool in_padding = false;
    for (int g : gs) {
        if (g >= kLetterGroupBase && g <= kLetterGroupBase + 25) {
            if (in_padding) return {}; // letter after padding: not an encoding
            out.push_back(static_cast<char>('a' + g - kLetterGroupBase));
        } else if (g >= kPadGroupMin && g <= kPadGroupMax) {
            in_padding = true;
        } else {
            return {};
        }
    }
    return out;
}

} // namespace docstar
