#include <doctest.h>

#include <openssl/evp.h>

#include "docstar/codec.hpp"

using namespace docstar;

namespace {

// Independent digest oracle: raw EVP calls over big-endian byte buffers,
// sharing no code with codec's hash_values.
Fe raw_hash(const Field& f, std::initializer_list<Fe> args) {
    std::vector<std::uint8_t> buf;
    for (Fe a : args)
        for (int i = 7; i >= 0; i--) buf.push_back(static_cast<std::uint8_t>(a >> (8 * i)));
    std::uint8_t md[32];
    unsigned int len = 0;
    EVP_Digest(buf.data(), buf.size(), md, &len, EVP_sha256(), nullptr);
    Fe acc = 0;
    for (int i = 0; i < 32; i++)
        acc = static_cast<Fe>((static_cast<__uint128_t>(acc) << 8 | md[i]) % f.modulus());
    return acc;
}

} // namespace

TEST_CASE("letter-position encoding matches the worked values") {
    Field f(Field::kDemoPrime);
    CHECK(encode_keyword(f, "are", 3).numeric == 112815);
    CHECK(encode_keyword(f, "ana", 3).numeric == 112411);
    CHECK(encode_keyword(f, "fig", 3).numeric == 161917);
    CHECK(encode_keyword(f, "ARE", 3).numeric == 112815); // case folded
}

TEST_CASE("padding groups sit in the pad band and are deterministic") {
    Field f;
    auto a = encode_keyword(f, "jo", 4);
    auto b = encode_keyword(f, "jo", 4);
    CHECK(a.numeric == b.numeric);
    REQUIRE(a.groups.size() == 4);
    CHECK(a.groups[0] == 20);
    CHECK(a.groups[1] == 25);
    for (std::size_t i = 2; i < 4; i++) {
        CHECK(a.groups[i] >= kPadGroupMin);
        CHECK(a.groups[i] <= kPadGroupMax);
    }
}

TEST_CASE("encoding rejects unsupported inputs") {
    Field f;
    CHECK_THROWS_AS(encode_keyword(f, "king!", 6), UnsupportedCharacter);
    CHECK_THROWS_AS(encode_keyword(f, "", 3), UnsupportedCharacter);
    CHECK_THROWS_AS(encode_keyword(f, "abcd", 3), EncodingOverflow);
    Field small(Field::kDemoPrime);
    CHECK_THROWS_AS(encode_keyword(small, "abcd", 4), EncodingOverflow);
}

TEST_CASE("encoding is injective across distinct words") {
    Field f;
    const char* words[] = {"a",    "are",  "ana",  "fig",  "king", "horror",
                           "jo",   "john", "joy",  "tort", "data", "store"};
    for (std::size_t i = 0; i < std::size(words); i++)
        for (std::size_t j = i + 1; j < std::size(words); j++)
            CHECK(encode_keyword(f, words[i], 8).numeric !=
                  encode_keyword(f, words[j], 8).numeric);
}

TEST_CASE("chained digest matches the frozen and raw oracles") {
    // Frozen values computed with a standalone SHA-256 script.
    {
        Field f(Field::kDemoPrime);
        const Fe enc = 112815;
        CHECK(hash_chain(f, {}, enc) == 182174);
        const std::vector<Fe> items{1, 2};
        CHECK(hash_chain(f, items, enc) == 216341);
    }
    {
        Field f; // 2^61 - 1
        const Fe enc = 112815;
        CHECK(hash_chain(f, {}, enc) == 1392340513681395217ULL);
        const std::vector<Fe> items{1, 2};
        CHECK(hash_chain(f, items, enc) == 1255218524254915904ULL);
        // Same value through the independent byte-level oracle.
        CHECK(hash_chain(f, items, enc) ==
              raw_hash(f, {2, raw_hash(f, {1, raw_hash(f, {enc})})}));
    }
}

TEST_CASE("incremental chain law holds on every prefix") {
    Field f;
    Prng prng(11);
    std::vector<Fe> items;
    for (int i = 0; i < 16; i++) items.push_back(f.random_element(prng));
    const Fe seed = f.random_element(prng);
    Fe running = hash_chain(f, {}, seed);
    for (std::size_t k = 0; k < items.size(); k++) {
        running = hash_chain_extend(f, items[k], running);
        CHECK(running == hash_chain(f, std::span<const Fe>(items.data(), k + 1), seed));
    }
}

TEST_CASE("position digest sums") {
    {
        Field f(Field::kDemoPrime);
        const std::vector<std::uint64_t> pos{1, 2, 3};
        CHECK(position_digest_sum(f, pos) == 50577); // frozen oracle value
    }
    Field f;
    const std::vector<std::uint64_t> pos{1, 2, 3};
    CHECK(position_digest_sum(f, pos) == 1033092061158860013ULL);
    CHECK(position_digest_sum(f, {}) == 0);
    const std::vector<std::uint64_t> one{77};
    CHECK(position_digest_sum(f, one) == raw_hash(f, {77}));
}

TEST_CASE("access band values are deterministic and above every encoding") {
    Field f;
    const std::vector<std::uint8_t> seed{1, 2, 3, 4};
    const Fe floor = band_floor_for_groups(6);
    const Fe v1 = prg_access_value(f, seed, "horror", "alice", floor);
    const Fe v2 = prg_access_value(f, seed, "horror", "alice", floor);
    CHECK(v1 == v2);
    CHECK(v1 >= floor);
    CHECK(v1 < f.modulus());
    CHECK(prg_access_value(f, seed, "horror", "bob", floor) != v1);
    CHECK(prg_access_value(f, seed, "comedy", "alice", floor) != v1);
    // Every 6-group encoding stays strictly below the band.
    CHECK(encode_keyword(f, "zzzzzz", 6).numeric < floor);
    CHECK(fake_keyword_encoding(f, 6, kFakeAllowed) < floor);
    CHECK(fake_keyword_encoding(f, 6, kFakeDenied) < floor);
}

TEST_CASE("fake keyword encodings never collide with real words") {
    Field f;
    for (int which : {kFakeAllowed, kFakeDenied}) {
        const Fe fake = fake_keyword_encoding(f, 4, which);
        // Leading group is in the pad band, above every letter-led encoding.
        CHECK(fake > encode_keyword(f, "zzzz", 4).numeric);
    }
    CHECK(fake_keyword_encoding(f, 4, kFakeAllowed) !=
          fake_keyword_encoding(f, 4, kFakeDenied));
}

TEST_CASE("content padding words round-trip as absent") {
    Field f;
    const Fe pad = content_pad_word(5);
    CHECK(is_content_pad(f, pad, 5));
    CHECK(is_content_pad(f, 0, 5));
    const Fe word = encode_keyword(f, "fruit", 5).numeric;
    CHECK(!is_content_pad(f, word, 5));
    CHECK(decode_word(f, word, 5) == "fruit");
    CHECK(decode_word(f, encode_keyword(f, "fig", 5).numeric, 5) == "fig");
}
