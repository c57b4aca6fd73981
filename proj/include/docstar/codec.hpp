#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docstar/field.hpp"

namespace docstar {

// Letter a..z -> 11..36; padding groups live in 37..99 so no padded encoding
// can collide with a letter prefix. Content padding words are all-99 groups.
inline constexpr int kLetterGroupBase = 11;
inline constexpr int kPadGroupMin = 37;
inline constexpr int kPadGroupMax = 99;

struct KeywordEncoding {
    std::vector<int> groups; // two-digit groups, letters then padding
    Fe numeric = 0;          // base-10 concatenation of the groups
};

// Canonical digest: SHA-256 over the concatenated 8-byte big-endian encodings
// of the arguments, read big-endian and reduced mod p.
Fe hash_values(const Field& f, std::span<const Fe> args);
Fe hash_values(const Field& f, std::initializer_list<Fe> args);

// Encode a word as letter groups plus padding groups up to target_groups.
// Padding is derived from the word itself (SHA-256 stream mapped into
// [37, 99]) so every party producing shares of the same word agrees on the
// numeric value while padded tails still look like arbitrary group noise.
KeywordEncoding encode_keyword(const Field& f, std::string_view word,
                               int target_groups);

// Left fold of the chained digest: d0 = H(seed_label); d_k = H(item_k, d_{k-1}).
Fe hash_chain(const Field& f, std::span<const Fe> items, Fe seed_label);
// One incremental step: appending `item` to a chain with digest `chain`.
Fe hash_chain_extend(const Field& f, Fe item, Fe chain);

// Sum of H(pos) over the given positions, mod p.
Fe position_digest_sum(const Field& f, std::span<const std::uint64_t> positions);

// Smallest value strictly above every possible encoding of `groups` groups,
// i.e. 10^(2*groups). Denied-access cells live in [band_floor, p).
Fe band_floor_for_groups(int groups);

// Deterministic denied-access cell value: HMAC-SHA-256(seed, keyword || 0x00
// || client_id) mapped into [band_floor, p). Determinism is what makes grant
// (subtract) and revoke (add) cancel exactly.
Fe prg_access_value(const Field& f, std::span<const std::uint8_t> seed,
                    std::string_view keyword, std::string_view client_id,
                    Fe band_floor);

// Reserved keyword-slot encodings for the two fake columns. Their first group
// is in the padding band, so they can never equal a real word's encoding, yet
// they stay below band_floor like every other keyword.
Fe fake_keyword_encoding(const Field& f, int target_groups, int which);
inline constexpr int kFakeAllowed = 0;
inline constexpr int kFakeDenied = 1;
inline constexpr std::string_view kFakeAllowedLabel = "__fake_allowed__";
inline constexpr std::string_view kFakeDeniedLabel = "__fake_denied__";

// All-99 groups; marks padding slots in file contents.
Fe content_pad_word(int groups);
// True if an opened content word is a padding word rather than a real word.
bool is_content_pad(const Field& f, Fe word, int groups);

// Inverse of encode_keyword for opened content/keyword values: strips padding
// groups and maps letter groups back to characters. Returns empty if the
// value does not parse as an encoding.
std::string decode_word(const Field& f, Fe value, int groups);

} // namespace docstar
