#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace docstar {

// Reason codes carried by ABORT frames. Values are part of the wire format.
enum class AbortReason : std::uint16_t {
    kNone = 0,
    kMalformedVectorA = 1,   // Test A: sum != 1
    kMalformedVectorB = 2,   // Test B: sum of squares != 1
    kMalformedVectorC = 3,   // Test C: some v^2 - v != 0
    kAccessDenied = 4,       // Test 1 opened nonzero
    kTest2Failed = 5,        // claimed file-id mismatch
    kTest4Failed = 6,        // kpv digest mismatch
    kOptinvVerifyFailed = 7, // row_vec/pos_vec digest mismatch
    kTamperedRandomness = 8,
    kMaliciousServerDetected = 9,
    kPeerTimeout = 10,
    kUnknownClient = 11,
    kBadUpdate = 12,
    kProtocol = 13,
};

const char* abort_reason_name(AbortReason r);

// Thrown inside server handlers; converted to an ABORT frame at the session
// boundary.
struct AbortError : std::runtime_error {
    AbortReason reason;
    explicit AbortError(AbortReason r)
        : std::runtime_error(abort_reason_name(r)), reason(r) {}
};

struct InvalidEvalPoints : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct UnsupportedCharacter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct EncodingOverflow : std::overflow_error {
    using std::overflow_error::overflow_error;
};
struct DuplicateKeyword : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct LayoutOverflow : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct RowFull : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadAddress : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InsufficientBins : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct FramingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PeerTimeout : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace docstar
