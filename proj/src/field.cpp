#include "docstar/field.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cstring>
#include <random>

namespace docstar {

namespace {

void sha256(std::span<const std::uint8_t> in, std::uint8_t out[32]) {
    unsigned int len = 0;
    EVP_Digest(in.data(), in.size(), out, &len, EVP_sha256(), nullptr);
}

} // namespace

Prng::Prng() {
    if (RAND_bytes(key_.data(), static_cast<int>(key_.size())) != 1) {
        // RAND_bytes failing is effectively unheard of; fall back to
        // random_device so the process can still make progress.
        std::random_device rd;
        for (auto& b : key_) b = static_cast<std::uint8_t>(rd());
    }
}

Prng::Prng(std::uint64_t seed) {
    std::uint8_t buf[8];
    for (int i = 0; i < 8; i++) buf[i] = static_cast<std::uint8_t>(seed >> (56 - 8 * i));
    sha256({buf, 8}, key_.data());
}

Prng::Prng(std::span<const std::uint8_t> seed) {
    sha256(seed, key_.data());
}

void Prng::refill() {
    std::uint8_t buf[40];
    std::memcpy(buf, key_.data(), 32);
    for (int i = 0; i < 8; i++)
        buf[32 + i] = static_cast<std::uint8_t>(counter_ >> (56 - 8 * i));
    counter_++;
    sha256({buf, 40}, block_.data());
    avail_ = block_.size();
}

std::uint64_t Prng::next_u64() {
    if (avail_ < 8) refill();
    std::uint64_t v = 0;
    const std::size_t off = block_.size() - avail_;
    for (int i = 0; i < 8; i++) v = (v << 8) | block_[off + i];
    avail_ -= 8;
    return v;
}

std::uint64_t Prng::uniform_below(std::uint64_t bound) {
    // Rejection sampling keeps the distribution exactly uniform.
    const std::uint64_t limit = bound * ((~0ULL) / bound);
    for (;;) {
        std::uint64_t v = next_u64();
        if (v < limit) return v % bound;
    }
}

std::uint64_t Prng::nonzero_below(std::uint64_t bound) {
    return 1 + uniform_below(bound - 1);
}

void Prng::fill(std::span<std::uint8_t> out) {
    for (auto& b : out) {
        if (avail_ == 0) refill();
        b = block_[block_.size() - avail_];
        avail_--;
    }
}

Fe Field::pow(Fe a, Fe e) const {
    Fe r = 1;
    Fe base = a % p_;
    while (e) {
        if (e & 1) r = mul(r, base);
        base = mul(base, base);
        e >>= 1;
    }
    return r;
}

ShareSet share_secret(const Field& f, Fe secret, int degree,
                      std::span<const std::uint32_t> eval_points, Prng& prng,
                      std::span<const Fe> coefficients) {
    if (degree < 1) throw InvalidEvalPoints("sharing degree must be >= 1");
    if (!coefficients.empty() &&
        coefficients.size() != static_cast<std::size_t>(degree))
        throw InvalidEvalPoints("coefficient count must equal degree");
    for (std::size_t i = 0; i < eval_points.size(); i++) {
        if (eval_points[i] == 0)
            throw InvalidEvalPoints("evaluation point 0 is reserved for the secret");
        for (std::size_t j = i + 1; j < eval_points.size(); j++)
            if (eval_points[i] == eval_points[j])
                throw InvalidEvalPoints("duplicate evaluation point");
    }

    std::vector<Fe> coeffs(static_cast<std::size_t>(degree));
    for (int i = 0; i < degree; i++)
        coeffs[static_cast<std::size_t>(i)] =
            coefficients.empty() ? f.random_nonzero(prng)
                                 : f.reduce(coefficients[static_cast<std::size_t>(i)]);

    ShareSet out;
    out.degree = degree;
    out.points.reserve(eval_points.size());
    for (std::uint32_t x : eval_points) {
        // Horner evaluation of secret + a1*x + ... + ad*x^d.
        Fe y = 0;
        for (int i = degree - 1; i >= 0; i--)
            y = f.mul(f.add(y, coeffs[static_cast<std::size_t>(i)]), x % f.modulus());
        y = f.add(y, f.reduce(secret));
        out.points.push_back({x, y});
    }
    return out;
}

Fe interpolate_at_zero(const Field& f, std::span<const SharePoint> points) {
    if (points.size() < 2)
        throw InvalidEvalPoints("need at least two points to interpolate");
    for (std::size_t i = 0; i < points.size(); i++)
        for (std::size_t j = i + 1; j < points.size(); j++)
            if (points[i].x == points[j].x)
                throw InvalidEvalPoints("duplicate evaluation point");

    Fe acc = 0;
    for (std::size_t i = 0; i < points.size(); i++) {
        Fe num = 1, den = 1;
        const Fe xi = points[i].x % f.modulus();
        for (std::size_t j = 0; j < points.size(); j++) {
            if (j == i) continue;
            const Fe xj = points[j].x % f.modulus();
            num = f.mul(num, xj);
            den = f.mul(den, f.sub(xj, xi));
        }
        acc = f.add(acc, f.mul(points[i].y, f.mul(num, f.inv(den))));
    }
    return acc;
}

std::vector<Fe> polynomial_through(const Field& f,
                                   std::span<const SharePoint> points) {
    const std::size_t k = points.size();
    if (k == 0) return {};
    std::vector<Fe> coeffs(k, 0);
    // Sum of Lagrange basis polynomials scaled by y_i, expanded to
    // coefficient form: basis_i(x) = prod_{j!=i} (x - x_j) / (x_i - x_j).
    for (std::size_t i = 0; i < k; i++) {
        std::vector<Fe> basis{1};
        Fe den = 1;
        const Fe xi = points[i].x % f.modulus();
        for (std::size_t j = 0; j < k; j++) {
            if (j == i) continue;
            const Fe xj = points[j].x % f.modulus();
            std::vector<Fe> next(basis.size() + 1, 0);
            for (std::size_t d = 0; d < basis.size(); d++) {
                next[d + 1] = f.add(next[d + 1], basis[d]);
                next[d] = f.add(next[d], f.mul(basis[d], f.neg(xj)));
            }
            basis = std::move(next);
            den = f.mul(den, f.sub(xi, xj));
        }
        const Fe scale = f.mul(points[i].y, f.inv(den));
        for (std::size_t d = 0; d < basis.size(); d++)
            coeffs[d] = f.add(coeffs[d], f.mul(basis[d], scale));
    }
    return coeffs;
}

const char* abort_reason_name(AbortReason r) {
    switch (r) {
        case AbortReason::kNone: return "none";
        case AbortReason::kMalformedVectorA: return "test A failed";
        case AbortReason::kMalformedVectorB: return "test B failed";
        case AbortReason::kMalformedVectorC: return "test C failed";
        case AbortReason::kAccessDenied: return "test 1 failed: access denied";
        case AbortReason::kTest2Failed: return "test 2 failed";
        case AbortReason::kTest4Failed: return "test 4 failed";
        case AbortReason::kOptinvVerifyFailed: return "optinv vector verification failed";
        case AbortReason::kTamperedRandomness: return "randomness verification failed";
        case AbortReason::kMaliciousServerDetected: return "share subsets disagree";
        case AbortReason::kPeerTimeout: return "peer timeout";
        case AbortReason::kUnknownClient: return "unknown client";
        case AbortReason::kBadUpdate: return "bad update";
        case AbortReason::kProtocol: return "protocol error";
    }
    return "unknown";
}

} // namespace docstar
