#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "docstar/errors.hpp"

namespace docstar {

// Field elements are plain 64-bit residues; the modulus travels in a Field
// context object so one binary can serve deployments with different primes.
using Fe = std::uint64_t;

// Seedable CSPRNG: SHA-256 in counter mode over the seed. Deterministic seeds
// are for test fixtures only; the default constructor seeds from the OS.
class Prng {
public:
    Prng();
    explicit Prng(std::uint64_t seed);
    explicit Prng(std::span<const std::uint8_t> seed);

    std::uint64_t next_u64();
    // Uniform in [0, bound) by rejection sampling; bound > 0.
    std::uint64_t uniform_below(std::uint64_t bound);
    // Uniform in [1, bound).
    std::uint64_t nonzero_below(std::uint64_t bound);
    void fill(std::span<std::uint8_t> out);

private:
    void refill();
    std::array<std::uint8_t, 32> key_{};
    std::uint64_t counter_ = 0;
    std::array<std::uint8_t, 32> block_{};
    std::size_t avail_ = 0;
};

class Field {
public:
    static constexpr Fe kDefaultPrime = 2305843009213693951ULL; // 2^61 - 1
    static constexpr Fe kDemoPrime = 500009; // small modulus used in docs/fixtures

    explicit Field(Fe p = kDefaultPrime) : p_(p) {}

    Fe modulus() const { return p_; }
    Fe reduce(Fe v) const { return v % p_; }

    Fe add(Fe a, Fe b) const {
        Fe s = a + b;
        if (s >= p_ || s < a) s -= p_;
        return s;
    }
    Fe sub(Fe a, Fe b) const { return a >= b ? a - b : a + p_ - b; }
    Fe neg(Fe a) const { return a == 0 ? 0 : p_ - a; }
    Fe mul(Fe a, Fe b) const {
        return static_cast<Fe>((static_cast<__uint128_t>(a) * b) % p_);
    }
    Fe pow(Fe a, Fe e) const;
    Fe inv(Fe a) const { return pow(a, p_ - 2); } // p prime

    Fe random_element(Prng& prng) const { return prng.uniform_below(p_); }
    Fe random_nonzero(Prng& prng) const { return prng.nonzero_below(p_); }

    bool operator==(const Field& o) const { return p_ == o.p_; }

private:
    Fe p_;
};

struct SharePoint {
    std::uint32_t x; // evaluation point, nonzero
    Fe y;
};

// A secret's share image: degree of the hidden polynomial plus the points
// handed to each server. Degree-d needs d+1 points to interpolate.
struct ShareSet {
    int degree = 1;
    std::vector<SharePoint> points;
};

// Split `secret` over a random (or supplied) polynomial of `degree` with the
// secret as constant term, evaluated at `eval_points`. Supplied coefficients
// are low-to-high (a1..ad); omitted ones are drawn uniformly from [1, p).
ShareSet share_secret(const Field& f, Fe secret, int degree,
                      std::span<const std::uint32_t> eval_points, Prng& prng,
                      std::span<const Fe> coefficients = {});

// Lagrange interpolation at x = 0 through the given points.
Fe interpolate_at_zero(const Field& f, std::span<const SharePoint> points);

// Full coefficient recovery (low-to-high) of the unique degree-(k-1)
// polynomial through k points. Used by verification paths that inspect the
// non-constant coefficients of opened answer polynomials.
std::vector<Fe> polynomial_through(const Field& f,
                                   std::span<const SharePoint> points);

// Default server evaluation points: servers S1..S4 sit at x = 1..4.
inline constexpr std::array<std::uint32_t, 4> kServerEvalPoints{1, 2, 3, 4};

} // namespace docstar
