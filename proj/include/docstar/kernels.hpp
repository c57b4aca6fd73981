#pragma once

#include <cstddef>
#include <span>

#include "docstar/field.hpp"

// Data-parallel inner loops of the query phases. Every kernel exists twice:
// a serial reference (the ground truth the tests compare against) and an
// OpenMP variant. The unqualified entry points dispatch on problem size so
// small deployments skip the fork/join overhead. Field addition is
// commutative and associative mod p, so both variants produce bit-identical
// results.
namespace docstar::kernels {

struct Policy {
    bool parallel = true;
    std::size_t min_work = 1 << 14; // work units below this stay serial
};

Policy& policy();

// ans[i] = (sw[i] - uw + ac[i]) * rn[i] + m0[i]
void scan_columns_serial(const Field& f, std::span<const Fe> sw, Fe uw,
                         std::span<const Fe> ac, std::span<const Fe> rn,
                         std::span<const Fe> m0, std::span<Fe> out);
void scan_columns_parallel(const Field& f, std::span<const Fe> sw, Fe uw,
                           std::span<const Fe> ac, std::span<const Fe> rn,
                           std::span<const Fe> m0, std::span<Fe> out);
void scan_columns(const Field& f, std::span<const Fe> sw, Fe uw,
                  std::span<const Fe> ac, std::span<const Fe> rn,
                  std::span<const Fe> m0, std::span<Fe> out);

// out[j] = sum_i m[i*cols + j] * v[i]   (column-wise dot against every row)
void matvec_columns_serial(const Field& f, std::span<const Fe> m,
                           std::size_t rows, std::size_t cols,
                           std::span<const Fe> v, std::span<Fe> out);
void matvec_columns_parallel(const Field& f, std::span<const Fe> m,
                             std::size_t rows, std::size_t cols,
                             std::span<const Fe> v, std::span<Fe> out);
void matvec_columns(const Field& f, std::span<const Fe> m, std::size_t rows,
                    std::size_t cols, std::span<const Fe> v, std::span<Fe> out);

// Same contraction restricted to a subset of rows (binned file fetches).
void matvec_columns_rows(const Field& f, std::span<const Fe> m,
                         std::size_t cols, std::span<const std::uint32_t> rows,
                         std::span<const Fe> v, std::span<Fe> out);

Fe dot_serial(const Field& f, std::span<const Fe> a, std::span<const Fe> b);
Fe dot_parallel(const Field& f, std::span<const Fe> a, std::span<const Fe> b);
Fe dot(const Field& f, std::span<const Fe> a, std::span<const Fe> b);

Fe sum_serial(const Field& f, std::span<const Fe> v);
Fe sum_parallel(const Field& f, std::span<const Fe> v);
Fe sum(const Field& f, std::span<const Fe> v);

Fe sum_squares_serial(const Field& f, std::span<const Fe> v);
Fe sum_squares_parallel(const Field& f, std::span<const Fe> v);
Fe sum_squares(const Field& f, std::span<const Fe> v);

// out[i] = v[i]^2 - v[i]
void square_minus_self_serial(const Field& f, std::span<const Fe> v,
                              std::span<Fe> out);
void square_minus_self_parallel(const Field& f, std::span<const Fe> v,
                                std::span<Fe> out);
void square_minus_self(const Field& f, std::span<const Fe> v, std::span<Fe> out);

// out[i] = base[i] + rn[i] * mask[i]
void mask_add_serial(const Field& f, std::span<const Fe> base,
                     std::span<const Fe> rn, std::span<const Fe> mask,
                     std::span<Fe> out);
void mask_add_parallel(const Field& f, std::span<const Fe> base,
                       std::span<const Fe> rn, std::span<const Fe> mask,
                       std::span<Fe> out);
void mask_add(const Field& f, std::span<const Fe> base, std::span<const Fe> rn,
              std::span<const Fe> mask, std::span<Fe> out);

// inout[i] += t * rn[i]
void scale_mask_add_serial(const Field& f, std::span<Fe> inout, Fe t,
                           std::span<const Fe> rn);
void scale_mask_add_parallel(const Field& f, std::span<Fe> inout, Fe t,
                             std::span<const Fe> rn);
void scale_mask_add(const Field& f, std::span<Fe> inout, Fe t,
                    std::span<const Fe> rn);

} // namespace docstar::kernels
