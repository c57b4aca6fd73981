#include "docstar/kernels.hpp"

namespace docstar::kernels {

Policy& policy() {
    static Policy p;
    return p;
}

namespace {
bool go_parallel(std::size_t work) {
    const Policy& p = policy();
    return p.parallel && work >= p.min_work;
}
} // namespace

void scan_columns_serial(const Field& f, std::span<const Fe> sw, Fe uw,
                         std::span<const Fe> ac, std::span<const Fe> rn,
                         std::span<const Fe> m0, std::span<Fe> out) {
    for (std::size_t i = 0; i < sw.size(); i++) {
        Fe t = f.add(f.sub(sw[i], uw), ac[i]);
        out[i] = f.add(f.mul(t, rn[i]), m0[i]);
    }
}

void scan_columns_parallel(const Field& f, std::span<const Fe> sw, Fe uw,
                           std::span<const Fe> ac, std::span<const Fe> rn,
                           std::span<const Fe> m0, std::span<Fe> out) {
    const auto n = static_cast<std::ptrdiff_t>(sw.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; i++) {
        Fe t = f.add(f.sub(sw[i], uw), ac[i]);
        out[i] = f.add(f.mul(t, rn[i]), m0[i]);
    }
}

void scan_columns(const Field& f, std::span<const Fe> sw, Fe uw,
                  std::span<const Fe> ac, std::span<const Fe> rn,
                  std::span<const Fe> m0, std::span<Fe> out) {
    if (go_parallel(sw.size()))
        scan_columns_parallel(f, sw, uw, ac, rn, m0, out);
    else
        scan_columns_serial(f, sw, uw, ac, rn, m0, out);
}

void matvec_columns_serial(const Field& f, std::span<const Fe> m,
                           std::size_t rows, std::size_t cols,
                           std::span<const Fe> v, std::span<Fe> out) {
    for (std::size_t j = 0; j < cols; j++) {
        Fe acc = 0;
        for (std::size_t i = 0; i < rows; i++)
            acc = f.add(acc, f.mul(m[i * cols + j], v[i]));
        out[j] = acc;
    }
}

void matvec_columns_parallel(const Field& f, std::span<const Fe> m,
                             std::size_t rows, std::size_t cols,
                             std::span<const Fe> v, std::span<Fe> out) {
    const auto nc = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < nc; j++) {
        Fe acc = 0;
        for (std::size_t i = 0; i < rows; i++)
            acc = f.add(acc, f.mul(m[i * cols + static_cast<std::size_t>(j)], v[i]));
        out[static_cast<std::size_t>(j)] = acc;
    }
}

void matvec_columns(const Field& f, std::span<const Fe> m, std::size_t rows,
                    std::size_t cols, std::span<const Fe> v, std::span<Fe> out) {
    if (go_parallel(rows * cols))
        matvec_columns_parallel(f, m, rows, cols, v, out);
    else
        matvec_columns_serial(f, m, rows, cols, v, out);
}

void matvec_columns_rows(const Field& f, std::span<const Fe> m,
                         std::size_t cols, std::span<const std::uint32_t> rows,
                         std::span<const Fe> v, std::span<Fe> out) {
    for (std::size_t j = 0; j < cols; j++) {
        Fe acc = 0;
        for (std::size_t i = 0; i < rows.size(); i++)
            acc = f.add(acc, f.mul(m[rows[i] * cols + j], v[i]));
        out[j] = acc;
    }
}

Fe dot_serial(const Field& f, std::span<const Fe> a, std::span<const Fe> b) {
    Fe acc = 0;
    for (std::size_t i = 0; i < a.size(); i++) acc = f.add(acc, f.mul(a[i], b[i]));
    return acc;
}

Fe dot_parallel(const Field& f, std::span<const Fe> a, std::span<const Fe> b) {
    Fe total = 0;
    const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel
    {
        Fe local = 0;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < n; i++)
            local = f.add(local, f.mul(a[i], b[i]));
#pragma omp critical
        total = f.add(total, local);
    }
    return total;
}

Fe dot(const Field& f, std::span<const Fe> a, std::span<const Fe> b) {
    return go_parallel(a.size()) ? dot_parallel(f, a, b) : dot_serial(f, a, b);
}

Fe sum_serial(const Field& f, std::span<const Fe> v) {
    Fe acc = 0;
    for (Fe x : v) acc = f.add(acc, x);
    return acc;
}

Fe sum_parallel(const Field& f, std::span<const Fe> v) {
    Fe total = 0;
    const auto n = static_cast<std::ptrdiff_t>(v.size());
#pragma omp parallel
    {
        Fe local = 0;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < n; i++) local = f.add(local, v[i]);
#pragma omp critical
        total = f.add(total, local);
    }
    return total;
}

Fe sum(const Field& f, std::span<const Fe> v) {
    return go_parallel(v.size()) ? sum_parallel(f, v) : sum_serial(f, v);
}

Fe sum_squares_serial(const Field& f, std::span<const Fe> v) {
    Fe acc = 0;
    for (Fe x : v) acc = f.add(acc, f.mul(x, x));
    return acc;
}

Fe sum_squares_parallel(const Field& f, std::span<const Fe> v) {
    Fe total = 0;
    const auto n = static_cast<std::ptrdiff_t>(v.size());
#pragma omp parallel
    {
        Fe local = 0;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < n; i++)
            local = f.add(local, f.mul(v[i], v[i]));
#pragma omp critical
        total = f.add(total, local);
    }
    return total;
}

Fe sum_squares(const Field& f, std::span<const Fe> v) {
    return go_parallel(v.size()) ? sum_squares_parallel(f, v)
                                 : sum_squares_serial(f, v);
}

void square_minus_self_serial(const Field& f, std::span<const Fe> v,
                              std::span<Fe> out) {
    for (std::size_t i = 0; i < v.size(); i++)
        out[i] = f.sub(f.mul(v[i], v[i]), v[i]);
}

void square_minus_self_parallel(const Field& f, std::span<const Fe> v,
                                std::span<Fe> out) {
    const auto n = static_cast<std::ptrdiff_t>(v.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; i++)
        out[i] = f.sub(f.mul(v[i], v[i]), v[i]);
}

void square_minus_self(const Field& f, std::span<const Fe> v, std::span<Fe> out) {
    if (go_parallel(v.size()))
        square_minus_self_parallel(f, v, out);
    else
        square_minus_self_serial(f, v, out);
}

void mask_add_serial(const Field& f, std::span<const Fe> base,
                     std::span<const Fe> rn, std::span<const Fe> mask,
                     std::span<Fe> out) {
    for (std::size_t i = 0; i < base.size(); i++)
        out[i] = f.add(base[i], f.mul(rn[i], mask[i]));
}

void mask_add_parallel(const Field& f, std::span<const Fe> base,
                       std::span<const Fe> rn, std::span<const Fe> mask,
                       std::span<Fe> out) {
    const auto n = static_cast<std::ptrdiff_t>(base.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; i++)
        out[i] = f.add(base[i], f.mul(rn[i], mask[i]));
}

void mask_add(const Field& f, std::span<const Fe> base, std::span<const Fe> rn,
              std::span<const Fe> mask, std::span<Fe> out) {
    if (go_parallel(base.size()))
        mask_add_parallel(f, base, rn, mask, out);
    else
        mask_add_serial(f, base, rn, mask, out);
}

void scale_mask_add_serial(const Field& f, std::span<Fe> inout, Fe t,
                           std::span<const Fe> rn) {
    for (std::size_t i = 0; i < inout.size(); i++)
        inout[i] = f.add(inout[i], f.mul(t, rn[i]));
}

void scale_mask_add_parallel(const Field& f, std::span<Fe> inout, Fe t,
                             std::span<const Fe> rn) {
    const auto n = static_cast<std::ptrdiff_t>(inout.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; i++)
        inout[i] = f.add(inout[i], f.mul(t, rn[i]));
}

void scale_mask_add(const Field& f, std::span<Fe> inout, Fe t,
                    std::span<const Fe> rn) {
    if (go_parallel(inout.size()))
        scale_mask_add_parallel(f, inout, t, rn);
    else
        scale_mask_add_serial(f, inout, t, rn);
}

} // namespace docstar::kernels
