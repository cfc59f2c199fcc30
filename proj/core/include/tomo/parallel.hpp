#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tomo {

/// Number of worker threads used by array kernels and operators.
/// Results never depend on this value.
void set_num_threads(int n);
int num_threads();

/// Run `body(i)` for i in [0, n). Iterations must be independent.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(num_threads()) if (count > 1024)
    for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

/// Same as parallel_for but without the small-size cutoff; for loops whose
/// iterations are individually expensive (rays, slices, chunks).
template <class Body>
void parallel_for_coarse(std::size_t n, Body&& body) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(num_threads()) if (count > 1)
    for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

/// Sum of `f(i)` over [0, n) using fixed-size blocks combined in index
/// order, so the rounding is identical for every thread count.
template <class Term>
double deterministic_sum(std::size_t n, Term&& f) {
    constexpr std::size_t block = 4096;
    if (n <= block) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += f(i);
        return s;
    }
    const std::size_t nblocks = (n + block - 1) / block;
    std::vector<double> partial(nblocks, 0.0);
    parallel_for_coarse(nblocks, [&](std::size_t b) {
        const std::size_t lo = b * block;
        const std::size_t hi = lo + block < n ? lo + block : n;
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += f(i);
        partial[b] = s;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace tomo
