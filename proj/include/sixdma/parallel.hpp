#ifndef SIXDMA_PARALLEL_HPP
#define SIXDMA_PARALLEL_HPP

#include <cstddef>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sixdma {

// Execution policy for the data-parallel kernels. Serial is the reference
// path used by tests; OpenMP must produce bit-identical results because
// every kernel writes to per-index slots and reduces with pairwise_sum.
enum class Exec { Serial, OpenMP };

inline Exec& default_exec() {
    static Exec mode = Exec::OpenMP;
    return mode;
}

inline void set_num_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

template <class F>
void parallel_for(std::size_t n, F&& body, Exec mode = default_exec()) {
#ifdef _OPENMP
    if (mode == Exec::OpenMP) {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            body(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)mode;
#endif
    for (std::size_t i = 0; i < n; ++i) body(i);
}

// Fixed-tree pairwise summation: the reduction order depends only on the
// element count, never on thread scheduling.
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.subspan(0, half)) + pairwise_sum(x.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& x) {
    return pairwise_sum(std::span<const double>(x.data(), x.size()));
}

} // namespace sixdma

#endif
