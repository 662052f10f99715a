#include "gcnbert/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace gcnbert::kernels {

void gemm_reference(std::span<const Real> a, std::span<const Real> b, std::span<Real> c, GemmDims dims,
                    Transpose mode, bool accumulate) {
    const auto [m, k, n] = dims;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Real sum = accumulate ? c[i * n + j] : Real(0);
            for (std::size_t p = 0; p < k; ++p) {
                const Real av = mode == Transpose::Left ? a[p * m + i] : a[i * k + p];
                const Real bv = mode == Transpose::Right ? b[j * k + p] : b[p * n + j];
                sum += av * bv;
            }
            c[i * n + j] = sum;
        }
    }
}

namespace {

void gemm_rows_nn(const Real* a, const Real* b, Real* c, std::size_t i, std::size_t k, std::size_t n) {
    Real* crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
        const Real av = arow[p];
        const Real* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

}  // namespace

void gemm(std::span<const Real> a, std::span<const Real> b, std::span<Real> c, GemmDims dims, Transpose mode,
          bool accumulate) {
    const auto [m, k, n] = dims;
    if (!accumulate) std::fill(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(m * n), Real(0));
    if (m == 0 || n == 0 || k == 0) return;
    // Transposed operands are packed into row-major copies first so that every
    // mode runs the same contiguous row kernel. Each output element still sums
    // its k products in ascending order, exactly like gemm_reference.
    std::vector<Real> packed;
    const Real* ap = a.data();
    const Real* bp = b.data();
    if (mode == Transpose::Left) {
        packed.resize(m * k);
        for (std::size_t p = 0; p < k; ++p) {
            for (std::size_t i = 0; i < m; ++i) packed[i * k + p] = a[p * m + i];
        }
        ap = packed.data();
    } else if (mode == Transpose::Right) {
        packed.resize(k * n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t p = 0; p < k; ++p) packed[p * n + j] = b[j * k + p];
        }
        bp = packed.data();
    }
    const bool parallel = m * k * n >= kParallelThreshold && m > 1 && !omp_in_parallel();
    Real* cp = c.data();
    const auto rows = static_cast<std::ptrdiff_t>(m);

#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
        gemm_rows_nn(ap, bp, cp, static_cast<std::size_t>(ii), k, n);
    }
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int threads) {
    if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace gcnbert::kernels
