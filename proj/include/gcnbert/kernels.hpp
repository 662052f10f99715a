#pragma once

#include <cstddef>
#include <span>

#include "gcnbert/tensor.hpp"

// Dense matrix kernels. Each kernel has a plain serial reference version kept
// for testing and benchmarking, and an OpenMP version used by the tensor ops.
// Both accumulate every output element over the inner index in ascending
// order, so they agree bit for bit.
namespace gcnbert::kernels {

enum class Transpose {
    None,   // C = A·B,   A is m×k, B is k×n
    Left,   // C = Aᵀ·B,  A is k×m, B is k×n
    Right,  // C = A·Bᵀ,  A is m×k, B is n×k
};

struct GemmDims {
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t n = 0;
};

void gemm_reference(std::span<const Real> a, std::span<const Real> b, std::span<Real> c, GemmDims dims,
                    Transpose mode, bool accumulate);

void gemm(std::span<const Real> a, std::span<const Real> b, std::span<Real> c, GemmDims dims, Transpose mode,
          bool accumulate);

// Below this many multiply-adds the OpenMP path runs on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

int max_threads();
void set_threads(int threads);

}  // namespace gcnbert::kernels
