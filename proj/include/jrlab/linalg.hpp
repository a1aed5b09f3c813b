#pragma once

#include <cstddef>

namespace jrlab {

// Numeric lane for dense products.  f64 is the default everywhere; f32
// routes the large matrix products through single precision for roughly a
// 2x step-time saving and is opt-in per model.
enum class Precision { f64, f32 };

// Row-major GEMM wrappers over BLAS.  `beta` selects overwrite (0.0) or
// accumulate (1.0) into C.

// C[m x n] (+)= alpha * A[m x k] * B[k x n]
void gemm_nn(Precision p, std::size_t m, std::size_t n, std::size_t k,
             double alpha, const double* A, const double* B, double beta, double* C);

// C[m x n] (+)= alpha * A[m x k] * B[n x k]^T
void gemm_nt(Precision p, std::size_t m, std::size_t n, std::size_t k,
             double alpha, const double* A, const double* B, double beta, double* C);

// C[m x n] (+)= alpha * A[k x m]^T * B[k x n]
void gemm_tn(Precision p, std::size_t m, std::size_t n, std::size_t k,
             double alpha, const double* A, const double* B, double beta, double* C);

// Caps BLAS at one thread per process-wide setting; called lazily by the
// wrappers so results do not depend on ambient thread pools.
void init_blas_threads();

}  // namespace jrlab
