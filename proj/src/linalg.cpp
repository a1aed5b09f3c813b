#include "jrlab/linalg.hpp"

#include <cstdlib>
#include <vector>

#ifdef JRLAB_USE_CBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace jrlab {

void init_blas_threads() {
#ifdef JRLAB_USE_CBLAS
    static const bool done = [] {
        int n = 1;
        if (const char* env = std::getenv("JRLAB_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) n = v;
        }
        openblas_set_num_threads(n);
        return true;
    }();
    (void)done;
#endif
}

#ifdef JRLAB_USE_CBLAS

namespace {

thread_local std::vector<float> f32_a, f32_b, f32_c;

void to_f32(const double* src, std::size_t n, std::vector<float>& dst) {
    dst.resize(n);
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(src[i]);
}

void sgemm_lane(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::size_t m, std::size_t n,
                std::size_t k, double alpha, const double* A, std::size_t lda,
                const double* B, std::size_t ldb, double beta, double* C) {
    const std::size_t a_n = (ta == CblasNoTrans) ? m * k : k * m;
    const std::size_t b_n = (tb == CblasNoTrans) ? k * n : n * k;
    to_f32(A, a_n, f32_a);
    to_f32(B, b_n, f32_b);
    f32_c.resize(m * n);
    if (beta != 0.0)
        for (std::size_t i = 0; i < m * n; ++i) f32_c[i] = static_cast<float>(C[i]);
    cblas_sgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), static_cast<float>(alpha), f32_a.data(),
                static_cast<int>(lda), f32_b.data(), static_cast<int>(ldb),
                static_cast<float>(beta), f32_c.data(), static_cast<int>(n));
    for (std::size_t i = 0; i < m * n; ++i) C[i] = static_cast<double>(f32_c[i]);
}

void gemm(Precision p, CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::size_t m, std::size_t n,
          std::size_t k, double alpha, const double* A, std::size_t lda, const double* B,
          std::size_t ldb, double beta, double* C) {
    init_blas_threads();
    if (m == 0 || n == 0) return;
    if (p == Precision::f32) {
        sgemm_lane(ta, tb, m, n, k, alpha, A, lda, B, ldb, beta, C);
        return;
    }
    cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), alpha, A, static_cast<int>(lda), B,
                static_cast<int>(ldb), beta, C, static_cast<int>(n));
}

}  // namespace

void gemm_nn(Precision p, std::size_t m, std::size_t n, std::size_t k, double alpha,
             const double* A, const double* B, double beta, double* C) {
    gemm(p, CblasNoTrans, CblasNoTrans, m, n, k, alpha, A, k, B, n, beta, C);
}

void gemm_nt(Precision p, std::size_t m, std::size_t n, std::size_t k, double alpha,
             const double* A, const double* B, double beta, double* C) {
    gemm(p, CblasNoTrans, CblasTrans, m, n, k, alpha, A, k, B, k, beta, C);
}

void gemm_tn(Precision p, std::size_t m, std::size_t n, std::size_t k, double alpha,
             const double* A, const double* B, double beta, double* C) {
    gemm(p, CblasTrans, CblasNoTrans, m, n, k, alpha, A, m, B, n, beta, C);
}

#else  // portable fallback, used only when no CBLAS was found at configure time

void gemm_nn(Precision, std::size_t m, std::size_t n, std::size_t k, double alpha,
             const double* A, const double* B, double beta, double* C) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += A[i * k + t] * B[t * n + j];
            C[i * n + j] = alpha * s + beta * C[i * n + j];
        }
}

void gemm_nt(Precision, std::size_t m, std::size_t n, std::size_t k, double alpha,
             const double* A, const double* B, double beta, double* C) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += A[i * k + t] * B[j * k + t];
            C[i * n + j] = alpha * s + beta * C[i * n + j];
        }
}

void gemm_tn(Precision, std::size_t m, std::size_t n, std::size_t k, double alpha,
             const double* A, const double* B, double beta, double* C) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += A[t * m + i] * B[t * n + j];
            C[i * n + j] = alpha * s + beta * C[i * n + j];
        }
}

#endif

}  // namespace jrlab
