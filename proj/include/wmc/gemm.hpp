#pragma once

#include <cstdint>

namespace wmc {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
// Parallelism is over rows of C only and each row accumulates in a fixed
// k-order, so results are bit-identical for any thread count.
template <class T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
          const T* a, int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
    if (m <= 0 || n <= 0) {
        return;
    }
#pragma omp parallel for schedule(static) if (m * n * k > 1 << 14)
    for (int64_t i = 0; i < m; ++i) {
        T* crow = c + i * ldc;
        if (beta == T(0)) {
            for (int64_t j = 0; j < n; ++j) {
                crow[j] = T(0);
            }
        } else if (beta != T(1)) {
            for (int64_t j = 0; j < n; ++j) {
                crow[j] *= beta;
            }
        }
        if (!trans_a && !trans_b) {
            // C[i,:] += alpha * sum_k A[i,k] * B[k,:]
            const T* arow = a + i * lda;
            for (int64_t p = 0; p < k; ++p) {
                const T av = alpha * arow[p];
                if (av == T(0)) {
                    continue;
                }
                const T* brow = b + p * ldb;
                for (int64_t j = 0; j < n; ++j) {
                    crow[j] += av * brow[j];
                }
            }
        } else if (trans_a && !trans_b) {
            // A is stored k x m; A^T[i,p] = A[p,i]
            for (int64_t p = 0; p < k; ++p) {
                const T av = alpha * a[p * lda + i];
                if (av == T(0)) {
                    continue;
                }
                const T* brow = b + p * ldb;
                for (int64_t j = 0; j < n; ++j) {
                    crow[j] += av * brow[j];
                }
            }
        } else if (!trans_a && trans_b) {
            // C[i,j] += alpha * dot(A[i,:], B[j,:]); B stored n x k
            const T* arow = a + i * lda;
            for (int64_t j = 0; j < n; ++j) {
                const T* brow = b + j * ldb;
                T acc = T(0);
                for (int64_t p = 0; p < k; ++p) {
                    acc += arow[p] * brow[p];
                }
                crow[j] += alpha * acc;
            }
        } else {
            for (int64_t j = 0; j < n; ++j) {
                T acc = T(0);
                for (int64_t p = 0; p < k; ++p) {
                    acc += a[p * lda + i] * b[j * ldb + p];
                }
                crow[j] += alpha * acc;
            }
        }
    }
}

}  // namespace wmc
