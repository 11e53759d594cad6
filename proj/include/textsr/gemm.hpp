#ifndef TEXTSR_GEMM_HPP
#define TEXTSR_GEMM_HPP

#include <cstdint>
#include <cstring>

#include "parallel.hpp"

namespace textsr {

// Row-major C(MxN) (+)= A(MxK) * B(KxN). The inner loop runs over n with a
// register tile held across k, so every output element is a fixed serial sum
// over k: results are bitwise reproducible for any thread count or ISA.
template <typename T>
void gemm_nn_range(int64_t m_lo, int64_t m_hi, int64_t N, int64_t K,
                   const T* A, int64_t lda, const T* B, int64_t ldb,
                   T* C, int64_t ldc, bool accumulate) {
    constexpr int64_t MR = 4;
    constexpr int64_t NR = (sizeof(T) == 4) ? 32 : 16;
    for (int64_t m0 = m_lo; m0 < m_hi; m0 += MR) {
        int64_t mb = (m0 + MR <= m_hi) ? MR : (m_hi - m0);
        if (!accumulate)
            for (int64_t i = 0; i < mb; i++)
                std::memset(C + (m0 + i) * ldc, 0, sizeof(T) * N);
        int64_t n0 = 0;
        for (; n0 + NR <= N; n0 += NR) {
            if (mb == MR) {
                T acc[MR][NR];
                for (int64_t i = 0; i < MR; i++)
                    for (int64_t j = 0; j < NR; j++)
                        acc[i][j] = C[(m0 + i) * ldc + n0 + j];
                const T* a0 = A + m0 * lda;
                for (int64_t k = 0; k < K; k++) {
                    const T* __restrict b = B + k * ldb + n0;
                    const T a_0 = a0[k];
                    const T a_1 = a0[lda + k];
                    const T a_2 = a0[2 * lda + k];
                    const T a_3 = a0[3 * lda + k];
                    for (int64_t j = 0; j < NR; j++) {
                        acc[0][j] += a_0 * b[j];
                        acc[1][j] += a_1 * b[j];
                        acc[2][j] += a_2 * b[j];
                        acc[3][j] += a_3 * b[j];
                    }
                }
                for (int64_t i = 0; i < MR; i++)
                    for (int64_t j = 0; j < NR; j++)
                        C[(m0 + i) * ldc + n0 + j] = acc[i][j];
            } else {
                for (int64_t i = 0; i < mb; i++) {
                    T acc[NR];
                    for (int64_t j = 0; j < NR; j++) acc[j] = C[(m0 + i) * ldc + n0 + j];
                    const T* a = A + (m0 + i) * lda;
                    for (int64_t k = 0; k < K; k++) {
                        const T* __restrict b = B + k * ldb + n0;
                        const T av = a[k];
                        for (int64_t j = 0; j < NR; j++) acc[j] += av * b[j];
                    }
                    for (int64_t j = 0; j < NR; j++) C[(m0 + i) * ldc + n0 + j] = acc[j];
                }
            }
        }
        // n tail
        for (; n0 < N; n0++) {
            for (int64_t i = 0; i < mb; i++) {
                T s = C[(m0 + i) * ldc + n0];
                const T* a = A + (m0 + i) * lda;
                for (int64_t k = 0; k < K; k++) s += a[k] * B[k * ldb + n0];
                C[(m0 + i) * ldc + n0] = s;
            }
        }
    }
}

template <typename T>
void gemm_nn(int64_t M, int64_t N, int64_t K,
             const T* A, int64_t lda, const T* B, int64_t ldb,
             T* C, int64_t ldc, bool accumulate = false) {
    // Parallel split over disjoint row ranges of C.
    const int64_t flops = M * N * K;
    if (flops < (1 << 18) || M < 8) {
        gemm_nn_range(0, M, N, K, A, lda, B, ldb, C, ldc, accumulate);
        return;
    }
    int nt = ThreadPool::instance().threads();
    int64_t rows_per = ((M + nt - 1) / nt + 3) & ~int64_t(3);
    int64_t nchunks = (M + rows_per - 1) / rows_per;
    parallel_for(nchunks, [&](int64_t c_lo, int64_t c_hi) {
        for (int64_t c = c_lo; c < c_hi; c++) {
            int64_t m_lo = c * rows_per;
            int64_t m_hi = std::min<int64_t>(M, m_lo + rows_per);
            gemm_nn_range(m_lo, m_hi, N, K, A, lda, B, ldb, C, ldc, accumulate);
        }
    });
}

// Fixed 8-lane dot product; the summation order is defined here, not by the
// compiler, so values do not depend on vector width.
template <typename T>
T dot_lanes(const T* __restrict a, const T* __restrict b, int64_t n) {
    constexpr int64_t L = 8;
    T acc[L] = {};
    int64_t i = 0;
    for (; i + L <= n; i += L)
        for (int64_t j = 0; j < L; j++) acc[j] += a[i + j] * b[i + j];
    T tail = T(0);
    for (; i < n; i++) tail += a[i] * b[i];
    T s = T(0);
    for (int64_t j = 0; j < L; j++) s += acc[j];
    return s + tail;
}

// C(MxN) (+)= A(MxK) * B(NxK)^T  (both row-major, contraction over the
// contiguous K axis of each).
template <typename T>
void gemm_abt(int64_t M, int64_t N, int64_t K,
              const T* A, int64_t lda, const T* B, int64_t ldb,
              T* C, int64_t ldc, bool accumulate = false) {
    for (int64_t m = 0; m < M; m++)
        for (int64_t n = 0; n < N; n++) {
            T v = dot_lanes(A + m * lda, B + n * ldb, K);
            T* c = C + m * ldc + n;
            *c = accumulate ? *c + v : v;
        }
}

template <typename T>
void transpose(int64_t M, int64_t N, const T* A, T* At) {
    constexpr int64_t BLK = 32;
    for (int64_t i0 = 0; i0 < M; i0 += BLK)
        for (int64_t j0 = 0; j0 < N; j0 += BLK) {
            int64_t i1 = std::min(M, i0 + BLK), j1 = std::min(N, j0 + BLK);
            for (int64_t i = i0; i < i1; i++)
                for (int64_t j = j0; j < j1; j++)
                    At[j * M + i] = A[i * N + j];
        }
}

}  // namespace textsr

#endif  // TEXTSR_GEMM_HPP
