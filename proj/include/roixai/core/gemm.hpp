#pragma once

// Row-major matrix products used by the dense kernels. All accumulate into C.
// The summation order is fixed, which keeps results bitwise reproducible.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace roixai::detail {

// Register tile: kMR rows by two 64-byte vectors of C stay in accumulators
// across a packed K block, so the inner loop touches only packed A and B.
inline constexpr std::size_t kMR = 6;
inline constexpr std::size_t kKC = 256;
inline constexpr std::size_t kNC = 2048;

template <class T>
struct Lanes {
  typedef T vec __attribute__((vector_size(64)));
  static constexpr std::size_t width = 64 / sizeof(T);
  static constexpr std::size_t nr = 2 * width;
};

template <class T>
inline void micro_kernel(std::size_t kc, const T* __restrict ap, const T* __restrict bp, T* __restrict acc) {
  using V = typename Lanes<T>::vec;
  constexpr std::size_t W = Lanes<T>::width;
  V c0[kMR] = {}, c1[kMR] = {};
  for (std::size_t k = 0; k < kc; ++k) {
    V b0, b1;
    __builtin_memcpy(&b0, bp + k * 2 * W, sizeof(V));
    __builtin_memcpy(&b1, bp + k * 2 * W + W, sizeof(V));
#pragma GCC unroll 6
    for (std::size_t i = 0; i < kMR; ++i) {
      const T a = ap[k * kMR + i];
      c0[i] += a * b0;
      c1[i] += a * b1;
    }
  }
  for (std::size_t i = 0; i < kMR; ++i) {
    __builtin_memcpy(acc + i * 2 * W, &c0[i], sizeof(V));
    __builtin_memcpy(acc + i * 2 * W + W, &c1[i], sizeof(V));
  }
}

/// C[M,N] += op(A)·op(B) with element strides: A(i,k) = A[i*sam + k*sak],
/// B(k,j) = B[k*sbk + j*sbn]. Transposed layouts are absorbed by packing.
template <class T>
void gemm_strided(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t sam, std::size_t sak, const T* B,
                  std::size_t sbk, std::size_t sbn, T* C) {
  if (M == 0 || N == 0 || K == 0) return;
  constexpr std::size_t kNR = Lanes<T>::nr;
  thread_local std::vector<T> bpack, apack;
  alignas(64) T acc[kMR * kNR];
  for (std::size_t jc = 0; jc < N; jc += kNC) {
    const std::size_t nc = std::min(kNC, N - jc);
    const std::size_t panels = (nc + kNR - 1) / kNR;
    for (std::size_t pc = 0; pc < K; pc += kKC) {
      const std::size_t kc = std::min(kKC, K - pc);
      bpack.assign(panels * kc * kNR, T(0));
      for (std::size_t p = 0; p < panels; ++p) {
        const std::size_t j0 = jc + p * kNR, nr = std::min(kNR, jc + nc - j0);
        T* dst = bpack.data() + p * kc * kNR;
        if (sbn == 1) {
          for (std::size_t k = 0; k < kc; ++k) std::copy_n(B + (pc + k) * sbk + j0, nr, dst + k * kNR);
        } else {
          for (std::size_t j = 0; j < nr; ++j) {
            const T* src = B + (j0 + j) * sbn + pc * sbk;
            for (std::size_t k = 0; k < kc; ++k) dst[k * kNR + j] = src[k * sbk];
          }
        }
      }
      apack.resize(kc * kMR);
      for (std::size_t ic = 0; ic < M; ic += kMR) {
        const std::size_t mr = std::min(kMR, M - ic);
        std::fill(apack.begin(), apack.end(), T(0));
        for (std::size_t i = 0; i < mr; ++i) {
          const T* src = A + (ic + i) * sam + pc * sak;
          for (std::size_t k = 0; k < kc; ++k) apack[k * kMR + i] = src[k * sak];
        }
        for (std::size_t p = 0; p < panels; ++p) {
          const std::size_t j0 = jc + p * kNR, nr = std::min(kNR, jc + nc - j0);
          micro_kernel(kc, apack.data(), bpack.data() + p * kc * kNR, acc);
          for (std::size_t i = 0; i < mr; ++i) {
            T* c = C + (ic + i) * N + j0;
            for (std::size_t j = 0; j < nr; ++j) c[j] += acc[i * kNR + j];
          }
        }
      }
    }
  }
}

/// C[M,N] += A[M,K] * B[K,N]
template <class T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
  gemm_strided(M, N, K, A, K, 1, B, N, 1, C);
}

/// C[M,N] += A[K,M]^T * B[K,N]
template <class T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
  gemm_strided(M, N, K, A, 1, M, B, N, 1, C);
}

/// C[M,N] += A[M,K] * B[N,K]^T
template <class T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
  gemm_strided(M, N, K, A, K, 1, B, 1, K, C);
}

}  // namespace roixai::detail
