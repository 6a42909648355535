// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "stt/simd/kernels.hpp"

namespace stt::simd::scalar {

template <typename T>
void gemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k,
          T alpha, const T* a, std::int64_t lda, const T* b, std::int64_t ldb,
          T beta, T* c, std::int64_t ldc) {
  for (std::int64_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      std::fill(crow, crow + n, T(0));
    } else if (beta != T(1)) {
      for (std::int64_t j = 0; j < n; ++j) crow[j] *= beta;
    }
  }
  if (m == 0 || n == 0 || k == 0) return;

  if (tb == Trans::kNo) {
    // i-p-j order keeps the B and C rows contiguous.
    for (std::int64_t i = 0; i < m; ++i) {
      T* crow = c + i * ldc;
      for (std::int64_t p = 0; p < k; ++p) {
        const T av = ta == Trans::kNo ? a[i * lda + p] : a[p * lda + i];
        if (av == T(0)) continue;
        const T s = alpha * av;
        const T* brow = b + p * ldb;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    }
    return;
  }
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const T* bcol = b + j * ldb;
      T acc = 0;
      for (std::int64_t p = 0; p < k; ++p) {
        const T av = ta == Trans::kNo ? a[i * lda + p] : a[p * lda + i];
        acc += av * bcol[p];
      }
      c[i * ldc + j] += alpha * acc;
    }
  }
}

template <typename T>
T dot(std::span<const T> x, std::span<const T> y) {
  T acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(T alpha, std::span<T> x) {
  for (auto& v : x) v *= alpha;
}

template <typename T>
void add(std::span<const T> a, std::span<const T> b, std::span<T> out) {
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
}

template <typename T>
void mul(std::span<const T> a, std::span<const T> b, std::span<T> out) {
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
}

template <typename T>
void relu(std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(std::span<const T> x, std::span<const T> gy,
                   std::span<T> gx) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > T(0)) gx[i] += gy[i];
  }
}

template <typename T>
void softmax_rows(std::int64_t rows, std::int64_t n, const T* x, T* y) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x + r * n;
    T* yr = y + r * n;
    const T mx = *std::max_element(xr, xr + n);
    T total = 0;
    for (std::int64_t j = 0; j < n; ++j) total += (yr[j] = std::exp(xr[j] - mx));
    const T inv = T(1) / total;
    for (std::int64_t j = 0; j < n; ++j) yr[j] *= inv;
  }
}

template <typename T>
void softmax_rows_backward(std::int64_t rows, std::int64_t n, const T* y, const T* gy,
                           T* gx) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* yr = y + r * n;
    const T* gr = gy + r * n;
    T d = 0;
    for (std::int64_t j = 0; j < n; ++j) d += gr[j] * yr[j];
    T* out = gx + r * n;
    for (std::int64_t j = 0; j < n; ++j) out[j] += yr[j] * (gr[j] - d);
  }
}

#define STT_INSTANTIATE(T)                                                   \
  template void gemm<T>(Trans, Trans, std::int64_t, std::int64_t,            \
                        std::int64_t, T, const T*, std::int64_t, const T*,   \
                        std::int64_t, T, T*, std::int64_t);                  \
  template T dot<T>(std::span<const T>, std::span<const T>);                 \
  template void axpy<T>(T, std::span<const T>, std::span<T>);                \
  template void scale<T>(T, std::span<T>);                                   \
  template void add<T>(std::span<const T>, std::span<const T>, std::span<T>); \
  template void mul<T>(std::span<const T>, std::span<const T>, std::span<T>); \
  template void relu<T>(std::span<const T>, std::span<T>);                   \
  template void relu_backward<T>(std::span<const T>, std::span<const T>,     \
                                 std::span<T>);                              \
  template void softmax_rows<T>(std::int64_t, std::int64_t, const T*, T*);    \
  template void softmax_rows_backward<T>(std::int64_t, std::int64_t, const T*, \
                                         const T*, T*);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)

#undef STT_INSTANTIATE

}  // namespace stt::simd::scalar
