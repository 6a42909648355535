// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

// Dense inner-loop kernels used by the tensor ops. Every kernel has a scalar
// reference in `stt::simd::scalar` and an AVX2/FMA variant in
// `stt::simd::avx2`; the unqualified entry points dispatch on the ISA chosen
// at startup (or forced through set_active_isa / STT_SIMD=scalar).

namespace stt::simd {

enum class Isa { kScalar, kAvx2 };

enum class Trans { kNo, kYes };

/// Best ISA the running CPU supports.
Isa detected_isa();
Isa active_isa();
/// Throws std::invalid_argument if the CPU cannot run `isa`.
void set_active_isa(Isa isa);
const char* isa_name(Isa isa);

// Row-major C = alpha * op(A) * op(B) + beta * C, where op(A) is m x k and
// op(B) is k x n. When beta == 0, C is overwritten without being read.
template <typename T>
void gemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k,
          T alpha, const T* a, std::int64_t lda, const T* b, std::int64_t ldb,
          T beta, T* c, std::int64_t ldc);

template <typename T>
T dot(std::span<const T> x, std::span<const T> y);
// y += alpha * x
template <typename T>
void axpy(T alpha, std::span<const T> x, std::span<T> y);
template <typename T>
void scale(T alpha, std::span<T> x);
// out = a + b, out = a * b (out may alias a or b)
template <typename T>
void add(std::span<const T> a, std::span<const T> b, std::span<T> out);
template <typename T>
void mul(std::span<const T> a, std::span<const T> b, std::span<T> out);
// y = max(x, 0)
template <typename T>
void relu(std::span<const T> x, std::span<T> y);
// gx += (x > 0) ? gy : 0
template <typename T>
void relu_backward(std::span<const T> x, std::span<const T> gy,
                   std::span<T> gx);
// y[r, :] = softmax(x[r, :]) for `rows` contiguous rows of length n
template <typename T>
void softmax_rows(std::int64_t rows, std::int64_t n, const T* x, T* y);
// gx[r, :] += y * (gy - <gy, y>)
template <typename T>
void softmax_rows_backward(std::int64_t rows, std::int64_t n, const T* y, const T* gy,
                           T* gx);

#define STT_SIMD_DECLARE_VARIANT(ns)                                          \
  namespace ns {                                                              \
  template <typename T>                                                       \
  void gemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n,               \
            std::int64_t k, T alpha, const T* a, std::int64_t lda,            \
            const T* b, std::int64_t ldb, T beta, T* c, std::int64_t ldc);    \
  template <typename T>                                                       \
  T dot(std::span<const T> x, std::span<const T> y);                          \
  template <typename T>                                                       \
  void axpy(T alpha, std::span<const T> x, std::span<T> y);                   \
  template <typename T>                                                       \
  void scale(T alpha, std::span<T> x);                                        \
  template <typename T>                                                       \
  void add(std::span<const T> a, std::span<const T> b, std::span<T> out);     \
  template <typename T>                                                       \
  void mul(std::span<const T> a, std::span<const T> b, std::span<T> out);     \
  template <typename T>                                                       \
  void relu(std::span<const T> x, std::span<T> y);                            \
  template <typename T>                                                       \
  void relu_backward(std::span<const T> x, std::span<const T> gy,             \
                     std::span<T> gx);                                        \
  template <typename T>                                                       \
  void softmax_rows(std::int64_t rows, std::int64_t n, const T* x, T* y);     \
  template <typename T>                                                       \
  void softmax_rows_backward(std::int64_t rows, std::int64_t n, const T* y,   \
                             const T* gy, T* gx);                             \
  }

STT_SIMD_DECLARE_VARIANT(scalar)
STT_SIMD_DECLARE_VARIANT(avx2)

#undef STT_SIMD_DECLARE_VARIANT

}  // namespace stt::simd
