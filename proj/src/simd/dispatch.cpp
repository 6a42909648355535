// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "stt/simd/kernels.hpp"

namespace stt::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("STT_SIMD")) {
    if (std::string_view(env) == "scalar") return Isa::kScalar;
  }
  return detected_isa();
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

bool use_avx2() { return active().load(std::memory_order_relaxed) == Isa::kAvx2; }

}  // namespace

Isa detected_isa() { return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar; }

Isa active_isa() { return active().load(); }

void set_active_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !cpu_has_avx2()) {
    throw std::invalid_argument("AVX2/FMA not supported on this CPU");
  }
  active().store(isa);
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

template <typename T>
void gemm(Trans ta, Trans tb, std::int64_t m, std::int64_t n, std::int64_t k,
          T alpha, const T* a, std::int64_t lda, const T* b, std::int64_t ldb,
          T beta, T* c, std::int64_t ldc) {
  // Packing overhead dominates tiny products.
  if (use_avx2() && m * n * k >= 512) {
    avx2::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  } else {
    scalar::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

#define STT_DISPATCH(name, ret, params, args) \
  template <typename T>                       \
  ret name params {                           \
    if (use_avx2()) return avx2::name args;   \
    return scalar::name args;                 \
  }

STT_DISPATCH(dot, T, (std::span<const T> x, std::span<const T> y), (x, y))
STT_DISPATCH(axpy, void, (T alpha, std::span<const T> x, std::span<T> y),
             (alpha, x, y))
STT_DISPATCH(scale, void, (T alpha, std::span<T> x), (alpha, x))
STT_DISPATCH(add, void,
             (std::span<const T> a, std::span<const T> b, std::span<T> out),
             (a, b, out))
STT_DISPATCH(mul, void,
             (std::span<const T> a, std::span<const T> b, std::span<T> out),
             (a, b, out))
STT_DISPATCH(relu, void, (std::span<const T> x, std::span<T> y), (x, y))
STT_DISPATCH(relu_backward, void,
             (std::span<const T> x, std::span<const T> gy, std::span<T> gx),
             (x, gy, gx))

STT_DISPATCH(softmax_rows, void, (std::int64_t rows, std::int64_t n, const T* x, T* y),
             (rows, n, x, y))
STT_DISPATCH(softmax_rows_backward, void,
             (std::int64_t rows, std::int64_t n, const T* y, const T* gy, T* gx),
             (rows, n, y, gy, gx))

#undef STT_DISPATCH

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

}  // namespace stt::simd
