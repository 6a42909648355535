// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2 -mfma; only reached through the dispatcher after a
// CPUID check, so nothing here may run at static-initialization time.

#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "stt/simd/kernels.hpp"

namespace stt::simd::avx2 {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using Reg = __m256;
  static constexpr int kWidth = 8;
  static Reg zero() { return _mm256_setzero_ps(); }
  static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Reg v) { _mm256_storeu_ps(p, v); }
  static Reg set1(float v) { return _mm256_set1_ps(v); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
  static Reg mul(Reg a, Reg b) { return _mm256_mul_ps(a, b); }
  static Reg max(Reg a, Reg b) { return _mm256_max_ps(a, b); }
  static Reg gt_mask(Reg a, Reg b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static Reg and_(Reg a, Reg b) { return _mm256_and_ps(a, b); }
  static Reg sub(Reg a, Reg b) { return _mm256_sub_ps(a, b); }
  static float hmax(Reg v) {
    __m128 m = _mm_max_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
    m = _mm_max_ps(m, _mm_movehl_ps(m, m));
    m = _mm_max_ss(m, _mm_movehdup_ps(m));
    return _mm_cvtss_f32(m);
  }
  // exp(x) for x <= 0 (softmax arguments): Cody-Waite reduction by ln 2 and
  // a degree-6 polynomial, ~2 ulp.
  static Reg exp_neg(Reg x) {
    const Reg live = _mm256_cmp_ps(x, _mm256_set1_ps(-87.0f), _CMP_GE_OQ);
    x = _mm256_max_ps(x, _mm256_set1_ps(-87.0f));
    const Reg n = _mm256_round_ps(_mm256_mul_ps(x, _mm256_set1_ps(1.44269504088896341f)),
                                  _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    Reg r = _mm256_fnmadd_ps(n, _mm256_set1_ps(0.693359375f), x);
    r = _mm256_fnmadd_ps(n, _mm256_set1_ps(-2.12194440e-4f), r);
    Reg p = _mm256_set1_ps(1.9875691500e-4f);
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(1.3981999507e-3f));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(8.3334519073e-3f));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(4.1665795894e-2f));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(1.6666665459e-1f));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(5.0000001201e-1f));
    p = _mm256_fmadd_ps(p, _mm256_mul_ps(r, r), _mm256_add_ps(r, _mm256_set1_ps(1.0f)));
    const __m256i e = _mm256_slli_epi32(
        _mm256_add_epi32(_mm256_cvtps_epi32(n), _mm256_set1_epi32(127)), 23);
    return _mm256_and_ps(live, _mm256_mul_ps(p, _mm256_castsi256_ps(e)));
  }
  static float hsum(Reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, lo);
    lo = _mm_add_ss(lo, sh);
    return _mm_cvtss_f32(lo);
  }
};

template <>
struct Vec<double> {
  using Reg = __m256d;
  static constexpr int kWidth = 4;
  static Reg zero() { return _mm256_setzero_pd(); }
  static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, Reg v) { _mm256_storeu_pd(p, v); }
  static Reg set1(double v) { return _mm256_set1_pd(v); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
  static Reg mul(Reg a, Reg b) { return _mm256_mul_pd(a, b); }
  static Reg max(Reg a, Reg b) { return _mm256_max_pd(a, b); }
  static Reg gt_mask(Reg a, Reg b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static Reg and_(Reg a, Reg b) { return _mm256_and_pd(a, b); }
  static Reg sub(Reg a, Reg b) { return _mm256_sub_pd(a, b); }
  static double hmax(Reg v) {
    __m128d m = _mm_max_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
    return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
  }
  // exp(x) for x <= 0: reduction by ln 2 (hi/lo) and a degree-13 Taylor
  // polynomial on |r| <= ln2 / 2, ~1 ulp.
  static Reg exp_neg(Reg x) {
    const Reg live = _mm256_cmp_pd(x, _mm256_set1_pd(-708.0), _CMP_GE_OQ);
    x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));
    const Reg n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                  _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    Reg r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);
    static constexpr double kInvFact[] = {1.0 / 6227020800.0, 1.0 / 479001600.0,
                                          1.0 / 39916800.0,   1.0 / 3628800.0,
                                          1.0 / 362880.0,     1.0 / 40320.0,
                                          1.0 / 5040.0,       1.0 / 720.0,
                                          1.0 / 120.0,        1.0 / 24.0,
                                          1.0 / 6.0,          0.5,
                                          1.0,                1.0};
    Reg p = _mm256_set1_pd(kInvFact[0]);
    for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[i]));
    // 2^n through the exponent field: n + 1023 placed in bits 52..62
    const __m256i bits = _mm256_slli_epi64(
        _mm256_castpd_si256(_mm256_add_pd(n, _mm256_set1_pd(1023.0 + 4503599627370496.0))), 52);
    return _mm256_and_pd(live, _mm256_mul_pd(p, _mm256_castsi256_pd(bits)));
  }
  static double hsum(Reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

constexpr std::int64_t kMr = 6;
constexpr std::int64_t kKc = 256;
constexpr std::int64_t kMc = 96;
constexpr std::int64_t kNc = 2048;

template <typename T>
constexpr std::int64_t kNr = 2 * Vec<T>::kWidth;

// Packs rows [i0, i0+mc) x cols [p0, p0+kc) of op(A) into MR-row panels,
// layout [panel][p][r], zero-padding the last panel.
template <typename T>
void pack_a(Trans ta, const T* a, std::int64_t lda, std::int64_t i0,
            std::int64_t p0, std::int64_t mc, std::int64_t kc, T* out) {
  for (std::int64_t ib = 0; ib < mc; ib += kMr) {
    const std::int64_t rows = std::min(kMr, mc - ib);
    for (std::int64_t p = 0; p < kc; ++p) {
      for (std::int64_t r = 0; r < kMr; ++r) {
        T v = 0;
        if (r < rows) {
          const std::int64_t i = i0 + ib + r;
          const std::int64_t pp = p0 + p;
          v = ta == Trans::kNo ? a[i * lda + pp] : a[pp * lda + i];
        }
        *out++ = v;
      }
    }
  }
}

// Packs rows [p0, p0+kc) x cols [j0, j0+nc) of op(B) into NR-column panels,
// layout [panel][p][c].
template <typename T>
void pack_b(Trans tb, const T* b, std::int64_t ldb, std::int64_t p0,
            std::int64_t j0, std::int64_t kc, std::int64_t nc, T* out) {
  constexpr std::int64_t nr = kNr<T>;
  for (std::int64_t jb = 0; jb < nc; jb += nr) {
    const std::int64_t cols = std::min(nr, nc - jb);
    for (std::int64_t p = 0; p < kc; ++p) {
      const std::int64_t pp = p0 + p;
      if (tb == Trans::kNo && cols == nr) {
        const T* src = b + pp * ldb + j0 + jb;
        std::copy(src, src + nr, out);
        out += nr;
        continue;
      }
      for (std::int64_t c = 0; c < nr; ++c) {
        T v = 0;
        if (c < cols) {
          const std::int64_t j = j0 + jb + c;
          v = tb == Trans::kNo ? b[pp * ldb + j] : b[j * ldb + pp];
        }
        *out++ = v;
      }
    }
  }
}

// acc(6 x NR) = sum_p A[p][r] * B[p][c]; then C += alpha * acc on the valid
// rows x cols sub-tile.
template <typename T>
void micro_kernel(std::int64_t kc, const T* ap, const T* bp, T alpha, T* c,
                  std::int64_t ldc, std::int64_t rows, std::int64_t cols) {
  using V = Vec<T>;
  constexpr int w = V::kWidth;
  typename V::Reg c00 = V::zero(), c01 = V::zero(), c10 = V::zero(),
                  c11 = V::zero(), c20 = V::zero(), c21 = V::zero(),
                  c30 = V::zero(), c31 = V::zero(), c40 = V::zero(),
                  c41 = V::zero(), c50 = V::zero(), c51 = V::zero();
  for (std::int64_t p = 0; p < kc; ++p) {
    const typename V::Reg b0 = V::load(bp);
    const typename V::Reg b1 = V::load(bp + w);
    typename V::Reg a = V::set1(ap[0]);
    c00 = V::fmadd(a, b0, c00);
    c01 = V::fmadd(a, b1, c01);
    a = V::set1(ap[1]);
    c10 = V::fmadd(a, b0, c10);
    c11 = V::fmadd(a, b1, c11);
    a = V::set1(ap[2]);
    c20 = V::fmadd(a, b0, c20);
    c21 = V::fmadd(a, b1, c21);
    a = V::set1(ap[3]);
    c30 = V::fmadd(a, b0, c30);
    c31 = V::fmadd(a, b1, c31);
    a = V::set1(ap[4]);
    c40 = V::fmadd(a, b0, c40);
    c41 = V::fmadd(a, b1, c41);
    a = V::set1(ap[5]);
    c50 = V::fmadd(a, b0, c50);
    c51 = V::fmadd(a, b1, c51);
    ap += kMr;
    bp += 2 * w;
  }
  const typename V::Reg al = V::set1(alpha);
  const typename V::Reg acc[kMr][2] = {{c00, c01}, {c10, c11}, {c20, c21},
                                       {c30, c31}, {c40, c41}, {c50, c51}};
  if (rows == kMr && cols == 2 * w) {
    for (std::int64_t r = 0; r < kMr; ++r) {
      T* crow = c + r * ldc;
      V::store(crow, V::fmadd(al, acc[r][0], V::load(crow)));
      V::store(crow + w, V::fmadd(al, acc[r][1], V::load(crow + w)));
    }
    return;
  }
  alignas(32) T tmp[2 * w];
  for (std::int64_t r = 0; r < rows; ++r) {
    V::store(tmp, V::mul(al, acc[r][0]));
    V::store(tmp + w, V::mul(al, acc[r][1]));
    T* crow = c + r * ldc;
    for (std::int64_t j = 0; j < cols; ++j) crow[j] += tmp[j];
  }
}

template <typename T>
struct PackBuffers {
  std::vector<T> a;
  std::vector<T> b;
};

template <typename T>
PackBuffers<T>& pack_buffers() {
  thread_local PackBuffers<T> buffers;
  return buffers;
}

}  // namespace

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
  if (m == 0 || n == 0 || k == 0 || alpha == T(0)) return;

  constexpr std::int64_t nr = kNr<T>;
  auto& buf = pack_buffers<T>();
  const std::int64_t mc_max = std::min(kMc, (m + kMr - 1) / kMr * kMr);
  buf.a.resize(static_cast<std::size_t>(kKc * mc_max));

  const std::int64_t nc_max = std::min(kNc, (n + nr - 1) / nr * nr);
  buf.b.resize(static_cast<std::size_t>(kKc * nc_max));
  for (std::int64_t j0 = 0; j0 < n; j0 += kNc) {
    const std::int64_t nc = std::min(kNc, n - j0);
    for (std::int64_t p0 = 0; p0 < k; p0 += kKc) {
      const std::int64_t kc = std::min(kKc, k - p0);
      pack_b(tb, b, ldb, p0, j0, kc, nc, buf.b.data());
      for (std::int64_t i0 = 0; i0 < m; i0 += kMc) {
        const std::int64_t mc = std::min(kMc, m - i0);
        pack_a(ta, a, lda, i0, p0, mc, kc, buf.a.data());
        for (std::int64_t jb = 0; jb < nc; jb += nr) {
          const std::int64_t cols = std::min(nr, nc - jb);
          const T* bp = buf.b.data() + jb * kc;
          for (std::int64_t ib = 0; ib < mc; ib += kMr) {
            const std::int64_t rows = std::min(kMr, mc - ib);
            micro_kernel(kc, buf.a.data() + ib * kc, bp, alpha,
                         c + (i0 + ib) * ldc + j0 + jb, ldc, rows, cols);
          }
        }
      }
    }
  }
}

template <typename T>
T dot(std::span<const T> x, std::span<const T> y) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  const std::size_t n = x.size();
  typename V::Reg acc0 = V::zero(), acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = V::fmadd(V::load(x.data() + i), V::load(y.data() + i), acc0);
    acc1 = V::fmadd(V::load(x.data() + i + w), V::load(y.data() + i + w), acc1);
  }
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  const std::size_t n = x.size();
  const typename V::Reg al = V::set1(alpha);
  std::size_t i = 0;
  for (; i + w <= n; i += w) {
    V::store(y.data() + i,
             V::fmadd(al, V::load(x.data() + i), V::load(y.data() + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(T alpha, std::span<T> x) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  const typename V::Reg al = V::set1(alpha);
  std::size_t i = 0;
  for (; i + w <= x.size(); i += w) {
    V::store(x.data() + i, V::mul(al, V::load(x.data() + i)));
  }
  for (; i < x.size(); ++i) x[i] *= alpha;
}

template <typename T>
void add(std::span<const T> a, std::span<const T> b, std::span<T> out) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  std::size_t i = 0;
  for (; i + w <= a.size(); i += w) {
    V::store(out.data() + i,
             V::add(V::load(a.data() + i), V::load(b.data() + i)));
  }
  for (; i < a.size(); ++i) out[i] = a[i] + b[i];
}

template <typename T>
void mul(std::span<const T> a, std::span<const T> b, std::span<T> out) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  std::size_t i = 0;
  for (; i + w <= a.size(); i += w) {
    V::store(out.data() + i,
             V::mul(V::load(a.data() + i), V::load(b.data() + i)));
  }
  for (; i < a.size(); ++i) out[i] = a[i] * b[i];
}

template <typename T>
void relu(std::span<const T> x, std::span<T> y) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  const typename V::Reg z = V::zero();
  std::size_t i = 0;
  for (; i + w <= x.size(); i += w) {
    V::store(y.data() + i, V::max(V::load(x.data() + i), z));
  }
  for (; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(std::span<const T> x, std::span<const T> gy,
                   std::span<T> gx) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  const typename V::Reg z = V::zero();
  std::size_t i = 0;
  for (; i + w <= x.size(); i += w) {
    const typename V::Reg mask = V::gt_mask(V::load(x.data() + i), z);
    V::store(gx.data() + i, V::add(V::load(gx.data() + i),
                                   V::and_(mask, V::load(gy.data() + i))));
  }
  for (; i < x.size(); ++i) {
    if (x[i] > T(0)) gx[i] += gy[i];
  }
}

template <typename T>
void softmax_rows(std::int64_t rows, std::int64_t n, const T* x, T* y) {
  using V = Vec<T>;
  constexpr std::int64_t w = V::kWidth;
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x + r * n;
    T* yr = y + r * n;
    std::int64_t j = 0;
    T mx = xr[0];
    if (n >= w) {
      typename V::Reg m = V::load(xr);
      for (j = w; j + w <= n; j += w) m = V::max(m, V::load(xr + j));
      mx = V::hmax(m);
    }
    for (; j < n; ++j) mx = std::max(mx, xr[j]);
    const typename V::Reg vmx = V::set1(mx);
    typename V::Reg acc = V::zero();
    for (j = 0; j + w <= n; j += w) {
      const typename V::Reg e = V::exp_neg(V::sub(V::load(xr + j), vmx));
      V::store(yr + j, e);
      acc = V::add(acc, e);
    }
    T total = V::hsum(acc);
    if (j < n) {
      // tail through a padded register so every element sees the same exp
      alignas(32) T tmp[w];
      std::fill(tmp, tmp + w, mx - T(1000));
      std::copy(xr + j, xr + n, tmp);
      V::store(tmp, V::exp_neg(V::sub(V::load(tmp), vmx)));
      for (std::int64_t t = 0; j + t < n; ++t) {
        yr[j + t] = tmp[t];
        total += tmp[t];
      }
    }
    const typename V::Reg inv = V::set1(T(1) / total);
    for (j = 0; j + w <= n; j += w) V::store(yr + j, V::mul(V::load(yr + j), inv));
    for (; j < n; ++j) yr[j] *= T(1) / total;
  }
}

template <typename T>
void softmax_rows_backward(std::int64_t rows, std::int64_t n, const T* y, const T* gy,
                           T* gx) {
  using V = Vec<T>;
  constexpr std::int64_t w = V::kWidth;
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* yr = y + r * n;
    const T* gr = gy + r * n;
    T* out = gx + r * n;
    const T d = dot<T>(std::span<const T>(gr, n), std::span<const T>(yr, n));
    const typename V::Reg vd = V::set1(d);
    std::int64_t j = 0;
    for (; j + w <= n; j += w) {
      const typename V::Reg yv = V::load(yr + j);
      V::store(out + j, V::fmadd(yv, V::sub(V::load(gr + j), vd), V::load(out + j)));
    }
    for (; j < n; ++j) out[j] += yr[j] * (gr[j] - d);
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

}  // namespace stt::simd::avx2
