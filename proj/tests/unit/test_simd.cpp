// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "stt/simd/kernels.hpp"

using namespace stt::simd;

namespace {

bool have_avx2() { return detected_isa() == Isa::kAvx2; }

template <typename T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(d(rng));
  return v;
}

template <typename T>
void check_gemm_equivalence(double tol) {
  std::mt19937_64 rng(7);
  const std::int64_t sizes[][3] = {{1, 1, 1},   {6, 16, 3},   {7, 17, 5},    {13, 9, 300},
                                   {96, 33, 2}, {100, 260, 70}, {16, 2100, 45}, {3, 5, 513}};
  for (const auto& s : sizes) {
    const std::int64_t m = s[0], n = s[1], k = s[2];
    for (Trans ta : {Trans::kNo, Trans::kYes}) {
      for (Trans tb : {Trans::kNo, Trans::kYes}) {
        auto a = random_vec<T>(m * k, rng);
        auto b = random_vec<T>(k * n, rng);
        auto c0 = random_vec<T>(m * n, rng);
        auto c1 = c0;
        const std::int64_t lda = ta == Trans::kNo ? k : m;
        const std::int64_t ldb = tb == Trans::kNo ? n : k;
        scalar::gemm<T>(ta, tb, m, n, k, T(0.7), a.data(), lda, b.data(), ldb, T(0.3),
                        c0.data(), n);
        avx2::gemm<T>(ta, tb, m, n, k, T(0.7), a.data(), lda, b.data(), ldb, T(0.3),
                      c1.data(), n);
        double worst = 0;
        for (std::size_t i = 0; i < c0.size(); ++i) {
          worst = std::max(worst, std::abs(double(c0[i]) - double(c1[i])) /
                                      (1.0 + std::abs(double(c0[i]))));
        }
        INFO("m=" << m << " n=" << n << " k=" << k);
        CHECK(worst < tol * std::sqrt(double(k)));
      }
    }
  }
}

}  // namespace

TEST_CASE("scalar gemm matches hand arithmetic") {
  const double a[] = {1, 2, 3, 4};
  const double b[] = {5, 6};
  double c[2] = {-1, -1};
  scalar::gemm<double>(Trans::kNo, Trans::kNo, 2, 1, 2, 1.0, a, 2, b, 1, 0.0, c, 1);
  CHECK(c[0] == 17);
  CHECK(c[1] == 39);
}

TEST_CASE("avx2 gemm equals scalar reference") {
  if (!have_avx2()) return;
  check_gemm_equivalence<double>(1e-14);
  check_gemm_equivalence<float>(1e-5);
}

TEST_CASE("avx2 gemm beta=0 ignores garbage in C") {
  if (!have_avx2()) return;
  std::vector<double> a(6 * 4, 1.0), b(4 * 16, 1.0), c(6 * 16, std::nan(""));
  avx2::gemm<double>(Trans::kNo, Trans::kNo, 6, 16, 4, 1.0, a.data(), 4, b.data(), 16, 0.0,
                     c.data(), 16);
  for (double v : c) CHECK(v == 4.0);
}

TEST_CASE("avx2 elementwise kernels equal scalar reference") {
  if (!have_avx2()) return;
  std::mt19937_64 rng(3);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 31u, 1000u}) {
    auto x = random_vec<double>(n, rng);
    auto y = random_vec<double>(n, rng);
    CHECK(std::abs(scalar::dot<double>(x, y) - avx2::dot<double>(x, y)) < 1e-12);

    std::vector<double> o0(n), o1(n);
    scalar::add<double>(x, y, o0);
    avx2::add<double>(x, y, o1);
    CHECK(o0 == o1);
    scalar::mul<double>(x, y, o0);
    avx2::mul<double>(x, y, o1);
    CHECK(o0 == o1);
    scalar::relu<double>(x, o0);
    avx2::relu<double>(x, o1);
    CHECK(o0 == o1);

    std::vector<double> g0 = y, g1 = y;
    scalar::relu_backward<double>(x, y, g0);
    avx2::relu_backward<double>(x, y, g1);
    CHECK(g0 == g1);

    g0 = y;
    g1 = y;
    scalar::axpy<double>(0.25, x, g0);
    avx2::axpy<double>(0.25, x, g1);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(g0[i] - g1[i]) < 1e-15);
    scalar::scale<double>(-3.0, g0);
    avx2::scale<double>(-3.0, g1);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(g0[i] - g1[i]) < 1e-14);

    auto xf = random_vec<float>(n, rng);
    auto yf = random_vec<float>(n, rng);
    std::vector<float> f0(n), f1(n);
    scalar::relu<float>(xf, f0);
    avx2::relu<float>(xf, f1);
    CHECK(f0 == f1);
    scalar::add<float>(xf, yf, f0);
    avx2::add<float>(xf, yf, f1);
    CHECK(f0 == f1);
  }
}

namespace {

template <typename T>
void check_softmax_equivalence(double tol) {
  std::mt19937_64 rng(11);
  for (std::int64_t n : {1, 3, 4, 8, 9, 17, 64, 1027}) {
    const std::int64_t rows = 5;
    auto x = random_vec<T>(rows * n, rng);
    for (std::int64_t j = 0; j < n; ++j) {
      x[j] *= T(40);                         // row 0: wide range
      x[n + j] = T(1000) + x[n + j];         // row 1: large offset
      x[2 * n + j] = T(-1000) + x[2 * n + j];
    }
    x[3 * n] = T(500);                       // row 3: one dominant entry
    std::vector<T> y0(rows * n), y1(rows * n);
    scalar::softmax_rows<T>(rows, n, x.data(), y0.data());
    avx2::softmax_rows<T>(rows, n, x.data(), y1.data());
    for (std::int64_t r = 0; r < rows; ++r) {
      double sum = 0;
      for (std::int64_t j = 0; j < n; ++j) {
        const auto i = r * n + j;
        CHECK(std::abs(double(y0[i]) - double(y1[i])) <= tol * std::max(1e-30, double(y0[i])));
        sum += y1[i];
      }
      CHECK(std::abs(sum - 1.0) < 10 * tol * n);
    }
    auto gy = random_vec<T>(rows * n, rng);
    auto g0 = random_vec<T>(rows * n, rng);
    auto g1 = g0;
    scalar::softmax_rows_backward<T>(rows, n, y0.data(), gy.data(), g0.data());
    avx2::softmax_rows_backward<T>(rows, n, y0.data(), gy.data(), g1.data());
    for (std::size_t i = 0; i < g0.size(); ++i) CHECK(std::abs(g0[i] - g1[i]) < 10 * tol);
  }
}

}  // namespace

TEST_CASE("avx2 softmax rows equal scalar reference") {
  if (!have_avx2()) return;
  check_softmax_equivalence<float>(2e-6);
  check_softmax_equivalence<double>(1e-14);
}

TEST_CASE("softmax rows handle extreme spreads") {
  const std::vector<double> x{0.0, -800.0, 0.0, -1e308};
  std::vector<double> y(4);
  softmax_rows<double>(1, 4, x.data(), y.data());
  CHECK(y[0] == doctest::Approx(0.5));
  CHECK(y[2] == doctest::Approx(0.5));
  CHECK(y[1] >= 0.0);
  CHECK(y[1] < 1e-300);
  CHECK(y[3] == 0.0);
}

TEST_CASE("dispatcher honours forced scalar mode") {
  const Isa before = active_isa();
  set_active_isa(Isa::kScalar);
  CHECK(active_isa() == Isa::kScalar);
  std::vector<float> a(64 * 64, 1.0f), b(64 * 64, 2.0f), c(64 * 64);
  gemm<float>(Trans::kNo, Trans::kNo, 64, 64, 64, 1.0f, a.data(), 64, b.data(), 64, 0.0f,
              c.data(), 64);
  CHECK(c[0] == 128.0f);
  set_active_isa(before);
  CHECK(std::string(isa_name(Isa::kAvx2)) == "avx2");
}
