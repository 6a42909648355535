// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "reference.hpp"
#include "stt/core/ops.hpp"
#include "stt/nn/layers.hpp"

using namespace stt;
using namespace stt::nn;
using TD = Tensor<double>;

namespace {

TD random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1,
                 bool grad = false) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = d(rng);
  return TD(std::move(shape), std::move(v), grad);
}

oracle::Vec values(const TD& t) { return {t.data().begin(), t.data().end()}; }

double max_abs_diff(const oracle::Vec& a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("conv3d examples") {
  SUBCASE("1x1x1 unit kernel is the identity") {
    std::mt19937_64 rng(1);
    TD x = random_tensor({1, 1, 3, 4, 5}, rng);
    TD y = conv3d(x, TD::full({1, 1, 1, 1, 1}, 1.0), TD::zeros({1}), {1, 1, 1}, {0, 0, 0});
    CHECK(y.shape() == x.shape());
    CHECK(max_abs_diff(values(x), y.data()) == 0.0);
  }
  SUBCASE("all-ones 3x3x3 on all-ones 3x3x3 gives 27") {
    TD y = conv3d(TD::full({1, 1, 3, 3, 3}, 1.0), TD::full({1, 1, 3, 3, 3}, 1.0), TD(),
                  {1, 1, 1}, {0, 0, 0});
    CHECK(y.shape() == Shape{1, 1, 1, 1, 1});
    CHECK(y.item() == 27.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(conv3d(TD::zeros({1, 2, 3, 3, 3}), TD::zeros({1, 3, 1, 1, 1}), TD(),
                           {1, 1, 1}, {0, 0, 0}),
                    ShapeError);
    CHECK_THROWS_AS(conv3d(TD::zeros({1, 1, 1, 3, 3}), TD::zeros({1, 1, 3, 3, 3}), TD(),
                           {1, 1, 1}, {0, 0, 0}),
                    ShapeError);
  }
}

TEST_CASE("conv3d equals the nested-loop reference") {
  std::mt19937_64 rng(2);
  struct Case {
    std::int64_t n, c, o;
    oracle::Dims in, k, stride, pad;
  };
  const Case cases[] = {
      {1, 2, 3, {4, 6, 6}, {1, 3, 3}, {1, 1, 1}, {0, 0, 0}},
      {2, 3, 4, {5, 7, 6}, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}},
      {1, 4, 5, {4, 8, 8}, {1, 2, 2}, {1, 2, 2}, {0, 0, 0}},
      {1, 3, 2, {4, 8, 8}, {2, 2, 2}, {2, 2, 2}, {0, 0, 0}},
      {2, 2, 1, {6, 9, 7}, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}},
      {1, 16, 8, {4, 10, 10}, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}},
      {1, 20, 24, {6, 12, 12}, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}},
  };
  for (const auto& cs : cases) {
    TD x = random_tensor({cs.n, cs.c, cs.in[0], cs.in[1], cs.in[2]}, rng);
    TD w = random_tensor({cs.o, cs.c, cs.k[0], cs.k[1], cs.k[2]}, rng);
    TD b = random_tensor({cs.o}, rng);
    TD y = conv3d(x, w, b, cs.stride, cs.pad);
    oracle::Dims od;
    auto ref = oracle::conv3d_loops(values(x), cs.n, cs.c, cs.in, values(w), cs.o, cs.k,
                                    values(b), cs.stride, cs.pad, &od);
    CHECK(y.shape() == Shape{cs.n, cs.o, od[0], od[1], od[2]});
    CHECK(max_abs_diff(ref, y.data()) < 1e-10);
  }
}

TEST_CASE("conv3d gradients") {
  std::mt19937_64 rng(3);
  TD x = random_tensor({2, 2, 3, 5, 4}, rng);
  TD w = random_tensor({3, 2, 3, 3, 3}, rng);
  TD b = random_tensor({3}, rng);
  SUBCASE("padded") {
    TD g = random_tensor({2, 3, 3, 5, 4}, rng);
    auto r = oracle::grad_check(
        [&] { return sum(mul(conv3d(x, w, b, {1, 1, 1}, {1, 1, 1}), g)); }, {x, w, b});
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("strided") {
    TD g = random_tensor({2, 3, 1, 3, 2}, rng);
    auto r = oracle::grad_check(
        [&] { return sum(mul(conv3d(x, w, b, {2, 2, 2}, {0, 1, 1}), g)); }, {x, w, b});
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("pointwise") {
    TD w1 = random_tensor({4, 2, 1, 1, 1}, rng);
    TD g = random_tensor({2, 4, 3, 5, 4}, rng);
    auto r = oracle::grad_check(
        [&] { return sum(mul(conv3d(x, w1, TD(), {1, 1, 1}, {0, 0, 0}), g)); }, {x, w1});
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("acb block") {
  Rng rng(4);
  SUBCASE("zero weights give zero output") {
    AcbBlock<double> acb(3, 3, rng);
    for (auto* c : {&acb.conv1(), &acb.conv2(), &acb.conv3()}) {
      for (auto& v : c->weight().mutable_data()) v = 0;
    }
    CHECK(!acb.skip().has_value());
    std::mt19937_64 r2(5);
    TD y = acb.forward(random_tensor({1, 3, 2, 4, 4}, r2));
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("shape is preserved") {
    for (auto [ci, co] : {std::pair{1, 4}, {4, 4}, {6, 2}}) {
      AcbBlock<double> acb(ci, co, rng);
      std::mt19937_64 r2(6);
      TD y = acb.forward(random_tensor({1, ci, 4, 16, 16}, r2));
      CHECK(y.shape() == Shape{1, co, 4, 16, 16});
    }
  }
  SUBCASE("equals a composition of reference convolutions") {
    for (std::int64_t mid : {0, 5}) {
      AcbBlock<double> acb(2, 3, rng, mid);
      CHECK(acb.skip().has_value() == (mid == 5));
      std::mt19937_64 r2(7);
      TD x = random_tensor({1, 2, 3, 5, 5}, r2);
      auto relu_v = [](oracle::Vec v) {
        for (auto& e : v) e = std::max(e, 0.0);
        return v;
      };
      auto conv = [](const oracle::Vec& in, std::int64_t c, const Conv3dLayer<double>& l) {
        auto k = l.kernel();
        return oracle::conv3d_loops(in, 1, c, {3, 5, 5}, values(l.weight()), l.out_channels(),
                                    k, values(l.bias()), {1, 1, 1}, l.padding(), nullptr);
      };
      const std::int64_t m = mid ? mid : 3;
      // random nonzero biases so every term matters
      for (auto* c : {&acb.conv1(), &acb.conv2(), &acb.conv3()}) {
        for (auto& v : c->bias().mutable_data()) v = std::uniform_real_distribution<>(-0.3, 0.3)(r2);
      }
      auto c1 = conv(values(x), 2, acb.conv1());
      auto h2 = relu_v(conv(relu_v(c1), m, acb.conv2()));
      auto c3 = conv(h2, 3, acb.conv3());
      auto sk = acb.skip() ? conv(c1, m, *acb.skip()) : c1;
      for (std::size_t i = 0; i < c3.size(); ++i) c3[i] += sk[i];
      CHECK(max_abs_diff(relu_v(c3), acb.forward(x).data()) < 1e-10);
    }
  }
  SUBCASE("gradients") {
    AcbBlock<double> acb(2, 3, rng, 4);
    std::mt19937_64 r2(8);
    TD x = random_tensor({1, 2, 3, 4, 4}, r2);
    TD g = random_tensor({1, 3, 3, 4, 4}, r2);
    ParamList<double> params;
    acb.collect("acb", params);
    std::vector<std::pair<std::string, TD>> wrt{{"x", x}};
    for (auto& p : params) {
      for (auto& v : p.tensor.mutable_data()) v += std::uniform_real_distribution<>(-0.1, 0.1)(r2);
      wrt.emplace_back(p.name, p.tensor);
    }
    auto r = oracle::grad_check_named([&] { return sum(mul(acb.forward(x), g)); }, wrt);
    INFO(r.worst_tensor);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("trilinear sample") {
  std::mt19937_64 rng(9);
  TD x = random_tensor({2, 3, 4, 5}, rng);
  SUBCASE("integer coordinates return voxel values") {
    TD coords({3, 3}, {0, 0, 0, 2, 3, 4, 1, 2, 3});
    TD y = trilinear_sample(x, coords);
    CHECK(y.shape() == Shape{2, 3});
    for (int c = 0; c < 2; ++c) {
      CHECK(y.data()[c * 3 + 0] == x.data()[c * 60 + 0]);
      CHECK(y.data()[c * 3 + 1] == x.data()[c * 60 + (2 * 4 + 3) * 5 + 4]);
      CHECK(y.data()[c * 3 + 2] == x.data()[c * 60 + (1 * 4 + 2) * 5 + 3]);
    }
  }
  SUBCASE("midpoint is the average") {
    TD y = trilinear_sample(x, TD({1, 3}, {1, 2, 2.5}));
    const double a = x.data()[(1 * 4 + 2) * 5 + 2], b = x.data()[(1 * 4 + 2) * 5 + 3];
    CHECK(y.data()[0] == doctest::Approx((a + b) / 2).epsilon(1e-14));
  }
  SUBCASE("out of range is zero padded") {
    TD y = trilinear_sample(x, TD({2, 3}, {-5, 0, 0, 0, 10, 2}));
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("matches the tent-function formula, and is linear in x") {
    TD coords = random_tensor({40, 3}, rng, -1.5, 5.5);
    TD y = trilinear_sample(x, coords);
    TD y2 = trilinear_sample(scale(x, 2.5), coords);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 40; ++i) {
        const double ref = oracle::trilinear_point(values(x), {3, 4, 5}, c, coords.data()[3 * i],
                                                   coords.data()[3 * i + 1],
                                                   coords.data()[3 * i + 2]);
        CHECK(std::abs(y.data()[c * 40 + i] - ref) < 1e-12);
        CHECK(std::abs(y2.data()[c * 40 + i] - 2.5 * y.data()[c * 40 + i]) < 1e-12);
      }
  }
  SUBCASE("gradients away from lattice points") {
    std::vector<double> cv;
    std::uniform_real_distribution<double> u(0.1, 0.9);
    std::uniform_int_distribution<int> cell(-1, 4);
    for (int i = 0; i < 30; ++i) {
      for (int a = 0; a < 3; ++a) cv.push_back(cell(rng) + u(rng));
    }
    TD coords({30, 3}, cv);
    TD g = random_tensor({2, 30}, rng);
    auto r = oracle::grad_check([&] { return sum(mul(trilinear_sample(x, coords), g)); },
                                {x, coords});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("trilinear upsampling") {
  std::mt19937_64 rng(10);
  SUBCASE("constant field stays constant") {
    TD y = upsample_trilinear(TD::full({1, 2, 2, 3, 3}, 0.7), {2, 2, 2});
    CHECK(y.shape() == Shape{1, 2, 4, 6, 6});
    for (double v : y.data()) CHECK(v == doctest::Approx(0.7));
  }
  SUBCASE("1-D half-pixel weights") {
    TD y = upsample_axis(TD({1, 2}, {0.0, 4.0}), 1, 2);
    const double expect[] = {0.0, 1.0, 3.0, 4.0};
    for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(expect[i]));
  }
  SUBCASE("gradients") {
    TD x = random_tensor({1, 2, 2, 3, 3}, rng);
    TD g = random_tensor({1, 2, 2, 6, 6}, rng);
    auto r = oracle::grad_check([&] { return sum(mul(upsample_trilinear(x, {1, 2, 2}), g)); }, {x});
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("layer norm over a middle axis") {
  std::mt19937_64 rng(11);
  TD x = random_tensor({2, 5, 3}, rng);
  TD gamma = random_tensor({5}, rng), beta = random_tensor({5}, rng);
  TD y = layer_norm_axis(x, 1, gamma, beta);
  TD ref = permute(layer_norm(permute(x, {0, 2, 1}), gamma, beta), {0, 2, 1});
  CHECK(max_abs_diff(values(ref), y.data()) < 1e-14);
  TD g = random_tensor({2, 5, 3}, rng);
  auto r = oracle::grad_check([&] { return sum(mul(layer_norm_axis(x, 1, gamma, beta), g)); },
                              {x, gamma, beta});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("parameter counts") {
  CHECK(Conv3dLayer<double>::parameter_count(0, 5, {3, 3, 3}) == 0);
  CHECK(Conv3dLayer<double>::parameter_count(4, 8, {1, 3, 3}) == 8 * 4 * 9 + 8);
  Rng rng(12);
  Conv3dLayer<double> l(4, 8, {1, 3, 3}, {1, 1, 1}, {0, 1, 1}, rng);
  CHECK(l.weight().numel() + l.bias().numel() ==
        Conv3dLayer<double>::parameter_count(4, 8, {1, 3, 3}));
}
