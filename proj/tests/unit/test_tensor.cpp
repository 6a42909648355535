// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "stt/core/checkpoint.hpp"
#include "stt/core/ops.hpp"

using namespace stt;
using TD = Tensor<double>;

namespace {

TD random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = d(rng);
  return TD(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul examples") {
  SUBCASE("identity") {
    std::mt19937_64 rng(1);
    TD a = random_tensor({3, 3}, rng);
    TD eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    TD out = matmul(eye, a);
    for (int i = 0; i < 9; ++i) CHECK(out.data()[i] == a.data()[i]);
  }
  SUBCASE("hand arithmetic") {
    TD out = matmul(TD({2, 2}, {1, 2, 3, 4}), TD({2, 1}, {5, 6}));
    CHECK(out.shape() == Shape{2, 1});
    CHECK(out.data()[0] == 17);
    CHECK(out.data()[1] == 39);
  }
  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(TD::zeros({2, 3}), TD::zeros({4, 5}));
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("(2, 3)") != std::string::npos);
      CHECK(msg.find("(4, 5)") != std::string::npos);
    }
  }
  SUBCASE("finite-difference gradients, linear op") {
    std::mt19937_64 rng(2);
    TD a = random_tensor({4, 5}, rng);
    TD b = random_tensor({5, 3}, rng);
    auto r = oracle::grad_check([&] { return sum(matmul(a, b)); }, {a, b});
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("batched and shared operands") {
    std::mt19937_64 rng(3);
    TD a = random_tensor({2, 3, 4, 5}, rng);
    TD b = random_tensor({5, 2}, rng);
    TD out = matmul(a, b);
    CHECK(out.shape() == Shape{2, 3, 4, 2});
    // slice (1, 2) against a plain 2-D product
    TD a12 = reshape(slice(slice(a, 0, 1, 1), 1, 2, 1), {4, 5});
    TD ref = matmul(a12, b);
    for (int i = 0; i < 8; ++i) {
      CHECK(out.data()[(1 * 3 + 2) * 8 + i] == doctest::Approx(ref.data()[i]).epsilon(1e-14));
    }
    TD w = random_tensor({1, 3, 5, 2}, rng);
    auto r = oracle::grad_check([&] { return sum(mul(matmul(a, w), matmul(a, w))); }, {a, w});
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("softmax examples and row sums") {
  CHECK(softmax(TD({3}, {5, 5, 5}), 0).data()[1] == doctest::Approx(1.0 / 3));
  TD s = softmax(TD({2}, {0.0, std::log(2.0)}), 0);
  CHECK(s.data()[0] == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(s.data()[1] == doctest::Approx(2.0 / 3).epsilon(1e-14));
  TD big = softmax(TD({3}, {1000, 1000, 1000}), 0);
  for (double v : big.data()) CHECK(v == doctest::Approx(1.0 / 3));

  std::mt19937_64 rng(4);
  for (int axis = 0; axis < 3; ++axis) {
    TD x = random_tensor({3, 4, 5}, rng, -50, 50);
    TD y = softmax(x, axis);
    const auto& sh = y.shape();
    std::int64_t inner = 1;
    for (int i = axis + 1; i < 3; ++i) inner *= sh[i];
    const std::int64_t outer = y.numel() / (sh[axis] * inner);
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t i = 0; i < inner; ++i) {
        double acc = 0;
        for (std::int64_t e = 0; e < sh[axis]; ++e) {
          const double v = y.data()[(o * sh[axis] + e) * inner + i];
          CHECK(v >= 0);
          acc += v;
        }
        CHECK(std::abs(acc - 1.0) < 1e-12);
      }
    }
    TD w = random_tensor({3, 4, 5}, rng);
    auto r = oracle::grad_check([&] { return sum(mul(softmax(x, axis), w)); }, {x});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("permute") {
  std::mt19937_64 rng(5);
  TD x = random_tensor({2, 3, 4, 5}, rng);
  SUBCASE("identity is bit-identical") {
    TD y = permute(x, {0, 1, 2, 3});
    CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
  }
  SUBCASE("shape arithmetic and element mapping") {
    TD y = permute(x, {1, 2, 0, 3});
    CHECK(y.shape() == Shape{3, 4, 2, 5});
    // y[h, w, t, c] == x[t, h, w, c]
    for (int t = 0; t < 2; ++t)
      for (int h = 0; h < 3; ++h)
        for (int w = 0; w < 4; ++w)
          for (int c = 0; c < 5; ++c)
            CHECK(y.data()[((h * 4 + w) * 2 + t) * 5 + c] ==
                  x.data()[((t * 3 + h) * 4 + w) * 5 + c]);
  }
  SUBCASE("permute then inverse permute round-trips, random orders") {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> order{0, 1, 2, 3};
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<int> inv(4);
      for (int i = 0; i < 4; ++i) inv[order[i]] = i;
      TD back = permute(permute(x, order), inv);
      CHECK(back.shape() == x.shape());
      CHECK(std::equal(x.data().begin(), x.data().end(), back.data().begin()));
    }
  }
  SUBCASE("invalid permutation") {
    CHECK_THROWS_AS(permute(x, {0, 1, 1, 3}), ShapeError);
    CHECK_THROWS_AS(permute(x, {0, 1, 2}), ShapeError);
  }
  SUBCASE("gradient is the inverse permutation") {
    TD w = random_tensor({4, 2, 5, 3}, rng);
    auto r = oracle::grad_check([&] { return sum(mul(permute(x, {2, 0, 3, 1}), w)); }, {x});
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("backward contract") {
  std::mt19937_64 rng(6);
  TD x = random_tensor({3, 4}, rng);
  x.set_requires_grad(true);

  SUBCASE("sum gives all-ones") {
    Tape<double> tape;
    auto scope = tape.activate();
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("sum of squares gives 2x") {
    Tape<double> tape;
    auto scope = tape.activate();
    backward(sum(mul(x, x)));
    for (int i = 0; i < 12; ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.data()[i]));
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape<double> tape;
    auto scope = tape.activate();
    CHECK_THROWS_AS(backward(scale(x, 2.0)), GraphError);
  }
  SUBCASE("double backward without reset is an error; reset allows a new graph") {
    Tape<double> tape;
    auto scope = tape.activate();
    TD l = sum(x);
    tape.backward(l);
    CHECK_THROWS_AS(tape.backward(l), GraphError);
    tape.reset();
    x.zero_grad();
    TD l2 = sum(scale(x, 3.0));
    tape.backward(l2);
    CHECK(x.grad()[0] == 3.0);
  }
  SUBCASE("no tape, no recording") {
    TD y = sum(mul(x, x));
    CHECK(!y.requires_grad());
    CHECK_THROWS_AS(backward(y), GraphError);
  }
  SUBCASE("every reachable requires-grad tensor gets a grad") {
    TD unused_path = random_tensor({3, 4}, rng);
    unused_path.set_requires_grad(true);
    Tape<double> tape;
    auto scope = tape.activate();
    // relu of a negative input kills the gradient numerically, not structurally
    TD neg = TD::full({3, 4}, -1.0);
    TD l = sum(add(x, relu(mul(unused_path, neg))));
    TD inter = relu(mul(unused_path, neg));
    tape.backward(l);
    CHECK(unused_path.has_grad());
  }
}

TEST_CASE("finite-difference gradients of elementwise, reduction and layout ops") {
  std::mt19937_64 rng(8);
  TD a = random_tensor({3, 4}, rng);
  TD b = random_tensor({3, 4}, rng);
  TD bias = random_tensor({4}, rng);
  TD w = random_tensor({3, 4}, rng);
  auto weighted = [&](const TD& t) { return sum(mul(t, w)); };

  CHECK(oracle::grad_check([&] { return weighted(add(a, b)); }, {a, b}).max_rel_error < 1e-6);
  CHECK(oracle::grad_check([&] { return weighted(sub(a, b)); }, {a, b}).max_rel_error < 1e-6);
  CHECK(oracle::grad_check([&] { return weighted(mul(a, b)); }, {a, b}).max_rel_error < 1e-6);
  CHECK(oracle::grad_check([&] { return weighted(add_bias(a, bias)); }, {a, bias})
            .max_rel_error < 1e-6);
  CHECK(oracle::grad_check([&] { return weighted(scale(add_scalar(a, 0.3), -2.0)); }, {a})
            .max_rel_error < 1e-6);
  CHECK(oracle::grad_check([&] { return weighted(sigmoid(a)); }, {a}).max_rel_error < 1e-4);
  CHECK(oracle::grad_check([&] { return weighted(log_sigmoid(scale(a, 5.0))); }, {a})
            .max_rel_error < 1e-4);
  CHECK(oracle::grad_check([&] { return weighted(leaky_relu(a, 0.2)); }, {a}).max_rel_error <
        1e-4);
  CHECK(oracle::grad_check([&] { return weighted(abs(a)); }, {a}).max_rel_error < 1e-4);
  CHECK(oracle::grad_check([&] { return weighted(relu(a)); }, {a}).max_rel_error < 1e-4);
  CHECK(oracle::grad_check([&] { return mean(mul(a, b)); }, {a}).max_rel_error < 1e-6);
  CHECK(oracle::grad_check(
            [&] { return sum(mul(mean_axis(a, 0), TD({4}, {1, -2, 3, 0.5}))); }, {a})
            .max_rel_error < 1e-6);
  CHECK(oracle::grad_check(
            [&] { return sum(mul(concat<double>({a, b}, 0), concat<double>({w, w}, 0))); },
            {a, b})
            .max_rel_error < 1e-6);
  CHECK(oracle::grad_check(
            [&] { return sum(mul(concat<double>({a, b}, 1), concat<double>({w, w}, 1))); },
            {a, b})
            .max_rel_error < 1e-6);
  CHECK(oracle::grad_check([&] { return sum(mul(slice(a, 1, 1, 2), slice(w, 1, 0, 2))); }, {a})
            .max_rel_error < 1e-6);
  CHECK(oracle::grad_check([&] { return weighted(reshape(transpose(reshape(a, {4, 3})), {3, 4})); },
                           {a})
            .max_rel_error < 1e-6);
}

TEST_CASE("layer norm") {
  std::mt19937_64 rng(9);
  TD gamma = TD::full({6}, 1.0);
  TD beta = TD::zeros({6});
  SUBCASE("constant input normalizes to zero") {
    TD y = layer_norm(TD::full({2, 6}, 3.5), gamma, beta);
    for (double v : y.data()) CHECK(std::abs(v) < 1e-12);
  }
  SUBCASE("zero mean, unit variance along the axis") {
    TD y = layer_norm(random_tensor({5, 6}, rng, -3, 7), gamma, beta, 0.0);
    for (int r = 0; r < 5; ++r) {
      double m = 0, v = 0;
      for (int j = 0; j < 6; ++j) m += y.data()[r * 6 + j];
      m /= 6;
      for (int j = 0; j < 6; ++j) v += std::pow(y.data()[r * 6 + j] - m, 2);
      v /= 6;
      CHECK(std::abs(m) < 1e-6);
      CHECK(std::abs(v - 1.0) < 1e-6);
    }
  }
  SUBCASE("affine invariance a*x + b") {
    TD x = random_tensor({4, 6}, rng);
    TD y0 = layer_norm(x, gamma, beta, 0.0);
    TD y1 = layer_norm(add_scalar(scale(x, 3.7), -11.0), gamma, beta, 0.0);
    for (int i = 0; i < 24; ++i) CHECK(std::abs(y0.data()[i] - y1.data()[i]) < 1e-6);
  }
  SUBCASE("degenerate axis rejected") {
    CHECK_THROWS_AS(layer_norm(TD::zeros({4, 1}), TD::full({1}, 1.0), TD::zeros({1})),
                    ShapeError);
  }
  SUBCASE("gradients") {
    TD x = random_tensor({3, 6}, rng);
    TD g = random_tensor({6}, rng);
    TD bt = random_tensor({6}, rng);
    TD w = random_tensor({3, 6}, rng);
    auto r = oracle::grad_check([&] { return sum(mul(layer_norm(x, g, bt), w)); }, {x, g, bt});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("bce with logits") {
  std::mt19937_64 rng(10);
  TD target({4}, {0, 1, 1, 0});
  CHECK(bce_with_logits(TD::zeros({4}), target).item() == doctest::Approx(std::log(2.0)));
  CHECK(bce_with_logits(TD({4}, {-40, 40, 40, -40}), target).item() < 1e-10);
  TD z = random_tensor({2, 4, 4}, rng, -3, 3);
  std::vector<double> y(32);
  for (auto& v : y) v = rng() % 2;
  TD t({2, 4, 4}, y);
  CHECK(oracle::grad_check([&] { return bce_with_logits(z, t); }, {z}).max_rel_error < 1e-6);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "stt_ckpt_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(11);
  TD a = random_tensor({2, 3}, rng);
  TD b = random_tensor({5}, rng);
  std::vector<CheckpointRecord> records{make_record("layer.a", "model", a),
                                        make_record("layer.b", "model", b),
                                        make_record("adam.m/layer.b", "optimizer", b)};
  save_checkpoint(dir / "ck", records, ValueType::kF64, {{"iteration", 7}});
  Checkpoint ck = load_checkpoint(dir / "ck.json");
  REQUIRE(ck.records.size() == 3);
  CHECK(ck.manifest["load_order"][1] == "layer.b");
  CHECK(ck.manifest["metadata"]["iteration"] == 7);
  CHECK(ck.total_elements("model") == 11);
  CHECK(ck.manifest["total_elements"]["model"] == 11);
  TD a2 = TD::zeros({2, 3});
  assign_record(*ck.find("layer.a"), a2);
  CHECK(std::equal(a.data().begin(), a.data().end(), a2.data().begin()));
  TD wrong = TD::zeros({3, 2});
  CHECK_THROWS_AS(assign_record(*ck.find("layer.a"), wrong), ShapeError);

  save_checkpoint(dir / "ck32.bin", records, ValueType::kF32);
  Checkpoint ck32 = load_checkpoint(dir / "ck32");
  CHECK(ck32.records[0].values[0] == static_cast<double>(static_cast<float>(a.data()[0])));
  std::filesystem::remove_all(dir);
}
