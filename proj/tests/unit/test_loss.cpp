// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "stt/core/ops.hpp"
#include "stt/loss/losses.hpp"
#include "stt/optim/adam.hpp"

using namespace stt;
using namespace stt::loss;
using TD = Tensor<double>;

namespace {

TD random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = d(rng);
  return TD(std::move(shape), std::move(v));
}

TD random_binary(Shape shape, std::mt19937_64& rng) {
  std::bernoulli_distribution b(0.4);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = b(rng) ? 1.0 : 0.0;
  return TD(std::move(shape), std::move(v));
}

void zero(TD t) {
  for (auto& v : t.mutable_data()) v = 0;
}

}  // namespace

TEST_CASE("bce loss") {
  std::mt19937_64 rng(1);
  SUBCASE("zero logits give ln 2 for any target") {
    for (int i = 0; i < 5; ++i) {
      TD y = random_binary({2, 4, 4}, rng);
      CHECK(bce_loss(TD::zeros({2, 4, 4}), y).item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    }
  }
  SUBCASE("saturated logits give almost zero") {
    TD y = random_binary({2, 4, 4}, rng);
    std::vector<double> z(y.data().begin(), y.data().end());
    for (auto& v : z) v = v > 0.5 ? 40.0 : -40.0;
    const double l = bce_loss(TD({2, 4, 4}, z), y).item();
    CHECK(l >= 0.0);
    CHECK(l < 1e-10);
  }
  SUBCASE("non-negative on random inputs") {
    for (int i = 0; i < 20; ++i) {
      CHECK(bce_loss(random_tensor({3, 5}, rng, -30, 30), random_binary({3, 5}, rng)).item() >= 0.0);
    }
  }
  SUBCASE("gradient matches finite differences") {
    TD z = random_tensor({2, 4, 4}, rng, -3, 3);
    TD y = random_binary({2, 4, 4}, rng);
    auto r = oracle::grad_check([&] { return bce_loss(z, y); }, {z});
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(bce_loss(TD::zeros({2, 4}), TD::zeros({4, 2})), ShapeError);
  }
}

TEST_CASE("discriminator and adversarial loss") {
  std::mt19937_64 rng(2);
  nn::Rng init(3);
  const Shape s{2, 1, 4, 6, 6};
  TD image = random_tensor(s, rng, 0, 1);
  TD gt = random_binary(s, rng);
  TD pred = random_tensor(s, rng, 0.05, 0.95);

  SUBCASE("output shapes") {
    Discriminator<double> d(2, 16, init);
    TD f = concat<double>({image, gt}, 1);
    CHECK(d.logits(f).shape() == Shape{2});
    const TD prob = d.probability(f);
    for (double p : prob.data()) CHECK((p > 0.0 && p < 1.0));
    CHECK_THROWS_AS(d.logits(image), ShapeError);
    CHECK(d.parameters().size() == 4);
  }
  SUBCASE("zeroed final layer gives D = 1/2") {
    Discriminator<double> d(2, 16, init);
    zero(d.conv2().weight());
    zero(d.conv2().bias());
    const TD prob = d.probability(concat<double>({image, pred}, 1));
    for (double p : prob.data()) CHECK(p == 0.5);
    auto l = fg_bg_adversarial_loss(image, pred, gt, d, 0.1);
    CHECK(l.disc.item() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
    CHECK(l.gen.item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(l.matching.item() == 0.0);
  }
  SUBCASE("identical masks zero the matching term") {
    Discriminator<double> d(2, 16, init);
    auto l = fg_bg_adversarial_loss(image, gt, gt, d, 0.1);
    CHECK(l.matching.item() == 0.0);
    TD z = d.logits(concat<double>({image, gt}, 1));
    double expect = 0;
    for (double v : z.data()) expect += std::log1p(std::exp(-v)) / 2;
    CHECK(l.gen.item() == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("masks outside [0, 1] are rejected") {
    Discriminator<double> d(2, 16, init);
    TD bad = TD::full(s, 1.5);
    CHECK_THROWS_AS(fg_bg_adversarial_loss(image, bad, gt, d, 0.1), ValidationError);
    CHECK_THROWS_AS(fg_bg_adversarial_loss(image, pred, TD::full(s, -0.1), d, 0.1), ValidationError);
    CHECK_THROWS_AS(fg_bg_adversarial_loss(image, TD::zeros({2, 1, 4, 6, 5}), gt, d, 0.1),
                    ShapeError);
  }
  SUBCASE("generator and discriminator gradients have disjoint support") {
    Discriminator<double> d(2, 16, init);
    TD u = random_tensor(s, rng, -2, 2);
    u.set_requires_grad(true);
    const auto params = d.parameters();
    {
      Tape<double> tape;
      auto scope = tape.activate();
      auto l = fg_bg_adversarial_loss(image, sigmoid(u), gt, d, 0.1);
      tape.backward(l.gen);
    }
    CHECK(u.has_grad());
    for (const auto& p : params) CHECK_FALSE(p.tensor.has_grad());
    u.zero_grad();
    {
      Tape<double> tape;
      auto scope = tape.activate();
      auto l = fg_bg_adversarial_loss(image, sigmoid(u), gt, d, 0.1);
      tape.backward(l.disc);
    }
    CHECK_FALSE(u.has_grad());
    for (const auto& p : params) CHECK(p.tensor.has_grad());
  }
  SUBCASE("discriminator loss wiring is symmetric under swapping real and fake") {
    Discriminator<double> d(2, 16, init);
    TD a = pred, b = gt;
    auto pa = d.probability(concat<double>({image, a}, 1));
    auto pb = d.probability(concat<double>({image, b}, 1));
    auto l_ab = fg_bg_adversarial_loss(image, a, b, d, 0.1).disc.item();  // a fake, b real
    auto l_ba = fg_bg_adversarial_loss(image, b, a, d, 0.1).disc.item();
    double e_ab = 0, e_ba = 0;
    for (int i = 0; i < 2; ++i) {
      e_ab -= (std::log(pb.data()[i]) + std::log(1 - pa.data()[i])) / 2;
      e_ba -= (std::log(pa.data()[i]) + std::log(1 - pb.data()[i])) / 2;
    }
    CHECK(l_ab == doctest::Approx(e_ab).epsilon(1e-12));
    CHECK(l_ba == doctest::Approx(e_ba).epsilon(1e-12));
  }
  SUBCASE("one generator step on a frozen discriminator lowers the generator loss") {
    Discriminator<double> d(2, 16, init);
    TD u = random_tensor(s, rng, -2, 2);
    u.set_requires_grad(true);
    double before = 0;
    {
      Tape<double> tape;
      auto scope = tape.activate();
      auto l = fg_bg_adversarial_loss(image, sigmoid(u), gt, d, 0.1);
      before = l.gen.item();
      tape.backward(l.gen);
    }
    auto g = u.grad();
    auto w = u.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 1e-3 * g[i];
    const double after = fg_bg_adversarial_loss(image, sigmoid(u), gt, d, 0.1).gen.item();
    CHECK(after < before);
  }
}

TEST_CASE("adversarial gradients") {
  std::mt19937_64 rng(4);
  nn::Rng init(5);
  const Shape s{1, 1, 3, 5, 5};
  TD image = random_tensor(s, rng, 0, 1);
  TD gt = random_binary(s, rng);
  TD pred = random_tensor(s, rng, 0.2, 0.8);
  Discriminator<double> d(2, 4, init);
  SUBCASE("discriminator loss w.r.t. the discriminator") {
    std::vector<std::pair<std::string, TD>> wrt;
    for (auto& p : d.parameters()) wrt.emplace_back(p.name, p.tensor);
    auto r = oracle::grad_check_named(
        [&] { return fg_bg_adversarial_loss(image, pred, gt, d, 0.1).disc; }, wrt);
    INFO(r.worst_tensor);
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("generator loss w.r.t. the predicted mask") {
    auto r = oracle::grad_check([&] { return fg_bg_adversarial_loss(image, pred, gt, d, 0.7).gen; },
                                {pred});
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("discriminator forward w.r.t. input and weights") {
    TD f = random_tensor({2, 2, 4, 4, 6}, rng);
    TD g = random_tensor({2}, rng);
    std::vector<std::pair<std::string, TD>> wrt{{"f", f}};
    for (auto& p : d.parameters()) wrt.emplace_back(p.name, p.tensor);
    auto r = oracle::grad_check_named([&] { return sum(mul(d.logits(f), g)); }, wrt);
    INFO(r.worst_tensor);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("total loss") {
  std::mt19937_64 rng(6);
  const Shape s{1, 1, 2, 4, 4};
  model::ModelOutput<double> out{random_tensor(s, rng, -3, 3), random_tensor(s, rng, -3, 3)};
  SegTargets<double> tg{random_binary(s, rng), random_binary(s, rng)};
  const double pure = bce_loss(out.semantic_logits, tg.semantic).item() +
                      bce_loss(out.boundary_logits, tg.boundary).item();
  CHECK(total_loss(out, tg, TD::scalar(3.0), {0.0, 0.1}).item() == pure);
  CHECK(total_loss(out, tg, TD(), {0.5, 0.1}).item() == pure);
  CHECK(total_loss(out, tg, TD::scalar(1.0), {0.5, 0.1}).item() ==
        doctest::Approx(pure + 0.5).epsilon(1e-15));
  model::ModelOutput<double> huge{TD::full(s, 1e4), TD::full(s, -1e4)};
  CHECK(std::isfinite(total_loss(huge, tg, TD::scalar(1.0), {0.5, 0.1}).item()));
  CHECK_THROWS_AS((LossWeights{-1.0, 0.1}.validate()), ValidationError);
  CHECK_NOTHROW((LossWeights{}.validate()));
}

TEST_CASE("label-derived targets") {
  LabelVolume lv({1, 4, 5});
  // two touching instances in a 4x5 slice
  //  1 1 2 2 0
  //  1 1 2 2 0
  //  1 1 1 0 0
  //  0 0 0 0 0
  const std::uint32_t v[] = {1, 1, 2, 2, 0, 1, 1, 2, 2, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  lv.labels.assign(std::begin(v), std::end(v));
  const auto sem = semantic_mask(lv);
  const auto bnd = boundary_mask(lv);
  const std::uint8_t sem_expect[] = {1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const std::uint8_t bnd_expect[] = {0, 1, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 20; ++i) {
    CHECK(sem[i] == sem_expect[i]);
    CHECK(bnd[i] == bnd_expect[i]);
  }
  const auto region = boundary_region(lv, 0);
  CHECK(region[4] == 1);   // background next to label 2
  CHECK(region[19] == 0);
  CHECK(boundary_region(lv, 1)[19] == 1);  // diagonal to the change at (2, 3)
  CHECK(boundary_region(lv, 1)[18] == 1);
  CHECK(boundary_region(lv, 0)[18] == 0);

  TD m = mask_tensor<double>({sem, bnd}, lv.dims);
  CHECK(m.shape() == Shape{2, 1, 1, 4, 5});
  CHECK(m.data()[20 + 1] == 1.0);

  const std::vector<double> z(20, 0.0);
  CHECK(masked_bce(z, sem, region) == doctest::Approx(std::log(2.0)));
  CHECK(masked_bce(z, sem, std::vector<std::uint8_t>(20, 0)) == 0.0);
}

TEST_CASE("adam") {
  SUBCASE("first step moves each coordinate by lr against the gradient sign") {
    TD w({3}, {1.0, -2.0, 0.5}, true);
    optim::Adam<double> opt({{"w", w}}, {.lr = 0.01});
    {
      Tape<double> tape;
      auto scope = tape.activate();
      tape.backward(sum(mul(w, TD({3}, {2.0, -3.0, 0.0}))));
    }
    opt.step();
    CHECK(w.data()[0] == doctest::Approx(0.99).epsilon(1e-9));
    CHECK(w.data()[1] == doctest::Approx(-1.99).epsilon(1e-9));
    CHECK(w.data()[2] == 0.5);
    CHECK(opt.steps() == 1);
  }
  SUBCASE("minimizes a quadratic") {
    TD w({2}, {3.0, -4.0}, true);
    optim::Adam<double> opt({{"w", w}}, {.lr = 0.1});
    for (int i = 0; i < 500; ++i) {
      opt.zero_grad();
      Tape<double> tape;
      auto scope = tape.activate();
      tape.backward(sum(mul(w, w)));
      opt.step();
    }
    CHECK(std::abs(w.data()[0]) < 1e-2);
    CHECK(std::abs(w.data()[1]) < 1e-2);
  }
  SUBCASE("state round trip resumes bit-identically") {
    auto run = [](int steps, TD w, optim::Adam<double>& opt) {
      for (int i = 0; i < steps; ++i) {
        opt.zero_grad();
        Tape<double> tape;
        auto scope = tape.activate();
        tape.backward(sum(mul(mul(w, w), w)));
        opt.step();
      }
    };
    TD a({2}, {0.7, -0.3}, true);
    optim::Adam<double> oa({{"w", a}}, {.lr = 0.05});
    run(10, a, oa);

    TD b({2}, {0.7, -0.3}, true);
    optim::Adam<double> ob({{"w", b}}, {.lr = 0.05});
    run(4, b, ob);
    const auto dir = std::filesystem::temp_directory_path() / "stt_adam_state";
    std::filesystem::create_directories(dir);
    auto records = ob.state_records("adam");
    records.push_back(make_record("w", "model", b));
    save_checkpoint(dir / "ck", records, ValueType::kF64);
    const Checkpoint ck = load_checkpoint(dir / "ck");
    TD c({2}, {0.0, 0.0}, true);
    assign_record(*ck.find("w"), c);
    optim::Adam<double> oc({{"w", c}}, {.lr = 0.05});
    oc.load_state(ck, "adam", 4);
    run(6, c, oc);
    CHECK(c.data()[0] == a.data()[0]);
    CHECK(c.data()[1] == a.data()[1]);
    CHECK_THROWS_AS(oc.load_state(ck, "sgd", 4), IoError);
    std::filesystem::remove_all(dir);
  }
  SUBCASE("invalid hyperparameters") {
    TD w({1}, {1.0}, true);
    CHECK_THROWS_AS(optim::Adam<double>({{"w", w}}, {.lr = 0.0}), ValidationError);
    CHECK_THROWS_AS(optim::Adam<double>({{"w", w}}, {.beta1 = 1.0}), ValidationError);
  }
}
