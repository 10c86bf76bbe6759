#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lungx/optim.hpp"
#include "lungx/rng.hpp"

using namespace lungx;
using Catch::Approx;

TEST_CASE("adamw single-step oracles") {
  SECTION("zero gradient and zero weight decay leave parameters unchanged") {
    auto theta = TensorD::from({1.5, -2.0}, {2}, true);
    theta.grad();  // allocate zeros
    AdamW<double> opt({{"w", theta}}, /*weight_decay=*/0.0);
    opt.step(0.1);
    REQUIRE(theta.data()[0] == 1.5);
    REQUIRE(theta.data()[1] == -2.0);
  }
  SECTION("hand-rolled single scalar step") {
    auto theta = TensorD::from({1.0}, {1}, true);
    theta.grad()[0] = 1.0;
    AdamW<double> opt({{"w", theta}}, /*weight_decay=*/1e-4);
    opt.step(0.1);
    // m=0.1, v=0.001, mhat=1, vhat=1 -> step 0.1/(1+1e-8), decay 0.1*1e-4*1
    double expect = 1.0 - 0.1 / (1.0 + 1e-8) - 0.1 * 1e-4 * 1.0;
    REQUIRE(theta.data()[0] == Approx(expect).margin(1e-15));
    REQUIRE(theta.data()[0] == Approx(0.9 - 0.1 * 1e-4).margin(1e-7));
  }
  SECTION("with zero gradients throughout, only decoupled decay acts") {
    auto theta = TensorD::from({2.0}, {1}, true);
    theta.grad()[0] = 0.0;
    AdamW<double> opt({{"w", theta}}, /*weight_decay=*/0.01);
    opt.step(0.1);
    REQUIRE(theta.data()[0] == Approx(2.0 * (1.0 - 0.1 * 0.01)).margin(1e-15));
    opt.step(0.1);
    REQUIRE(theta.data()[0] == Approx(2.0 * std::pow(1.0 - 0.1 * 0.01, 2)).margin(1e-12));
  }
  SECTION("parameter/state shape mismatch is rejected") {
    auto theta = TensorD::from({1.0, 2.0}, {2}, true);
    AdamW<double> opt({{"w", theta}}, 0.0);
    theta.data().resize(5, 0.0);  // break congruence deliberately
    REQUIRE_THROWS_AS(opt.step(0.1), std::invalid_argument);
  }
}

TEST_CASE("gradient clipping") {
  SECTION("under the threshold nothing changes") {
    auto a = TensorD::from({0.3}, {1}, true);
    a.grad()[0] = 0.5;
    NamedParams<double> params{{"a", a}};
    double norm = clip_grad_norm(params, 1.0);
    REQUIRE(norm == Approx(0.5));
    REQUIRE(a.grad()[0] == 0.5);
  }
  SECTION("grads [3] and [4] scale to [0.6] and [0.8]") {
    auto a = TensorD::from({0.0}, {1}, true);
    auto b = TensorD::from({0.0}, {1}, true);
    a.grad()[0] = 3.0;
    b.grad()[0] = 4.0;
    NamedParams<double> params{{"a", a}, {"b", b}};
    double norm = clip_grad_norm(params, 1.0);
    REQUIRE(norm == Approx(5.0));
    REQUIRE(a.grad()[0] == Approx(0.6));
    REQUIRE(b.grad()[0] == Approx(0.8));
  }
  SECTION("post-clip norm never exceeds 1 + 1e-6") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
      NamedParams<double> params;
      std::vector<TensorD> keep;
      for (int k = 0; k < 3; ++k) {
        auto t = TensorD::zeros({4}, true);
        for (auto& g : t.grad()) g = rng.uniform(-10.0, 10.0);
        keep.push_back(t);
        params.push_back({"p" + std::to_string(k), t});
      }
      clip_grad_norm(params, 1.0);
      double sq = 0.0;
      for (auto& [n, p] : params)
        for (double g : p.grad()) sq += g * g;
      REQUIRE(std::sqrt(sq) <= 1.0 + 1e-6);
    }
  }
}

TEST_CASE("one-cycle schedule") {
  OneCycle sched;
  sched.total_steps = 1000;

  SECTION("endpoints") {
    REQUIRE(sched.lr_at(0) == Approx(8e-6).epsilon(1e-12));
    REQUIRE(sched.lr_at(300) == Approx(2e-4).epsilon(1e-12));
    REQUIRE(sched.lr_at(1000) == Approx(2e-8).epsilon(1e-12));
  }
  SECTION("continuous and peaked exactly once") {
    double prev = sched.lr_at(0);
    double max_lr = prev;
    std::size_t argmax = 0, max_count = 0;
    for (std::size_t s = 1; s <= 1000; ++s) {
      double lr = sched.lr_at(s);
      REQUIRE(std::fabs(lr - prev) < 2e-6);  // no jumps
      if (lr > max_lr) {
        max_lr = lr;
        argmax = s;
        max_count = 1;
      } else if (lr == max_lr) {
        ++max_count;
      }
      prev = lr;
    }
    REQUIRE(argmax == 300);
    REQUIRE(max_count == 1);
    REQUIRE(max_lr == Approx(2e-4));
  }
  SECTION("monotone up then down") {
    for (std::size_t s = 1; s <= 300; ++s) REQUIRE(sched.lr_at(s) > sched.lr_at(s - 1));
    for (std::size_t s = 301; s <= 1000; ++s) REQUIRE(sched.lr_at(s) < sched.lr_at(s - 1));
  }
  SECTION("step out of range rejected") {
    REQUIRE_THROWS_AS(sched.lr_at(1001), std::invalid_argument);
  }
}

TEST_CASE("early stopping patience semantics") {
  SECTION("the 0.90 then seven 0.89 fixture stops after epoch 8, best at 1") {
    EarlyStopping es(7);
    std::size_t epochs_run = 0;
    std::vector<double> aucs{0.90, 0.89, 0.89, 0.89, 0.89, 0.89, 0.89, 0.89, 0.89, 0.89};
    for (std::size_t e = 1; e <= aucs.size(); ++e) {
      es.update(aucs[e - 1], e);
      ++epochs_run;
      if (es.should_stop()) break;
    }
    REQUIRE(epochs_run == 8);
    REQUIRE(es.best_epoch() == 1);
    REQUIRE(es.best() == 0.90);
  }
  SECTION("counter resets to zero on strict improvement") {
    EarlyStopping es(3);
    es.update(0.5, 1);
    es.update(0.4, 2);
    es.update(0.45, 3);
    REQUIRE(es.stale() == 2);
    REQUIRE(es.update(0.6, 4));
    REQUIRE(es.stale() == 0);
    es.update(0.59, 5);
    es.update(0.58, 6);
    REQUIRE_FALSE(es.should_stop());
    es.update(0.57, 7);
    REQUIRE(es.should_stop());
  }
  SECTION("improvement below 1e-6 granularity does not count") {
    EarlyStopping es(2);
    REQUIRE(es.update(0.80, 1));
    REQUIRE_FALSE(es.update(0.80 + 5e-7, 2));
    REQUIRE(es.update(0.80 + 5e-6, 3));
  }
}
