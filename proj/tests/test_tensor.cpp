#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lungx/gradcheck.hpp"
#include "lungx/norm.hpp"
#include "lungx/rng.hpp"
#include "lungx/tensor.hpp"

using namespace lungx;
using Catch::Approx;

namespace {

TensorD rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TensorD::from(std::move(v), std::move(shape));
}

// deliberately wrong backward rule: forward doubles, backward claims x3
TensorD broken_double(const TensorD& x) {
  std::vector<double> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0 * x.data()[i];
  TensorD out = TensorD::from(std::move(v), x.shape());
  attach_tape<double>(out, "broken_double", {x}, [x](TensorNode<double>& self) {
    auto& g = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 3.0 * self.grad[i];
  });
  return out;
}

}  // namespace

TEST_CASE("tensor construction enforces shape/data consistency") {
  REQUIRE_THROWS_AS(TensorD::from({1.0, 2.0}, {3}), std::invalid_argument);
  REQUIRE_THROWS_AS(TensorD::zeros({2, 0, 3}), std::invalid_argument);
  auto t = TensorD::from({1, 2, 3, 4, 5, 6}, {2, 3});
  REQUIRE(t.numel() == 6);
  REQUIRE(t.at({1, 2}) == 6.0);
}

TEST_CASE("activation values") {
  auto x = TensorD::from({0.0}, {1});
  REQUIRE(sigmoid(x).item() == Approx(0.5));
  REQUIRE(gelu(x).item() == 0.0);
  // gelu(1) = 1 * Phi(1)
  auto one = TensorD::from({1.0}, {1});
  REQUIRE(gelu(one).item() == Approx(0.8413447460685429).epsilon(1e-10));
  REQUIRE(silu(one).item() == Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
  REQUIRE(relu(TensorD::from({-2.0}, {1})).item() == 0.0);
}

TEST_CASE("sigmoid outputs lie strictly in (0,1) for finite inputs") {
  Rng rng(7);
  auto x = rand_tensor({64}, rng, -50.0, 50.0);
  auto y = sigmoid(x);
  for (double v : y.data()) {
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("softmax of a constant row is uniform and rows always sum to 1") {
  auto c = softmax(TensorD::full({5}, 3.25), 0);
  for (double v : c.data()) REQUIRE(v == Approx(0.2).epsilon(1e-12));

  Rng rng(11);
  auto x = rand_tensor({4, 7}, rng, -5.0, 5.0);
  auto y = softmax(x, 1);
  for (std::size_t r = 0; r < 4; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
      double v = y.at({r, i});
      REQUIRE(v >= 0.0);
      sum += v;
    }
    REQUIRE(std::fabs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("layernorm standardizes to zero mean and unit variance") {
  auto x = TensorD::from({1.0, 2.0, 3.0}, {1, 3});
  auto gain = TensorD::full({3}, 1.0);
  auto bias = TensorD::zeros({3});
  auto y = layernorm(x, gain, bias, 1e-9);
  double mean = (y.at({0, 0}) + y.at({0, 1}) + y.at({0, 2})) / 3.0;
  double var = 0.0;
  for (std::size_t i = 0; i < 3; ++i) var += (y.at({0, i}) - mean) * (y.at({0, i}) - mean);
  var /= 3.0;
  REQUIRE(mean == Approx(0.0).margin(1e-9));
  REQUIRE(var == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("batchnorm eval mode with unit running stats is affine-only") {
  BatchNorm<double> bn(2);
  bn.gain.data() = {2.0, 0.5};
  bn.bias.data() = {1.0, -1.0};
  auto x = TensorD::from({0.3, -0.8, 1.5, 0.2}, {2, 2});
  auto y = bn.forward(x, /*train=*/false);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 2; ++c) {
      double expect = bn.gain.data()[c] * x.at({b, c}) + bn.bias.data()[c];
      REQUIRE(y.at({b, c}) == Approx(expect).margin(2e-5));
    }
}

TEST_CASE("batchnorm updates running stats only in train mode") {
  BatchNorm<double> bn(1);
  auto before_mean = bn.stats.mean;
  auto x = TensorD::from({1.0, 3.0}, {2, 1});
  (void)bn.forward(x, /*train=*/false);
  REQUIRE(bn.stats.mean == before_mean);
  (void)bn.forward(x, /*train=*/true);
  REQUIRE(bn.stats.mean[0] == Approx(0.1 * 2.0));  // momentum 0.1, batch mean 2
}

TEST_CASE("matmul oracle and identity") {
  auto a = TensorD::from({1, 2, 3, 4}, {2, 2});
  auto v = TensorD::from({1, 1}, {2, 1});
  auto r = matmul(a, v);
  REQUIRE(r.at({0, 0}) == 3.0);
  REQUIRE(r.at({1, 0}) == 7.0);

  auto eye = TensorD::from({1, 0, 0, 1}, {2, 2});
  auto same = matmul(a, eye);
  REQUIRE(same.data() == a.data());

  REQUIRE_THROWS_AS(matmul(a, TensorD::zeros({3, 2})), std::invalid_argument);
}

TEST_CASE("concat shape arithmetic and slice round trip") {
  auto a = TensorD::zeros({2, 3});
  auto b = TensorD::zeros({2, 5});
  auto c = concat<double>({a, b}, 1);
  REQUIRE(c.shape() == Shape{2, 8});

  Rng rng(3);
  auto x = rand_tensor({2, 8}, rng);
  auto left = slice(x, 1, 0, 3);
  auto right = slice(x, 1, 3, 5);
  auto joined = concat<double>({left, right}, 1);
  REQUIRE(joined.data() == x.data());
}

TEST_CASE("broadcast add/mul against explicit loops") {
  Rng rng(5);
  auto x = rand_tensor({2, 3, 2, 2}, rng);
  auto w = rand_tensor({1, 3, 1, 1}, rng);
  auto y = mul(x, w);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
          REQUIRE(y.at({b, c, i, j}) == Approx(x.at({b, c, i, j}) * w.at({0, c, 0, 0})));
  REQUIRE_THROWS_AS(add(TensorD::zeros({2, 3}), TensorD::zeros({2, 4})), std::invalid_argument);
}

TEST_CASE("dropout identities and Monte Carlo behaviour") {
  Rng data_rng(17);
  auto x = rand_tensor({100}, data_rng, 0.5, 1.5);

  Rng r1(1);
  auto eval_out = dropout(x, 0.5, /*train=*/false, r1);
  REQUIRE(eval_out.data() == x.data());

  auto zero_rate = dropout(x, 0.0, /*train=*/true, r1);
  REQUIRE(zero_rate.data() == x.data());

  REQUIRE_THROWS_AS(dropout(x, 1.0, true, r1), std::invalid_argument);

  // rate 0.5 over 1e4 ones: survivor fraction within 3 sigma, mean within 5%
  auto ones = TensorD::full({10000}, 1.0);
  Rng r2(99);
  auto y = dropout(ones, 0.5, true, r2);
  std::size_t survivors = 0;
  double sum = 0.0;
  for (double v : y.data()) {
    if (v != 0.0) ++survivors;
    sum += v;
  }
  double frac = static_cast<double>(survivors) / 10000.0;
  REQUIRE(frac > 0.485);
  REQUIRE(frac < 0.515);
  REQUIRE(sum / 10000.0 == Approx(1.0).epsilon(0.05));
}

TEST_CASE("backward computes hand-checked gradients") {
  SECTION("identity: loss = x gives dx = 1") {
    auto x = TensorD::scalar(3.7, true);
    auto loss = add_scalar(x, 0.0);
    backward(loss);
    REQUIRE(x.grad()[0] == 1.0);
  }
  SECTION("loss = sum(x^2) at [1,2] gives [2,4]") {
    auto x = TensorD::from({1.0, 2.0}, {2}, true);
    auto loss = sum_all(mul(x, x));
    backward(loss);
    REQUIRE(x.grad()[0] == Approx(2.0));
    REQUIRE(x.grad()[1] == Approx(4.0));
  }
  SECTION("fan-out accumulates: y = x + x gives dx = 2") {
    auto x = TensorD::from({0.5, -1.0}, {2}, true);
    auto loss = sum_all(add(x, x));
    backward(loss);
    REQUIRE(x.grad()[0] == Approx(2.0));
    REQUIRE(x.grad()[1] == Approx(2.0));
  }
  SECTION("untracked tensors stay untouched") {
    auto x = TensorD::from({1.0}, {1}, true);
    auto c = TensorD::from({2.0}, {1}, false);
    auto loss = sum_all(mul(x, c));
    backward(loss);
    REQUIRE_FALSE(c.has_grad());
    REQUIRE(x.grad()[0] == Approx(2.0));
  }
  SECTION("non-scalar loss is rejected") {
    auto x = TensorD::from({1.0, 2.0}, {2}, true);
    auto y = mul(x, x);
    REQUIRE_THROWS_AS(backward(y), std::invalid_argument);
  }
}

TEST_CASE("gradcheck validates primitives and catches corrupted rules") {
  Rng rng(23);

  SECTION("linear function has machine-precision error") {
    auto res = gradcheck([](const std::vector<TensorD>& in) { return sum_all(scale(in[0], 3.0)); },
                         {rand_tensor({4}, rng)});
    REQUIRE(res.pass);
    REQUIRE(res.max_rel_error < 1e-7);
  }
  SECTION("sigmoid-of-linear composite passes at 1e-4") {
    auto w = rand_tensor({3, 5}, rng);
    auto b = rand_tensor({3}, rng);
    auto res = gradcheck(
        [](const std::vector<TensorD>& in) {
          return sum_all(sigmoid(linear(in[0], in[1], in[2])));
        },
        {rand_tensor({2, 5}, rng), w, b});
    REQUIRE(res.pass);
  }
  SECTION("deliberately corrupted backward rule fails") {
    auto res = gradcheck([](const std::vector<TensorD>& in) { return sum_all(broken_double(in[0])); },
                         {rand_tensor({3}, rng)});
    REQUIRE_FALSE(res.pass);
  }
}

TEST_CASE("gradcheck across remaining elementwise and structural primitives") {
  Rng rng(31);
  auto check = [&](const char* what, auto fn, std::vector<TensorD> inputs) {
    auto res = gradcheck(fn, std::move(inputs));
    INFO(what << ": " << res.note);
    REQUIRE(res.pass);
  };

  check("add+mul broadcast",
        [](const std::vector<TensorD>& in) { return sum_all(mul(add(in[0], in[1]), in[0])); },
        {rand_tensor({2, 3, 2, 2}, rng), rand_tensor({1, 3, 1, 1}, rng)});
  check("matmul 3d",
        [](const std::vector<TensorD>& in) { return sum_all(matmul(in[0], in[1])); },
        {rand_tensor({2, 3, 4}, rng), rand_tensor({2, 4, 2}, rng)});
  check("softmax", [](const std::vector<TensorD>& in) {
          return sum_all(mul(softmax(in[0], 1), in[1]));
        },
        {rand_tensor({3, 5}, rng), rand_tensor({3, 5}, rng)});
  check("layernorm",
        [](const std::vector<TensorD>& in) { return sum_all(mul(layernorm(in[0], in[1], in[2], 1e-5), in[0])); },
        {rand_tensor({4, 6}, rng), rand_tensor({6}, rng, 0.5, 1.5), rand_tensor({6}, rng)});
  check("gelu+silu",
        [](const std::vector<TensorD>& in) { return sum_all(add(gelu(in[0]), silu(in[0]))); },
        {rand_tensor({10}, rng, -2.0, 2.0)});
  check("relu away from kink",
        [](const std::vector<TensorD>& in) { return sum_all(relu(in[0])); },
        {TensorD::from({-1.0, -0.3, 0.4, 2.0}, {4})});
  check("permute+reshape+concat+slice",
        [](const std::vector<TensorD>& in) {
          auto p = permute(in[0], {1, 0, 2});
          auto r = reshape(p, {3, 8});
          auto head = slice(r, 1, 0, 2);
          auto joined = concat<double>({head, r}, 1);
          return mean_all(mul(joined, joined));
        },
        {rand_tensor({4, 3, 2}, rng)});
  check("reductions",
        [](const std::vector<TensorD>& in) {
          return sum_all(add(reduce_mean(in[0], 1), reduce_max(in[0], 1)));
        },
        {rand_tensor({3, 5, 2}, rng)});
  check("clamp interior + log + pow",
        [](const std::vector<TensorD>& in) {
          auto c = clamp(in[0], 0.05, 0.95);
          return sum_all(add(log_op(c), pow_const(c, 2.5)));
        },
        {rand_tensor({8}, rng, 0.2, 0.8)});
  check("repeat_axis0",
        [](const std::vector<TensorD>& in) { return sum_all(mul(repeat_axis0(in[0], 3), in[1])); },
        {rand_tensor({1, 2, 2}, rng), rand_tensor({3, 2, 2}, rng)});
  check("batchnorm train",
        [](const std::vector<TensorD>& in) {
          RunningStats<double> rs{std::vector<double>(3, 0.0), std::vector<double>(3, 1.0)};
          auto y = batchnorm(in[0], in[1], in[2], rs, true, 0.1, 1e-5);
          return sum_all(mul(y, in[0]));
        },
        {rand_tensor({4, 3, 2, 2}, rng), rand_tensor({3}, rng, 0.5, 1.5), rand_tensor({3}, rng)});
  check("batchnorm eval",
        [](const std::vector<TensorD>& in) {
          RunningStats<double> rs{{0.1, -0.2, 0.3}, {1.1, 0.9, 1.3}};
          auto y = batchnorm(in[0], in[1], in[2], rs, false, 0.1, 1e-5);
          return sum_all(mul(y, y));
        },
        {rand_tensor({2, 3, 2, 2}, rng), rand_tensor({3}, rng, 0.5, 1.5), rand_tensor({3}, rng)});
  check("dropout with a replayed mask",
        [](const std::vector<TensorD>& in) {
          Rng mask_rng(1234);
          return sum_all(dropout(in[0], 0.4, true, mask_rng));
        },
        {rand_tensor({30}, rng)});
}
