#include <catch2/catch_amalgamated.hpp>

#include "lungx/gradcheck.hpp"
#include "lungx/image_ops.hpp"
#include "lungx/rng.hpp"

using namespace lungx;
using Catch::Approx;

namespace {

TensorD rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TensorD::from(std::move(v), std::move(shape));
}

}  // namespace

TEST_CASE("conv2d value oracles") {
  SECTION("1x1 identity kernel reproduces the input") {
    auto x = TensorD::from({1, 2, 3, 4, 5, 6, 7, 8, 9}, {1, 1, 3, 3});
    auto k = TensorD::from({1.0}, {1, 1, 1, 1});
    auto y = conv2d(x, k, TensorD(), 1, kSamePad);
    REQUIRE(y.data() == x.data());
  }
  SECTION("all-ones 3x3 against all-ones 3x3, valid padding, is 9") {
    auto x = TensorD::full({1, 1, 3, 3}, 1.0);
    auto k = TensorD::full({1, 1, 3, 3}, 1.0);
    auto y = conv2d(x, k, TensorD(), 1, 0);
    REQUIRE(y.shape() == Shape{1, 1, 1, 1});
    REQUIRE(y.item() == Approx(9.0));
  }
  SECTION("bias is added per output channel") {
    auto x = TensorD::full({1, 1, 2, 2}, 0.0);
    auto k = TensorD::full({2, 1, 1, 1}, 1.0);
    auto b = TensorD::from({0.5, -1.5}, {2});
    auto y = conv2d(x, k, b, 1, kSamePad);
    REQUIRE(y.at({0, 0, 0, 0}) == 0.5);
    REQUIRE(y.at({0, 1, 1, 1}) == -1.5);
  }
  SECTION("channel mismatch rejected with both shapes in the message") {
    auto x = TensorD::zeros({1, 3, 4, 4});
    auto k = TensorD::zeros({2, 4, 3, 3});
    try {
      (void)conv2d(x, k);
      FAIL("expected a shape error");
    } catch (const std::invalid_argument& e) {
      std::string msg = e.what();
      REQUIRE(msg.find("[1,3,4,4]") != std::string::npos);
      REQUIRE(msg.find("[2,4,3,3]") != std::string::npos);
    }
  }
}

TEST_CASE("same-padding follows the ceil(in/stride) contract") {
  SECTION("300 input through three stride-2 convs lands on 38") {
    auto x = TensorD::zeros({1, 1, 300, 300});
    auto k = TensorD::zeros({1, 1, 3, 3});
    auto h1 = conv2d(x, k, TensorD(), 2, kSamePad);
    REQUIRE(h1.shape() == Shape{1, 1, 150, 150});
    auto h2 = conv2d(h1, k, TensorD(), 2, kSamePad);
    REQUIRE(h2.shape() == Shape{1, 1, 75, 75});
    auto h3 = conv2d(h2, k, TensorD(), 2, kSamePad);
    REQUIRE(h3.shape() == Shape{1, 1, 38, 38});
  }
  SECTION("output extent equals ceil(in/stride) for in up to 512, stride 1 and 2") {
    auto k = TensorD::zeros({1, 1, 3, 3});
    for (std::size_t stride : {std::size_t(1), std::size_t(2)}) {
      for (std::size_t in = 1; in <= 512; in += (in < 16 ? 1 : 13)) {
        auto x = TensorD::zeros({1, 1, in, 3});
        auto y = conv2d(x, k, TensorD(), stride, kSamePad);
        REQUIRE(y.dim(2) == (in + stride - 1) / stride);
      }
    }
  }
}

TEST_CASE("depthwise conv oracles") {
  SECTION("per-channel identity kernels reproduce the input") {
    Rng rng(2);
    auto x = rand_tensor({1, 3, 4, 4}, rng);
    auto k = TensorD::full({3, 1, 1, 1}, 1.0);
    auto y = depthwise_conv2d(x, k);
    REQUIRE(y.data() == x.data());
  }
  SECTION("channel 0 doubled, channel 1 zeroed") {
    Rng rng(4);
    auto x = rand_tensor({1, 2, 3, 3}, rng);
    auto k = TensorD::from({2.0, 0.0}, {2, 1, 1, 1});
    auto y = depthwise_conv2d(x, k);
    for (std::size_t i = 0; i < 9; ++i) {
      REQUIRE(y.data()[i] == Approx(2.0 * x.data()[i]));
      REQUIRE(y.data()[9 + i] == 0.0);
    }
  }
  SECTION("kernel shape must be [C,1,kh,kw]") {
    REQUIRE_THROWS_AS(depthwise_conv2d(TensorD::zeros({1, 2, 4, 4}), TensorD::zeros({3, 1, 3, 3})),
                      std::invalid_argument);
  }
}

TEST_CASE("pooling oracles") {
  auto x = TensorD::from({1, 2, 3, 4}, {1, 1, 2, 2});
  REQUIRE(global_pool(x, PoolKind::Avg).item() == Approx(2.5));
  REQUIRE(global_pool(x, PoolKind::Max).item() == Approx(4.0));

  auto c = TensorD::full({1, 2, 4, 4}, 0.75);
  auto mp = pool2d(c, PoolKind::Max, 2, 2);
  auto ap = pool2d(c, PoolKind::Avg, 2, 2);
  REQUIRE(mp.data() == ap.data());
  REQUIRE(mp.at({0, 0, 0, 0}) == Approx(0.75));

  REQUIRE_THROWS_AS(pool2d(x, PoolKind::Max, 3, 1), std::invalid_argument);
}

TEST_CASE("max-pool gradient routes to the first maximal index on ties") {
  auto x = TensorD::from({1.0, 1.0, 1.0, 1.0}, {1, 1, 2, 2}, true);
  auto y = pool2d(x, PoolKind::Max, 2, 2);
  auto loss = sum_all(y);
  backward(loss);
  REQUIRE(x.grad() == std::vector<double>{1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("bilinear resize oracles") {
  SECTION("identity size reproduces the input") {
    Rng rng(9);
    auto x = rand_tensor({1, 2, 5, 7}, rng);
    auto y = bilinear_resize(x, 5, 7);
    REQUIRE(y.data() == x.data());
  }
  SECTION("2x2 map to a single pixel averages under half-pixel centers") {
    auto x = TensorD::from({0, 1, 2, 3}, {1, 1, 2, 2});
    REQUIRE(bilinear_resize(x, 1, 1).item() == Approx(1.5));
  }
  SECTION("constants stay constant at any size") {
    auto x = TensorD::full({1, 1, 3, 5}, 0.37);
    auto y = bilinear_resize(x, 11, 2);
    for (double v : y.data()) REQUIRE(v == Approx(0.37));
  }
}

TEST_CASE("pad2d zero-fills and preserves content") {
  auto x = TensorD::from({1, 2, 3, 4}, {1, 1, 2, 2});
  auto y = pad2d(x, 0, 1, 0, 2);
  REQUIRE(y.shape() == Shape{1, 1, 3, 4});
  REQUIRE(y.at({0, 0, 0, 0}) == 1.0);
  REQUIRE(y.at({0, 0, 1, 1}) == 4.0);
  REQUIRE(y.at({0, 0, 2, 0}) == 0.0);
  REQUIRE(y.at({0, 0, 0, 3}) == 0.0);
}

TEST_CASE("image op gradients match central finite differences") {
  Rng rng(41);
  auto check = [&](const char* what, auto fn, std::vector<TensorD> inputs) {
    auto res = gradcheck(fn, std::move(inputs));
    INFO(what << ": " << res.note);
    REQUIRE(res.pass);
  };

  check("conv2d stride1 same",
        [](const std::vector<TensorD>& in) { return sum_all(mul(conv2d(in[0], in[1], in[2], 1, kSamePad), in[0])); },
        {rand_tensor({1, 2, 5, 5}, rng), rand_tensor({2, 2, 3, 3}, rng), rand_tensor({2}, rng)});
  check("conv2d stride2 same",
        [](const std::vector<TensorD>& in) { return sum_all(conv2d(in[0], in[1], in[2], 2, kSamePad)); },
        {rand_tensor({2, 2, 5, 4}, rng), rand_tensor({3, 2, 3, 3}, rng), rand_tensor({3}, rng)});
  check("conv2d explicit pad",
        [](const std::vector<TensorD>& in) { return sum_all(conv2d(in[0], in[1], TensorD(), 1, 1)); },
        {rand_tensor({1, 1, 4, 4}, rng), rand_tensor({2, 1, 3, 3}, rng)});
  check("1x1 conv fast path",
        [](const std::vector<TensorD>& in) { return sum_all(conv2d(in[0], in[1], in[2], 1, 0)); },
        {rand_tensor({2, 3, 3, 3}, rng), rand_tensor({4, 3, 1, 1}, rng), rand_tensor({4}, rng)});
  check("depthwise stride2",
        [](const std::vector<TensorD>& in) { return sum_all(depthwise_conv2d(in[0], in[1], in[2], 2, kSamePad)); },
        {rand_tensor({1, 3, 5, 5}, rng), rand_tensor({3, 1, 3, 3}, rng), rand_tensor({3}, rng)});
  check("avg pool",
        [](const std::vector<TensorD>& in) { return sum_all(mul(pool2d(in[0], PoolKind::Avg, 2, 2), in[1])); },
        {rand_tensor({1, 2, 4, 4}, rng), rand_tensor({1, 2, 2, 2}, rng)});
  check("max pool",
        [](const std::vector<TensorD>& in) { return sum_all(mul(pool2d(in[0], PoolKind::Max, 2, 1), in[1])); },
        {rand_tensor({1, 1, 4, 4}, rng), rand_tensor({1, 1, 3, 3}, rng)});
  check("global pools",
        [](const std::vector<TensorD>& in) {
          return sum_all(add(global_pool(in[0], PoolKind::Avg), global_pool(in[0], PoolKind::Max)));
        },
        {rand_tensor({2, 3, 3, 3}, rng)});
  check("bilinear up+down",
        [](const std::vector<TensorD>& in) {
          auto up = bilinear_resize(in[0], 7, 6);
          return sum_all(mul(bilinear_resize(up, 3, 2), bilinear_resize(in[0], 3, 2)));
        },
        {rand_tensor({1, 2, 4, 3}, rng)});
  check("pad2d",
        [](const std::vector<TensorD>& in) { return sum_all(mul(pad2d(in[0], 1, 2, 0, 1), pad2d(in[0], 1, 2, 0, 1))); },
        {rand_tensor({1, 2, 3, 3}, rng)});
}
