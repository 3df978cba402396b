#include <cmath>

#include "doctest.h"
#include "mapfusion/ad/ops.hpp"
#include "mapfusion/parallel.hpp"
#include "mapfusion/rng.hpp"
#include "oracles.hpp"

using namespace mapfusion;
using namespace mapfusion::ad;
using mapfusion::testing::naive_conv;

namespace {

template <typename T>
std::vector<T> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

template <typename T>
double conv_vs_oracle(std::int64_t N, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t O, std::int64_t K,
                      int stride, int pad, bool with_bias, std::uint64_t seed) {
  Tensor<T> x({N, C, H, W}, random_values<T>(N * C * H * W, seed));
  Tensor<T> w({O, C, K, K}, random_values<T>(O * C * K * K, seed + 1));
  Tensor<T> b = with_bias ? Tensor<T>({O}, random_values<T>(O, seed + 2)) : Tensor<T>();
  const auto y = conv2d(x, w, b, {stride, pad});
  const auto ref = naive_conv(x, w, b, stride, pad);
  REQUIRE(y.size() == ref.size());
  double worst = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(double(y.data()[i]) - ref[i]));
  return worst;
}

}  // namespace

TEST_CASE("conv2d of ones with a 3x3 ones kernel") {
  Tensor<float> x({1, 1, 3, 3}, 1.0f);
  Tensor<float> w({1, 1, 3, 3}, 1.0f);
  const auto y = conv2d(x, w, Tensor<float>(), {1, 1});
  const std::vector<float> expect{4, 6, 4, 6, 9, 6, 4, 6, 4};
  CHECK(y.values() == expect);
}

TEST_CASE("conv2d with a centered delta kernel is the identity") {
  Tensor<float> x({1, 2, 5, 4}, random_values<float>(40, 3));
  std::vector<float> k(2 * 2 * 9, 0.0f);
  k[(0 * 2 + 0) * 9 + 4] = 1.0f;
  k[(1 * 2 + 1) * 9 + 4] = 1.0f;
  const auto y = conv2d(x, Tensor<float>({2, 2, 3, 3}, k), Tensor<float>(), {1, 1});
  CHECK(y.values() == x.values());
}

TEST_CASE("conv2d matches a direct loop") {
  struct Case {
    std::int64_t N, C, H, W, O, K;
    int stride, pad;
  };
  const std::vector<Case> cases{{1, 1, 5, 5, 1, 3, 1, 1},  {1, 3, 7, 6, 4, 3, 1, 1},  {2, 2, 8, 8, 3, 1, 1, 0},
                                {1, 5, 9, 11, 2, 3, 2, 1}, {1, 4, 6, 6, 3, 5, 1, 2},  {1, 2, 6, 7, 2, 3, 1, 0},
                                {1, 6, 70, 65, 5, 3, 1, 1}, {1, 3, 10, 10, 2, 3, 3, 1}};
  std::uint64_t seed = 10;
  for (const auto& c : cases) {
    CAPTURE(c.C);
    CAPTURE(c.H);
    CAPTURE(c.stride);
    CHECK(conv_vs_oracle<float>(c.N, c.C, c.H, c.W, c.O, c.K, c.stride, c.pad, true, seed) < 1e-5);
    CHECK(conv_vs_oracle<double>(c.N, c.C, c.H, c.W, c.O, c.K, c.stride, c.pad, seed % 2 == 0, seed) < 1e-9);
    seed += 7;
  }
}

TEST_CASE("conv2d rejects mismatched shapes") {
  Tensor<float> x({1, 2, 4, 4});
  CHECK_THROWS_AS(conv2d(x, Tensor<float>({1, 3, 3, 3}), Tensor<float>()), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor<float>({1, 2, 3, 3}), Tensor<float>({2})), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensor<float>({2, 4, 4}), Tensor<float>({1, 2, 3, 3}), Tensor<float>()), ShapeError);
}

TEST_CASE("batch norm in training mode normalizes each channel") {
  const std::int64_t C = 3;
  Tensor<double> x({2, C, 4, 5}, random_values<double>(2 * C * 20, 5));
  for (std::size_t i = 0; i < x.size(); ++i) x.mutable_data()[i] = 3.0 + 2.0 * x.data()[i];
  Tensor<double> gain({C}, 1.0), offset({C}, 0.0), rm({C}, 0.0), rv({C}, 1.0);
  const auto y = batch_norm2d(x, gain, offset, rm, rv, true);
  for (std::int64_t c = 0; c < C; ++c) {
    double s = 0, s2 = 0, xs = 0, xs2 = 0;
    int n = 0;
    for (std::int64_t b = 0; b < 2; ++b)
      for (std::int64_t k = 0; k < 20; ++k) {
        const double v = y.data()[(b * C + c) * 20 + k], u = x.data()[(b * C + c) * 20 + k];
        s += v;
        s2 += v * v;
        xs += u;
        xs2 += u * u;
        ++n;
      }
    CHECK(std::abs(s / n) < 1e-9);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(1e-3));
    const double mean = xs / n, unbiased = (xs2 - n * mean * mean) / (n - 1);
    CHECK(rm.data()[c] == doctest::Approx(0.1 * mean).epsilon(1e-12));
    CHECK(rv.data()[c] == doctest::Approx(0.9 + 0.1 * unbiased).epsilon(1e-12));
  }
}

TEST_CASE("batch norm eval with unit stats is nearly the identity") {
  Tensor<double> x({1, 2, 3, 3}, random_values<double>(18, 8));
  Tensor<double> gain({2}, 1.0), offset({2}, 0.0), rm({2}, 0.0), rv({2}, 1.0);
  const auto y = batch_norm2d(x, gain, offset, rm, rv, false);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i] / std::sqrt(1.0 + 1e-5)));
  CHECK(rm.data()[0] == 0.0);
  CHECK(rv.data()[1] == 1.0);
}

TEST_CASE("batch norm training needs two values per channel") {
  Tensor<float> x({1, 2, 1, 1}, 1.0f);
  Tensor<float> gain({2}, 1.0f), offset({2}, 0.0f), rm({2}, 0.0f), rv({2}, 1.0f);
  CHECK_THROWS(batch_norm2d(x, gain, offset, rm, rv, true));
  CHECK_NOTHROW(batch_norm2d(x, gain, offset, rm, rv, false));
}

TEST_CASE("relu and sigmoid values") {
  Tensor<double> x({4}, std::vector<double>{-2.0, 0.0, 0.5, 40.0});
  CHECK(relu(x).values() == std::vector<double>{0.0, 0.0, 0.5, 40.0});
  const auto s = sigmoid(x);
  CHECK(s.data()[1] == 0.5);
  CHECK(s.data()[0] == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
  CHECK(s.data()[3] <= 1.0);
  CHECK(sigmoid(Tensor<double>({1}, std::vector<double>{-800.0})).data()[0] >= 0.0);
}

TEST_CASE("concat and slice channels") {
  Tensor<float> a({1, 2, 2, 2}, random_values<float>(8, 1));
  Tensor<float> b({1, 3, 2, 2}, random_values<float>(12, 2));
  const auto c = concat_channels(a, b);
  CHECK(c.shape() == Shape{1, 5, 2, 2});
  CHECK(slice_channels(c, 0, 2).values() == a.values());
  CHECK(slice_channels(c, 2, 5).values() == b.values());
  CHECK_THROWS_AS(concat_channels(a, Tensor<float>({1, 1, 3, 2})), ShapeError);
  CHECK_THROWS(slice_channels(c, 3, 6));
  CHECK_THROWS_AS(add(a, b), ShapeError);
}

TEST_CASE("backward accumulates through shared inputs") {
  auto x = Tensor<double>::parameter({3}, {1.0, -2.0, 3.0});
  const auto y = sum(add(scale(x, 2.0), x));
  y.backward();
  CHECK(y.item() == 6.0);
  CHECK(x.grad() == std::vector<double>{3.0, 3.0, 3.0});
  {
    NoGradGuard guard;
    CHECK_FALSE(sum(x).requires_grad());
  }
  CHECK(sum(x).requires_grad());
}

TEST_CASE("conv forward and backward do not depend on the thread count") {
  Tensor<float> x({1, 6, 37, 41}, random_values<float>(6 * 37 * 41, 21));
  auto w = Tensor<float>::parameter({5, 6, 3, 3}, random_values<float>(5 * 6 * 9, 22));
  auto b = Tensor<float>::parameter({5}, random_values<float>(5, 23));
  const std::vector<float> gw = random_values<float>(5 * 37 * 41, 24);
  auto run = [&](int threads) {
    set_num_threads(threads);
    w.zero_grad();
    b.zero_grad();
    auto xin = Tensor<float>::parameter(x.shape(), x.values());
    const auto y = conv2d(xin, w, b, {1, 1});
    dot(y, gw).backward();
    std::vector<float> all = y.values();
    for (auto v : w.grad()) all.push_back(v);
    for (auto v : xin.grad()) all.push_back(v);
    return all;
  };
  const auto one = run(1);
  const auto four = run(4);
  set_num_threads(1);
  CHECK(one == four);
  CHECK(one == run(1));
}
