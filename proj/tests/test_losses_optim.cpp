#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mapfusion/ad/losses.hpp"
#include "mapfusion/ad/ops.hpp"
#include "mapfusion/ad/optim.hpp"
#include "mapfusion/rng.hpp"

using namespace mapfusion;
using namespace mapfusion::ad;
namespace fs = std::filesystem;

namespace {

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("bce with logits") {
  Tensor<double> zeros({2, 3}, 0.0);
  Tensor<double> half({2, 3}, 0.5);
  CHECK(bce_with_logits(zeros, half).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_with_logits(zeros, Tensor<double>({2, 3}, 1.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor<double> big({2}, std::vector<double>{40.0, -40.0});
  CHECK(bce_with_logits(big, Tensor<double>({2}, std::vector<double>{1.0, 0.0})).item() < 1e-8);
  CHECK(std::isfinite(bce_with_logits(Tensor<double>({1}, std::vector<double>{900.0}), Tensor<double>({1}, 0.0)).item()));

  Rng rng(4);
  std::vector<double> x(50), y(50);
  double ref = 0;
  for (int i = 0; i < 50; ++i) {
    x[i] = rng.uniform(-5, 5);
    y[i] = rng.uniform01();
    const double p = sigmoid_d(x[i]);
    ref += -(y[i] * std::log(p) + (1 - y[i]) * std::log(1 - p));
  }
  CHECK(bce_with_logits(Tensor<double>({50}, x), Tensor<double>({50}, y)).item() == doctest::Approx(ref / 50).epsilon(1e-9));
  CHECK_THROWS(bce_with_logits(zeros, Tensor<double>({2, 3}, 1.5)));
  CHECK_THROWS_AS(bce_with_logits(zeros, Tensor<double>({3, 2}, 0.0)), ShapeError);
}

TEST_CASE("focal loss") {
  // Perfect prediction: +inf-like logit at the peak, -inf-like elsewhere.
  std::vector<double> t{0.0, 0.3, 1.0, 0.3, 0.0, 1.0};
  std::vector<double> logits{-30, -30, 30, -30, -30, 30};
  CHECK(penalty_reduced_focal(Tensor<double>({1, 1, 2, 3}, logits), Tensor<double>({1, 1, 2, 3}, t)).item() < 1e-6);

  Rng rng(8);
  std::vector<double> x(64), y(64);
  double ref = 0;
  int npos = 0;
  for (int i = 0; i < 64; ++i) {
    x[i] = rng.uniform(-4, 4);
    y[i] = i % 9 == 0 ? 1.0 : rng.uniform(0, 0.9);
    const double p = sigmoid_d(x[i]);
    if (y[i] == 1.0) {
      ++npos;
      ref += -std::pow(1 - p, 2) * std::log(p);
    } else {
      ref += -std::pow(1 - y[i], 4) * p * p * std::log(1 - p);
    }
  }
  CHECK(penalty_reduced_focal(Tensor<double>({1, 1, 8, 8}, x), Tensor<double>({1, 1, 8, 8}, y)).item() ==
        doctest::Approx(ref / npos).epsilon(1e-9));

  // Without positives the normalizer floors at one.
  std::vector<double> y0(64, 0.2);
  double ref0 = 0;
  for (int i = 0; i < 64; ++i) {
    const double p = sigmoid_d(x[i]);
    ref0 += -std::pow(0.8, 4) * p * p * std::log(1 - p);
  }
  CHECK(penalty_reduced_focal(Tensor<double>({1, 1, 8, 8}, x), Tensor<double>({1, 1, 8, 8}, y0)).item() ==
        doctest::Approx(ref0).epsilon(1e-9));
}

TEST_CASE("masked l1") {
  Tensor<double> p({1, 2, 2, 2}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  Tensor<double> t({1, 2, 2, 2}, 0.0);
  CHECK(l1_masked(p, t, Tensor<double>({1, 1, 2, 2}, 0.0)).item() == 0.0);
  Tensor<double> m({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 1});
  CHECK(l1_masked(p, t, m).item() == doctest::Approx((1 + 4 + 5 + 8) / 4.0));
}

TEST_CASE("adamw with zero gradient and no decay keeps parameters") {
  auto w = Tensor<double>::parameter({3}, {1.0, -2.0, 0.5});
  OptimState<double> st;
  st.config.weight_decay = 0.0;
  std::vector<Tensor<double>> ps{w};
  for (int i = 0; i < 5; ++i) adamw_step(ps, st, 0.1);
  CHECK(w.values() == std::vector<double>{1.0, -2.0, 0.5});
  CHECK(st.step == 5);
}

TEST_CASE("adamw first step moves by lr against the gradient sign") {
  auto w = Tensor<double>::parameter({2}, {0.0, 0.0});
  OptimState<double> st;
  st.config.weight_decay = 0.0;
  w.mutable_grad()[0] = 3.0;
  w.mutable_grad()[1] = -0.01;
  std::vector<Tensor<double>> ps{w};
  adamw_step(ps, st, 0.1);
  CHECK(w.data()[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(w.data()[1] == doctest::Approx(0.1).epsilon(1e-5));
}

TEST_CASE("adamw decoupled decay shrinks by 1 - lr * wd") {
  auto w = Tensor<double>::parameter({2}, {2.0, -4.0});
  OptimState<double> st;
  st.config.weight_decay = 0.5;
  std::vector<Tensor<double>> ps{w};
  adamw_step(ps, st, 0.1);
  CHECK(w.data()[0] == doctest::Approx(2.0 * 0.95).epsilon(1e-12));
  CHECK(w.data()[1] == doctest::Approx(-4.0 * 0.95).epsilon(1e-12));
}

TEST_CASE("adamw decreases a quadratic") {
  auto w = Tensor<double>::parameter({4}, {1.0, -2.0, 3.0, 0.5});
  OptimState<double> st;
  std::vector<Tensor<double>> ps{w};
  auto loss = [&] {
    const auto sq = dot(w, std::vector<double>(w.values()));
    return sq;
  };
  const double first = loss().item();
  for (int i = 0; i < 10; ++i) {
    w.zero_grad();
    auto l = loss();
    l.backward();
    adamw_step(ps, st, 0.05);
  }
  CHECK(loss().item() < first);
}

TEST_CASE("one cycle schedule") {
  const double mx = 2e-3;
  const std::int64_t total = 1000;
  CHECK(one_cycle_lr(0, total, mx) == doctest::Approx(mx / 10).epsilon(1e-12));
  CHECK(one_cycle_lr(400, total, mx) == mx);
  CHECK(one_cycle_lr(total, total, mx) <= mx / 100);
  CHECK(one_cycle_lr(total, total, mx) == doctest::Approx(mx / 1000).epsilon(1e-9));
  for (std::int64_t s = 1; s <= 400; ++s) CHECK(one_cycle_lr(s, total, mx) > one_cycle_lr(s - 1, total, mx));
  for (std::int64_t s = 401; s <= total; ++s) CHECK(one_cycle_lr(s, total, mx) < one_cycle_lr(s - 1, total, mx));
  for (std::int64_t s = 0; s <= total; ++s) CHECK(one_cycle_lr(s, total, mx) <= mx);
  CHECK_THROWS(one_cycle_lr(0, 0, mx));
}

namespace {

ModelParams<float> small_model(float base) {
  ModelParams<float> p;
  p.add("a.conv.weight", ParamKind::weight, {2, 1, 3, 3}, std::vector<float>(18, base));
  p.add("a.conv.bias", ParamKind::bias, {2}, {base, -base});
  p.add("a.bn.running_var", ParamKind::running_var, {2}, {1.5f, 2.5f});
  return p;
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  const fs::path dir = fs::temp_directory_path() / "mapfusion_ckpt_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string path = (dir / "a.ckpt").string();

  auto src = small_model(0.25f);
  src.get("a.conv.weight").mutable_data()[4] = -7.125f;
  OptimState<float> st;
  st.step = 17;
  st.config.weight_decay = 0.02;
  st.m = {std::vector<float>(18, 0.5f), {1.0f, 2.0f}};
  st.v = {std::vector<float>(18, 0.25f), {3.0f, 4.0f}};
  save_checkpoint(path, src, &st, {{"epoch", 3}});

  auto dst = small_model(0.0f);
  OptimState<float> st2;
  const auto meta = load_checkpoint(path, dst, &st2);
  CHECK(meta["epoch"] == 3);
  CHECK(read_checkpoint_meta(path)["epoch"] == 3);
  for (std::size_t i = 0; i < src.entries().size(); ++i)
    CHECK(src.entries()[i].tensor.values() == dst.entries()[i].tensor.values());
  CHECK(st2.step == 17);
  CHECK(st2.config.weight_decay == doctest::Approx(0.02));
  CHECK(st2.m == st.m);
  CHECK(st2.v == st.v);

  SUBCASE("corrupted magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XX", 2);
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path, dst), doctest::Contains("magic"), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    fs::resize_file(path, fs::file_size(path) - 8);
    CHECK_THROWS(load_checkpoint(path, dst));
  }
  SUBCASE("name and shape mismatches are listed") {
    ModelParams<float> other;
    other.add("a.conv.weight", ParamKind::weight, {2, 1, 1, 1}, std::vector<float>(2, 0.0f));
    other.add("b.conv.bias", ParamKind::bias, {2}, {0.0f, 0.0f});
    try {
      load_checkpoint(path, other);
      FAIL("expected a mismatch error");
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      CHECK(msg.find("b.conv.bias") != std::string::npos);
      CHECK(msg.find("a.conv.bias") != std::string::npos);
      CHECK(msg.find("a.conv.weight") != std::string::npos);
    }
  }
  SUBCASE("ignored prefixes") {
    ModelParams<float> sub;
    sub.add("a.conv.bias", ParamKind::bias, {2}, {0.0f, 0.0f});
    sub.add("seg.out.conv.bias", ParamKind::bias, {3}, {0.0f, 0.0f, 0.0f});
    CHECK_NOTHROW(load_checkpoint(path, sub, nullptr, {"a.conv.weight", "a.bn.", "seg."}));
    CHECK(sub.get("a.conv.bias").values() == std::vector<float>{0.25f, -0.25f});
  }
  fs::remove_all(dir);
}
