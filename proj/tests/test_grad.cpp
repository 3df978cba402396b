#include <cmath>

#include "doctest.h"
#include "mapfusion/ad/grad_check.hpp"
#include "mapfusion/ad/losses.hpp"
#include "mapfusion/ad/ops.hpp"
#include "mapfusion/net/network.hpp"
#include "mapfusion/rng.hpp"

using namespace mapfusion;
using namespace mapfusion::ad;
using mapfusion::net::MapFusionNet;
using mapfusion::net::NetConfig;

namespace {

constexpr double kTol = 1e-4;

Tensor<double> leaf(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>::parameter(std::move(shape), std::move(v));
}

Tensor<double> constant(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return leaf(std::move(shape), seed, lo, hi).detach();
}

GridConfig small_grid(int px) {
  GridConfig g;
  g.width_px = g.height_px = px;
  g.x_range = {-px / 2.0, px / 2.0};
  g.y_range = {-px / 2.0, px / 2.0};
  return g;
}

GradCheckResult check(const std::function<Tensor<double>()>& f, std::vector<Tensor<double>> in,
                      std::size_t coords = 0, std::size_t dirs = 0, double eps = 1e-5) {
  GradCheckOptions opt;
  opt.eps = eps;
  opt.max_coords_per_tensor = coords;
  opt.directions = dirs;
  opt.seed = 99;
  auto r = grad_check(f, std::move(in), opt);
  CAPTURE(r.worst);
  CHECK(r.checked > 0);
  return r;
}

}  // namespace

TEST_CASE("a linear map is exact") {
  auto w = leaf({3, 2, 1, 1}, 1);
  auto b = leaf({3}, 2);
  auto x = leaf({1, 2, 4, 4}, 3);
  // Central differences are exact on a linear map, so a wide step only
  // reduces rounding noise.
  const auto r = check([&] { return conv2d(x, w, b); }, {w, b, x}, 0, 0, 1e-2);
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("relu away from the kink") {
  Rng rng(5);
  std::vector<double> v(40);
  for (auto& x : v) x = (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.1, 1.0);
  auto x = Tensor<double>::parameter({1, 2, 4, 5}, v);
  const auto r = check([&] { return relu(x); }, {x});
  CHECK(r.skipped == 0);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("elementwise and shape ops") {
  auto a = leaf({1, 2, 3, 3}, 11);
  auto b = leaf({1, 3, 3, 3}, 12);
  auto c = leaf({1, 2, 3, 3}, 13);
  CHECK(check([&] { return sigmoid(a); }, {a}).max_rel_error < kTol);
  CHECK(check([&] { return concat_channels(a, b); }, {a, b}).max_rel_error < kTol);
  CHECK(check([&] { return slice_channels(b, 1, 3); }, {b}).max_rel_error < kTol);
  CHECK(check([&] { return add(a, scale(c, 0.7)); }, {a, c}).max_rel_error < kTol);
  CHECK(check([&] { return sum(a); }, {a}).max_rel_error < kTol);
}

TEST_CASE("convolution, padded and strided") {
  auto x = leaf({2, 3, 6, 7}, 21);
  auto w = leaf({4, 3, 3, 3}, 22);
  auto b = leaf({4}, 23);
  CHECK(check([&] { return conv2d(x, w, b, {1, 1}); }, {x, w, b}).max_rel_error < kTol);
  CHECK(check([&] { return conv2d(x, w, Tensor<double>(), {2, 1}); }, {x, w}).max_rel_error < kTol);
  auto w5 = leaf({2, 3, 5, 5}, 24);
  auto b2 = leaf({2}, 25);
  CHECK(check([&] { return conv2d(x, w5, b2, {1, 0}); }, {x, w5, b2}).max_rel_error < kTol);
}

TEST_CASE("batch norm in both modes") {
  auto x = leaf({2, 3, 4, 4}, 31);
  auto g = leaf({3}, 32, 0.5, 1.5);
  auto o = leaf({3}, 33);
  Tensor<double> rm({3}, 0.0), rv({3}, 1.0);
  CHECK(check([&] { return batch_norm2d(x, g, o, rm, rv, true); }, {x, g, o}).max_rel_error < kTol);
  Tensor<double> rm2({3}, std::vector<double>{0.1, -0.2, 0.3}), rv2({3}, std::vector<double>{0.5, 1.5, 2.0});
  CHECK(check([&] { return batch_norm2d(x, g, o, rm2, rv2, false); }, {x, g, o}).max_rel_error < kTol);
}

TEST_CASE("losses") {
  auto logits = leaf({1, 3, 5, 5}, 41, -3, 3);
  const auto soft = constant({1, 3, 5, 5}, 42, 0.0, 1.0);
  CHECK(check([&] { return bce_with_logits(logits, soft); }, {logits}).max_rel_error < kTol);

  std::vector<double> heat(75);
  Rng rng(43);
  for (std::size_t i = 0; i < heat.size(); ++i) heat[i] = i % 11 == 0 ? 1.0 : rng.uniform(0.0, 0.95);
  const Tensor<double> ht({1, 3, 5, 5}, heat);
  CHECK(check([&] { return penalty_reduced_focal(logits, ht); }, {logits}).max_rel_error < kTol);

  auto pred = leaf({1, 2, 5, 5}, 44);
  const auto target = constant({1, 2, 5, 5}, 45, 2.0, 3.0);  // keeps |pred - target| away from 0
  std::vector<double> m(25, 0.0);
  m[3] = m[7] = m[20] = 1.0;
  const Tensor<double> mask({1, 1, 5, 5}, m);
  CHECK(check([&] { return l1_masked(pred, target, mask); }, {pred}).max_rel_error < kTol);
}

TEST_CASE("network fragments") {
  const GridConfig grid = small_grid(8);
  NetConfig cfg;
  cfg.seed = 3;
  MapFusionNet<double> net(cfg);
  auto params = net.params().trainable();

  const auto raw = constant({1, kPillarChannels, 8, 8}, 51, 0.0, 1.0);
  std::vector<double> rast(3 * 64);
  Rng rng(52);
  for (auto& v : rast) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
  const auto raster = net::to_input<double>(rast, 3, grid);

  auto pick = [&](std::string_view prefix) {
    std::vector<Tensor<double>> out;
    const auto names = net.params().trainable_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i].starts_with(prefix)) out.push_back(params[i]);
    REQUIRE_FALSE(out.empty());
    return out;
  };

  SUBCASE("pillar lift") {
    auto in = leaf({1, kPillarChannels, 8, 8}, 53);
    auto ps = pick("pillar.");
    ps.push_back(in);
    CHECK(check([&] { return net.pillar_lift(in, true); }, ps).max_rel_error < kTol);
  }
  SUBCASE("map feature extractor") {
    auto ras = Tensor<double>::parameter(raster.shape(), raster.values());
    auto ps = pick("map_fe.");
    ps.push_back(ras);
    CHECK(check([&] { return net.map_feature_extractor(ras, true); }, ps, 12, 4).max_rel_error < kTol);
  }
  SUBCASE("map segmentation") {
    auto vox = leaf({1, 32, 8, 8}, 54);
    auto ps = pick("seg.");
    ps.push_back(vox);
    std::vector<float> rf(rast.begin(), rast.end());
    const Tensor<double> tgt({1, 3, 8, 8}, rast);
    CHECK(check([&] { return bce_with_logits(net.map_seg_head(vox, true), tgt); }, ps, 12, 4).max_rel_error < kTol);
  }
}

TEST_CASE("full forward through the total loss") {
  const GridConfig grid = small_grid(16);
  for (auto fusion : {net::FusionMode::deep_concat_v2, net::FusionMode::deep_concat_v1, net::FusionMode::simple_concat,
                      net::FusionMode::baseline_no_map}) {
    CAPTURE(std::string(net::fusion_mode_name(fusion)));
    NetConfig cfg;
    cfg.fusion = fusion;
    cfg.map_seg = fusion == net::FusionMode::deep_concat_v2;
    cfg.seed = 7;
    cfg.heatmap_bias = -1.0;
    MapFusionNet<double> net(cfg);
    auto params = net.params().trainable();

    const auto raw = constant({1, kPillarChannels, 16, 16}, 61, 0.0, 1.0);
    std::vector<float> rast(3 * 256);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) {
        rast[r * 16 + c] = std::abs(r - 8) < 3;
        rast[256 + r * 16 + c] = std::abs(r - 8) == 3 || std::abs(r - 8) == 4;
        rast[512 + r * 16 + c] = r > 12 && c > 10;
      }
    const auto raster = net::to_input<double>(rast, 3, grid);
    Box3D car;
    car.cls = ObjectClass::car;
    car.x = -2.3;
    car.y = 0.4;
    car.length = 4.5;
    car.width = 1.9;
    car.height = 1.6;
    car.yaw = 0.3;
    Box3D ped;
    ped.cls = ObjectClass::pedestrian;
    ped.x = 3.6;
    ped.y = -4.2;
    ped.length = ped.width = 0.7;
    ped.height = 1.75;
    const auto targets = net::encode_targets({car, ped}, grid);

    auto f = [&] {
      const auto out = net.forward(raw, raster, true, true);
      return net::total_loss(out.head, out.seg_logits, targets, rast, 0.5);
    };
    const auto r = check(f, params, 3, 6);
    CHECK(r.max_rel_error < kTol);
  }
}
