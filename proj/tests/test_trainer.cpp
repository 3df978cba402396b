#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mapfusion/ad/optim.hpp"
#include "mapfusion/hdmap.hpp"
#include "mapfusion/scene_gen.hpp"
#include "mapfusion/trainer.hpp"

using namespace mapfusion;
namespace fs = std::filesystem;

namespace {

SceneSpec small_spec() {
  SceneSpec s;
  s.seed = 5;
  s.grid.width_px = s.grid.height_px = 32;
  s.grid.x_range = s.grid.y_range = {-16.0, 16.0};
  s.n_cars = 2;
  s.n_pedestrians = 2;
  s.n_barriers = 1;
  s.clutter_rate = 1.0;
  return s;
}

// One small dataset shared by every case in this file.
const std::string& dataset() {
  static const std::string dir = [] {
    const fs::path p = fs::temp_directory_path() / "mapfusion_trainer_data";
    fs::remove_all(p);
    generate_dataset(small_spec(), 4, 2, p.string());
    return p.string();
  }();
  return dir;
}

TrainConfig small_config(const std::string& out) {
  TrainConfig c;
  c.data_dir = dataset();
  c.out_dir = out;
  c.epochs = 1;
  c.max_lr = 3e-3;
  c.heatmap_bias = -2.19;
  c.max_train_samples = 2;
  return c;
}

std::string fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mapfusion_trainer_" + name);
  fs::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("augmentation sampling statistics") {
  Rng rng(1);
  const int n = 100000;
  int fx = 0, fy = 0;
  double rot_sum = 0, scale_sum = 0;
  for (int i = 0; i < n; ++i) {
    const auto a = sample_augment_params(rng);
    REQUIRE(a.in_sampling_range());
    fx += a.flip_x;
    fy += a.flip_y;
    rot_sum += a.rotation;
    scale_sum += a.scale;
  }
  CHECK(fx > 0.47 * n);
  CHECK(fx < 0.53 * n);
  CHECK(fy > 0.47 * n);
  CHECK(fy < 0.53 * n);
  CHECK(std::abs(rot_sum / n) < 0.01);
  CHECK(std::abs(scale_sum / n - 1.0) < 0.001);

  Rng a(2), b(2);
  CHECK(sample_augment_params(a, false) == AugmentParams{});
  CHECK(a.next() == b.next());  // disabled sampling consumes nothing
}

TEST_CASE("augmented samples keep raster and labels aligned") {
  SceneSpec spec;
  const GridConfig g = spec.grid;
  Rng rng(4);
  int cars = 0, on_road = 0;
  for (std::uint64_t i = 0; i < 12; ++i) {
    const Sample s = generate_scene(spec, i);
    const Sample aug = apply_augment(s, sample_augment_params(rng));
    const auto p = prepare_sample(aug, g);
    CHECK(p.raster == render_ego_raster(aug.map, Pose2D{}, g).as_floats());
    for (const auto& b : aug.boxes) {
      if (b.cls != ObjectClass::car) continue;
      const auto cell = bev_cell_of(b.center_bev(), g);
      if (!cell) continue;
      ++cars;
      on_road += p.raster[static_cast<std::size_t>(cell->row) * g.width_px + cell->col] == 1.0f;
    }
  }
  CHECK(cars > 30);
  CHECK(on_road >= cars * 95 / 100);
}

TEST_CASE("config json") {
  TrainConfig c;
  c.epochs = 3;
  c.fusion = net::FusionMode::simple_concat;
  nlohmann::json j = c;
  const TrainConfig back = j.get<TrainConfig>();
  CHECK(back.epochs == 3);
  CHECK(back.fusion == net::FusionMode::simple_concat);
  j["learning_rate"] = 0.1;
  CHECK_THROWS_WITH(j.get<TrainConfig>(), doctest::Contains("learning_rate"));
  TrainConfig bad;
  bad.max_lr = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("variants") {
  TrainConfig c;
  apply_variant(c, "baseline");
  CHECK(c.fusion == net::FusionMode::baseline_no_map);
  CHECK_FALSE(c.map_seg);
  apply_variant(c, "mapseg");
  CHECK(c.fusion == net::FusionMode::baseline_no_map);
  CHECK(c.map_seg);
  apply_variant(c, "featureagg");
  CHECK(c.fusion == net::FusionMode::deep_concat_v2);
  CHECK_FALSE(c.map_seg);
  apply_variant(c, "full");
  CHECK(c.fusion == net::FusionMode::deep_concat_v2);
  CHECK(c.map_seg);
  CHECK_THROWS(apply_variant(c, "everything"));
}

TEST_CASE("one epoch smoke run writes its outputs") {
  const auto out = fresh_dir("smoke");
  const auto cfg = small_config(out);
  const auto r = train(cfg);
  REQUIRE(r.log.size() == 1);
  CHECK(std::isfinite(r.log[0].train_det_loss));
  CHECK(r.log[0].train_seg_loss > 0);
  CHECK(fs::exists(fs::path(out) / "epoch_001.ckpt"));
  CHECK(fs::exists(fs::path(out) / "best.ckpt") == (r.log[0].val_mAP > 0));
  std::ifstream log(fs::path(out) / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("val_mAP"));
    ++lines;
  }
  CHECK(lines == 1);

  const auto meta = ad::read_checkpoint_meta((fs::path(out) / "epoch_001.ckpt").string());
  CHECK(meta["fusion"] == "deep_concat_v2");
  CHECK(meta["epoch"] == 1);
  const auto rep = evaluate_checkpoint(dataset(), (fs::path(out) / "epoch_001.ckpt").string(), "val");
  CHECK(rep.mAP == doctest::Approx(r.final_val.mAP).epsilon(1e-12));
  CHECK(rep.nds_lite == doctest::Approx(r.final_val.nds_lite).epsilon(1e-12));
  CHECK_THROWS(evaluate_checkpoint(dataset(), (fs::path(out) / "epoch_001.ckpt").string(), "test"));
  fs::remove_all(out);
}

TEST_CASE("training is deterministic") {
  auto cfg = small_config("");
  cfg.write_outputs = false;
  cfg.epochs = 2;
  const auto a = train(cfg);
  const auto b = train(cfg);
  REQUIRE(a.log.size() == 2);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].train_det_loss == b.log[i].train_det_loss);
    CHECK(a.log[i].train_seg_loss == b.log[i].train_seg_loss);
    CHECK(a.log[i].val_mAP == b.log[i].val_mAP);
  }
}

TEST_CASE("training lowers the detection loss") {
  auto cfg = small_config("");
  cfg.write_outputs = false;
  cfg.epochs = 8;
  cfg.max_train_samples = 4;
  cfg.augment = false;
  const auto r = train(cfg);
  CHECK(r.log.back().train_det_loss < 0.7 * r.log.front().train_det_loss);
  CHECK(r.log.back().train_seg_loss < r.log.front().train_seg_loss);
}
