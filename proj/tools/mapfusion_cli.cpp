// Command-line front end: gen-data, render-map, train, eval, ablate, viz.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mapfusion/ablation.hpp"
#include "mapfusion/ad/optim.hpp"
#include "mapfusion/hdmap.hpp"
#include "mapfusion/json_io.hpp"
#include "mapfusion/parallel.hpp"
#include "mapfusion/scene_gen.hpp"
#include "mapfusion/trainer.hpp"
#include "mapfusion/viz.hpp"

namespace fs = std::filesystem;
using namespace mapfusion;

namespace {

// Removes the registered paths unless disarmed, so failed commands leave no
// partial output behind.
class OutputGuard {
 public:
  void add(const std::string& p) { paths_.push_back(p); }
  void disarm() { paths_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove_all(p, ec);
  }

 private:
  std::vector<std::string> paths_;
};

TrainConfig load_train_config(const std::string& path) {
  TrainConfig c;
  if (!path.empty()) from_json(nlohmann::json::parse(read_text_file(path)), c);
  return c;
}

GridConfig parse_grid_file(const std::string& path) {
  GridConfig g;
  if (!path.empty()) from_json(nlohmann::json::parse(read_text_file(path)), g);
  g.validate();
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MapFusion: HD-map fused BEV LiDAR detection"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker cap (default: MAPFUSION_THREADS or 1)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::uint64_t gen_seed = 0;
  int n_train = 512, n_val = 128;
  std::string gen_out, gen_spec;
  gen->add_option("--seed", gen_seed, "Dataset seed");
  gen->add_option("--train", n_train, "Training scenes")->check(CLI::NonNegativeNumber);
  gen->add_option("--val", n_val, "Validation scenes")->check(CLI::NonNegativeNumber);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--spec", gen_spec, "SceneSpec JSON file");

  // render-map
  auto* rmap = app.add_subcommand("render-map", "Rasterize a map file around an ego pose");
  std::string rm_map, rm_out, rm_grid;
  double ego_x = 0, ego_y = 0, ego_yaw = 0;
  int rm_scale = 4;
  rmap->add_option("--map", rm_map, "Map JSON file")->required();
  rmap->add_option("--out", rm_out, "Output image (.ppm)")->required();
  rmap->add_option("--grid", rm_grid, "GridConfig JSON file");
  rmap->add_option("--ego-x", ego_x);
  rmap->add_option("--ego-y", ego_y);
  rmap->add_option("--ego-yaw", ego_yaw);
  rmap->add_option("--scale", rm_scale)->check(CLI::PositiveNumber);

  // train
  auto* tr = app.add_subcommand("train", "Train one variant");
  std::string tr_data, tr_config, tr_variant = "full", tr_out;
  std::uint64_t tr_seed = 0;
  int tr_epochs = 0;
  double tr_lr = 0;
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--config", tr_config, "TrainConfig JSON file");
  tr->add_option("--variant", tr_variant, "baseline | mapseg | featureagg | full")
      ->check(CLI::IsMember({"baseline", "mapseg", "featureagg", "full"}));
  tr->add_option("--out", tr_out, "Output directory")->required();
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "Training seed");
  tr->add_option("--epochs", tr_epochs, "Override epochs")->check(CLI::PositiveNumber);
  tr->add_option("--max-lr", tr_lr, "Override max learning rate")->check(CLI::PositiveNumber);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_data, ev_ckpt, ev_out, ev_split = "val";
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--out", ev_out, "Metrics report JSON")->required();
  ev->add_option("--split", ev_split)->check(CLI::IsMember({"train", "val"}));

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train and compare ablation variants");
  std::string ab_data, ab_config, ab_out;
  int ab_seeds = 3;
  std::uint64_t ab_seed = 0;
  std::vector<std::string> ab_variants = ablation_variants();
  int ab_epochs = 0;
  ab->add_option("--data", ab_data, "Dataset directory")->required();
  ab->add_option("--config", ab_config, "Base TrainConfig JSON file");
  ab->add_option("--out", ab_out, "Output directory")->required();
  ab->add_option("--seeds", ab_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  ab->add_option("--seed", ab_seed, "First seed");
  ab->add_option("--variants", ab_variants, "Variants to run")->check(CLI::IsMember(ablation_variants()));
  ab->add_option("--epochs", ab_epochs, "Override epochs")->check(CLI::PositiveNumber);

  // viz
  auto* vz = app.add_subcommand("viz", "Render a BEV image of one sample");
  std::string vz_data, vz_sample, vz_ckpt, vz_out;
  int vz_scale = 4;
  double vz_thr = 0.3;
  vz->add_option("--data", vz_data, "Dataset directory")->required();
  vz->add_option("--sample", vz_sample, "Sample id")->required();
  vz->add_option("--ckpt", vz_ckpt, "Checkpoint for predictions and the MapSeg panel");
  vz->add_option("--out", vz_out, "Output image (.ppm)")->required();
  vz->add_option("--scale", vz_scale)->check(CLI::PositiveNumber);
  vz->add_option("--score-threshold", vz_thr);

  CLI11_PARSE(app, argc, argv);
  set_num_threads(resolve_thread_count(threads));

  OutputGuard guard;
  try {
    if (*gen) {
      SceneSpec spec;
      if (!gen_spec.empty()) spec = nlohmann::json::parse(read_text_file(gen_spec)).get<SceneSpec>();
      spec.seed = gen_seed;
      if (!fs::exists(gen_out)) guard.add(gen_out);
      const auto idx = generate_dataset(spec, n_train, n_val, gen_out);
      guard.disarm();
      std::printf("wrote %zu train and %zu val samples to %s\n", idx.train.size(), idx.val.size(), gen_out.c_str());
    } else if (*rmap) {
      guard.add(rm_out);
      const GridConfig grid = parse_grid_file(rm_grid);
      Warnings w;
      const RasterStack r = render_ego_raster(load_map_file(rm_map), Pose2D(ego_x, ego_y, ego_yaw), grid, &w);
      render_seg(r.as_floats(), grid, rm_scale).write_ppm(rm_out);
      for (const auto& m : w.messages) std::fprintf(stderr, "warning: %s\n", m.c_str());
      guard.disarm();
    } else if (*tr) {
      TrainConfig c = load_train_config(tr_config);
      apply_variant(c, tr_variant);
      c.data_dir = tr_data;
      c.out_dir = tr_out;
      if (*tr_seed_opt) c.seed = tr_seed;
      if (tr_epochs > 0) c.epochs = tr_epochs;
      if (tr_lr > 0) c.max_lr = tr_lr;
      if (!fs::exists(tr_out)) guard.add(tr_out);
      const TrainResult r = train(c);
      guard.disarm();
      for (const auto& e : r.log) std::printf("%s\n", to_json(e).dump().c_str());
      std::printf("best epoch %d, val mAP %.4f\n", r.best_epoch, r.best_mAP);
    } else if (*ev) {
      guard.add(ev_out);
      const MetricsReport rep = evaluate_checkpoint(ev_data, ev_ckpt, ev_split);
      write_text_file(ev_out, to_json(rep).dump(2));
      guard.disarm();
      std::printf("mAP %.4f NDS_lite %.4f\n", rep.mAP, rep.nds_lite);
    } else if (*ab) {
      AblationConfig cfg;
      cfg.base = load_train_config(ab_config);
      cfg.base.data_dir = ab_data;
      cfg.base.out_dir = ab_out;
      if (ab_epochs > 0) cfg.base.epochs = ab_epochs;
      cfg.seeds.clear();
      for (int i = 0; i < ab_seeds; ++i) cfg.seeds.push_back(ab_seed + static_cast<std::uint64_t>(i));
      cfg.variants = ab_variants;
      if (!fs::exists(ab_out)) guard.add(ab_out);
      const AblationTable t = run_ablation(cfg, [](const std::string& m) { std::printf("%s\n", m.c_str()); });
      fs::create_directories(ab_out);
      write_text_file((fs::path(ab_out) / "ablation.json").string(), t.to_json().dump(2));
      write_text_file((fs::path(ab_out) / "ablation.md").string(), t.to_markdown());
      guard.disarm();
      std::printf("%s", t.to_markdown().c_str());
    } else if (*vz) {
      const DatasetIndex idx = load_index(vz_data);
      const Sample s = load_sample(vz_data, vz_sample);
      guard.add(vz_out);
      if (vz_ckpt.empty()) {
        render_bev(s, idx.grid, nullptr, vz_scale).write_ppm(vz_out);
      } else {
        const auto meta = ad::read_checkpoint_meta(vz_ckpt);
        net::NetConfig ncfg;
        ncfg.fusion = net::fusion_mode_from_name(meta.at("fusion").get<std::string>());
        ncfg.map_seg = meta.at("map_seg").get<bool>();
        net::MapFusionNet<float> model(ncfg);
        ad::load_checkpoint(vz_ckpt, model.params());
        const PreparedSample p = prepare_sample(s, idx.grid);
        const auto dets = predict(model, p, idx.grid, vz_thr, 100);
        render_bev(s, idx.grid, &dets, vz_scale).write_ppm(vz_out);
        if (ncfg.map_seg) {
          ad::NoGradGuard ng;
          const auto raw = net::to_input<float>(p.pillars, kPillarChannels, idx.grid);
          const auto seg = ad::sigmoid(model.map_seg_head(model.pillar_lift(raw, false), false));
          fs::path seg_path(vz_out);
          seg_path.replace_filename(seg_path.stem().string() + "_mapseg" + seg_path.extension().string());
          guard.add(seg_path.string());
          render_seg(std::vector<float>(seg.values().begin(), seg.values().end()), idx.grid, vz_scale)
              .write_ppm(seg_path.string());
          std::printf("wrote %s\n", seg_path.string().c_str());
        } else {
          std::fprintf(stderr, "note: checkpoint has no MapSeg head; skipping the MapSeg panel\n");
        }
      }
      guard.disarm();
      std::printf("wrote %s\n", vz_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
