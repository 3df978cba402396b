#include "mapfusion/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mapfusion/ad/optim.hpp"
#include "mapfusion/hdmap.hpp"
#include "mapfusion/json_io.hpp"
#include "mapfusion/pillar.hpp"
#include "mapfusion/scene_gen.hpp"

namespace mapfusion {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (!(max_lr > 0)) throw std::invalid_argument("train config: max_lr must be > 0");
  if (weight_decay < 0) throw std::invalid_argument("train config: weight_decay must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw std::invalid_argument("train config: beta1 must be in [0, 1)");
  if (lambda_seg < 0) throw std::invalid_argument("train config: lambda_seg must be >= 0");
  if (max_train_samples < 0 || max_val_samples < 0) throw std::invalid_argument("train config: negative sample cap");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"max_lr", c.max_lr},
       {"weight_decay", c.weight_decay},
       {"beta1", c.beta1},
       {"lambda_seg", c.lambda_seg},
       {"fusion", net::fusion_mode_name(c.fusion)},
       {"map_seg", c.map_seg},
       {"seed", c.seed},
       {"augment", c.augment},
       {"data_dir", c.data_dir},
       {"out_dir", c.out_dir},
       {"heatmap_bias", c.heatmap_bias},
       {"score_threshold", c.score_threshold},
       {"max_dets", c.max_dets},
       {"max_train_samples", c.max_train_samples},
       {"max_val_samples", c.max_val_samples},
       {"write_outputs", c.write_outputs}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("train config must be an object");
  static const std::set<std::string> known{"epochs", "max_lr", "weight_decay", "beta1", "lambda_seg", "fusion",
                                           "map_seg", "seed", "augment", "data_dir", "out_dir", "heatmap_bias",
                                           "score_threshold", "max_dets", "max_train_samples", "max_val_samples",
                                           "write_outputs"};
  for (const auto& [k, _] : j.items())
    if (!known.count(k)) throw std::invalid_argument("train config: unknown key '" + k + "'");
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("epochs", c.epochs);
  get("max_lr", c.max_lr);
  get("weight_decay", c.weight_decay);
  get("beta1", c.beta1);
  get("lambda_seg", c.lambda_seg);
  if (j.contains("fusion")) c.fusion = net::fusion_mode_from_name(j.at("fusion").get<std::string>());
  get("map_seg", c.map_seg);
  get("seed", c.seed);
  get("augment", c.augment);
  get("data_dir", c.data_dir);
  get("out_dir", c.out_dir);
  get("heatmap_bias", c.heatmap_bias);
  get("score_threshold", c.score_threshold);
  get("max_dets", c.max_dets);
  get("max_train_samples", c.max_train_samples);
  get("max_val_samples", c.max_val_samples);
  get("write_outputs", c.write_outputs);
}

void apply_variant(TrainConfig& c, const std::string& variant) {
  using net::FusionMode;
  if (variant == "baseline") {
    c.fusion = FusionMode::baseline_no_map, c.map_seg = false;
  } else if (variant == "mapseg") {
    c.fusion = FusionMode::baseline_no_map, c.map_seg = true;
  } else if (variant == "featureagg") {
    c.fusion = FusionMode::deep_concat_v2, c.map_seg = false;
  } else if (variant == "featureagg_v1") {
    c.fusion = FusionMode::deep_concat_v1, c.map_seg = false;
  } else if (variant == "featureagg_simple") {
    c.fusion = FusionMode::simple_concat, c.map_seg = false;
  } else if (variant == "full") {
    c.fusion = FusionMode::deep_concat_v2, c.map_seg = true;
  } else {
    throw std::invalid_argument("unknown variant '" + variant + "'");
  }
}

AugmentParams sample_augment_params(Rng& rng, bool enabled) {
  AugmentParams a;
  if (!enabled) return a;
  a.rotation = rng.uniform(-AugmentParams::kMaxRotation, AugmentParams::kMaxRotation);
  a.flip_x = rng.bernoulli(0.5);
  a.flip_y = rng.bernoulli(0.5);
  a.scale = rng.uniform(AugmentParams::kMinScale, AugmentParams::kMaxScale);
  return a;
}

nlohmann::json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch},
          {"train_det_loss", e.train_det_loss},
          {"train_seg_loss", e.train_seg_loss},
          {"val_mAP", e.val_mAP},
          {"val_NDS_lite", e.val_NDS_lite},
          {"lr_last", e.lr_last}};
}

PreparedSample prepare_sample(const Sample& s, const GridConfig& grid) {
  PreparedSample p;
  p.pillars = pillarize(s.points, grid);
  p.raster = render_ego_raster(s.map, Pose2D{}, grid).as_floats();
  p.targets = net::encode_targets(s.boxes, grid);
  p.boxes = s.boxes;
  return p;
}

template <typename T>
DetectionSet predict(const net::MapFusionNet<T>& model, const PreparedSample& p, const GridConfig& grid,
                     double score_threshold, std::size_t max_dets) {
  ad::NoGradGuard ng;
  const auto raw = net::to_input<T>(p.pillars, kPillarChannels, grid);
  const auto raster = net::to_input<T>(p.raster, kNumLayers, grid);
  const auto out = model.forward(raw, raster, false, false);
  return net::decode_detections(out.head, grid, score_threshold, max_dets);
}

template DetectionSet predict(const net::MapFusionNet<float>&, const PreparedSample&, const GridConfig&, double,
                              std::size_t);
template DetectionSet predict(const net::MapFusionNet<double>&, const PreparedSample&, const GridConfig&, double,
                              std::size_t);

namespace {

MetricsReport evaluate(const net::MapFusionNet<float>& model, const std::vector<PreparedSample>& samples,
                       const GridConfig& grid, double thr, std::size_t max_dets) {
  std::vector<DetectionSet> dets;
  std::vector<std::vector<Box3D>> gts;
  for (const auto& p : samples) {
    dets.push_back(predict(model, p, grid, thr, max_dets));
    gts.push_back(p.boxes);
  }
  return compute_metrics(dets, gts);
}

std::vector<std::string> capped(std::vector<std::string> ids, int cap) {
  if (cap > 0 && static_cast<std::size_t>(cap) < ids.size()) ids.resize(static_cast<std::size_t>(cap));
  return ids;
}

nlohmann::json checkpoint_meta(const TrainConfig& cfg, const GridConfig& grid, int epoch, double val_map) {
  nlohmann::json g;
  to_json(g, grid);
  return {{"fusion", net::fusion_mode_name(cfg.fusion)},
          {"map_seg", cfg.map_seg},
          {"heatmap_bias", cfg.heatmap_bias},
          {"seed", cfg.seed},
          {"grid", g},
          {"epoch", epoch},
          {"val_mAP", val_map}};
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const DatasetIndex index = load_index(cfg.data_dir);
  const GridConfig grid = index.grid;
  const auto train_ids = capped(index.train, cfg.max_train_samples);
  const auto val_ids = capped(index.val, cfg.max_val_samples);
  if (train_ids.empty()) throw std::invalid_argument("train: dataset '" + cfg.data_dir + "' has no training samples");

  std::vector<Sample> train_set;
  for (const auto& id : train_ids) train_set.push_back(load_sample(cfg.data_dir, id));
  std::vector<PreparedSample> val_set;
  for (const auto& id : val_ids) val_set.push_back(prepare_sample(load_sample(cfg.data_dir, id), grid));

  net::NetConfig ncfg;
  ncfg.fusion = cfg.fusion;
  ncfg.map_seg = cfg.map_seg;
  ncfg.seed = cfg.seed;
  ncfg.heatmap_bias = cfg.heatmap_bias;
  net::MapFusionNet<float> model(ncfg);
  auto params = model.params().trainable();
  ad::OptimState<float> opt;
  opt.config.weight_decay = cfg.weight_decay;
  opt.config.beta1 = cfg.beta1;

  if (cfg.write_outputs) fs::create_directories(cfg.out_dir);
  std::ofstream log_file;
  if (cfg.write_outputs) {
    log_file.open(fs::path(cfg.out_dir) / "metrics.jsonl", std::ios::trunc);
    if (!log_file) throw std::runtime_error("train: cannot write metrics log in '" + cfg.out_dir + "'");
  }

  const std::int64_t total_steps = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(train_set.size());
  Rng aug_rng(derive_seed(cfg.seed, "augment"));
  TrainResult result;
  result.best_mAP = -1.0;
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(derive_seed(cfg.seed, "shuffle"), static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.index(i)]);

    double det_sum = 0.0, seg_sum = 0.0, lr = 0.0;
    for (std::size_t idx : order) {
      const AugmentParams a = sample_augment_params(aug_rng, cfg.augment);
      const PreparedSample p = prepare_sample(apply_augment(train_set[idx], a), grid);
      const auto raw = net::to_input<float>(p.pillars, kPillarChannels, grid);
      const auto raster = net::to_input<float>(p.raster, kNumLayers, grid);
      const auto out = model.forward(raw, raster, true, cfg.map_seg);
      net::LossBreakdown b;
      const auto loss = net::total_loss(out.head, out.seg_logits, p.targets, p.raster, cfg.lambda_seg, &b);
      if (!std::isfinite(b.total))
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) + " (focal " +
                                 std::to_string(b.focal) + ", l1 " + std::to_string(b.l1) + ", seg " +
                                 std::to_string(b.seg) + ")");
      model.params().zero_grad();
      loss.backward();
      lr = ad::one_cycle_lr(step, total_steps, cfg.max_lr);
      ad::adamw_step(params, opt, lr);
      det_sum += b.focal + b.l1;
      seg_sum += b.seg;
      ++step;
    }

    EpochLog e;
    e.epoch = epoch;
    e.train_det_loss = det_sum / train_set.size();
    e.train_seg_loss = seg_sum / train_set.size();
    e.lr_last = lr;
    MetricsReport report;
    if (!val_set.empty()) {
      report = evaluate(model, val_set, grid, cfg.score_threshold, cfg.max_dets);
      e.val_mAP = report.mAP;
      e.val_NDS_lite = report.nds_lite;
    }
    result.log.push_back(e);
    result.final_val = report;
    const bool best = e.val_mAP > result.best_mAP;
    if (best) {
      result.best_mAP = e.val_mAP;
      result.best_epoch = epoch;
    }
    if (cfg.write_outputs) {
      log_file << to_json(e).dump() << "\n" << std::flush;
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
      const auto meta = checkpoint_meta(cfg, grid, epoch, e.val_mAP);
      ad::save_checkpoint((fs::path(cfg.out_dir) / name).string(), model.params(), &opt, meta);
      if (best) ad::save_checkpoint((fs::path(cfg.out_dir) / "best.ckpt").string(), model.params(), &opt, meta);
    }
  }
  return result;
}

MetricsReport evaluate_checkpoint(const std::string& data_dir, const std::string& ckpt_path, const std::string& split,
                                  double score_threshold, std::size_t max_dets) {
  const auto meta = ad::read_checkpoint_meta(ckpt_path);
  net::NetConfig ncfg;
  try {
    ncfg.fusion = net::fusion_mode_from_name(meta.at("fusion").get<std::string>());
    ncfg.heatmap_bias = meta.value("heatmap_bias", 0.0);
  } catch (const nlohmann::json::exception& ex) {
    throw std::runtime_error("checkpoint '" + ckpt_path + "' lacks architecture metadata: " + ex.what());
  }
  ncfg.map_seg = false;  // inference never instantiates MapSeg
  net::MapFusionNet<float> model(ncfg);
  ad::load_checkpoint(ckpt_path, model.params(), nullptr, {"seg."});

  const DatasetIndex index = load_index(data_dir);
  if (meta.contains("grid")) {
    GridConfig g;
    from_json(meta.at("grid"), g);
    if (!(g == index.grid)) throw std::runtime_error("checkpoint grid does not match dataset '" + data_dir + "'");
  }
  const auto& ids = split == "train" ? index.train : split == "val" ? index.val
                                                                    : throw std::invalid_argument("unknown split '" + split + "'");
  std::vector<PreparedSample> samples;
  for (const auto& id : ids) samples.push_back(prepare_sample(load_sample(data_dir, id), index.grid));
  return evaluate(model, samples, index.grid, score_threshold, max_dets);
}

}  // namespace mapfusion
