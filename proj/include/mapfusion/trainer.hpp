#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapfusion/augment.hpp"
#include "mapfusion/evaluator.hpp"
#include "mapfusion/net/network.hpp"
#include "mapfusion/rng.hpp"
#include "mapfusion/sample.hpp"

namespace mapfusion {

struct TrainConfig {
  int epochs = 20;
  double max_lr = 0.001;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double lambda_seg = 1.0;
  net::FusionMode fusion = net::FusionMode::deep_concat_v2;
  bool map_seg = true;
  std::uint64_t seed = 0;
  bool augment = true;
  std::string data_dir;
  std::string out_dir;

  /// Initial heatmap logit, log(0.1 / 0.9): a prior of 0.1 keeps the first
  /// focal-loss steps from being swamped by background cells.
  double heatmap_bias = -2.1972245773362196;
  double score_threshold = 0.1;
  std::size_t max_dets = 100;
  /// 0 uses the whole split.
  int max_train_samples = 0;
  int max_val_samples = 0;
  /// Write per-epoch and best checkpoints plus the metrics log.
  bool write_outputs = true;

  void validate() const;
};

/// Unknown keys are rejected.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Variant name (baseline, mapseg, featureagg, full, featureagg_simple,
/// featureagg_v1) onto fusion mode and MapSeg flag.
void apply_variant(TrainConfig& c, const std::string& variant);

/// Rotation U[-pi/4, pi/4], independent fair flips, scale U[0.95, 1.05].
/// Identity when disabled (no draws are consumed).
AugmentParams sample_augment_params(Rng& rng, bool enabled = true);

struct EpochLog {
  int epoch = 0;
  double train_det_loss = 0.0;
  double train_seg_loss = 0.0;
  double val_mAP = 0.0;
  double val_NDS_lite = 0.0;
  double lr_last = 0.0;
};
nlohmann::json to_json(const EpochLog& e);

struct TrainResult {
  std::vector<EpochLog> log;
  MetricsReport final_val;
  int best_epoch = 0;
  double best_mAP = 0.0;
};

/// Network inputs for one sample: raw pillars and rendered raster.
struct PreparedSample {
  std::vector<double> pillars;  // 6 x H x W
  std::vector<float> raster;    // 3 x H x W
  net::DetectionTargets targets;
  std::vector<Box3D> boxes;
};
PreparedSample prepare_sample(const Sample& s, const GridConfig& grid);

/// Runs the network in eval mode (no MapSeg) and decodes detections.
template <typename T>
DetectionSet predict(const net::MapFusionNet<T>& model, const PreparedSample& p, const GridConfig& grid,
                     double score_threshold, std::size_t max_dets);

TrainResult train(const TrainConfig& cfg);

/// Loads a checkpoint (MapSeg tensors ignored) and evaluates a split.
MetricsReport evaluate_checkpoint(const std::string& data_dir, const std::string& ckpt_path, const std::string& split,
                                  double score_threshold = 0.1, std::size_t max_dets = 100);

}  // namespace mapfusion
