#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mapfusion/ad/params.hpp"
#include "mapfusion/geometry.hpp"
#include "mapfusion/net/layers.hpp"
#include "mapfusion/net/targets.hpp"
#include "mapfusion/pillar.hpp"

namespace mapfusion::net {

enum class FusionMode { baseline_no_map, simple_concat, deep_concat_v1, deep_concat_v2 };

std::string_view fusion_mode_name(FusionMode m);
FusionMode fusion_mode_from_name(std::string_view s);

struct NetConfig {
  FusionMode fusion = FusionMode::deep_concat_v2;
  bool map_seg = true;
  std::uint64_t seed = 0;
  /// Initial bias of the heatmap branch.
  double heatmap_bias = 0.0;
};

inline constexpr std::array<int, 6> kMapFeatureChannels{16, 16, 32, 32, 64, 64};
inline constexpr int kHeadChannels = 64;

template <typename T>
struct NetOutputs {
  HeadOutputs<T> head;
  ad::Tensor<T> seg_logits;  // undefined unless MapSeg ran
  ad::Tensor<T> voxel;
};

/// Pillar lift, map feature extractor, FeatureAgg, MapSeg and detection
/// head. Tensors are [1, C, H, W].
template <typename T>
class MapFusionNet {
 public:
  explicit MapFusionNet(const NetConfig& cfg);
  MapFusionNet(const MapFusionNet&) = delete;
  MapFusionNet& operator=(const MapFusionNet&) = delete;

  const NetConfig& config() const { return cfg_; }
  ad::ModelParams<T>& params() { return params_; }
  const ad::ModelParams<T>& params() const { return params_; }

  ad::Tensor<T> pillar_lift(const ad::Tensor<T>& raw, bool training) const { return lift_(raw, training); }
  ad::Tensor<T> map_feature_extractor(const ad::Tensor<T>& raster, bool training) const;
  ad::Tensor<T> feature_agg(const ad::Tensor<T>& voxel, const ad::Tensor<T>& map_feat) const;
  ad::Tensor<T> map_seg_head(const ad::Tensor<T>& voxel, bool training) const;
  HeadOutputs<T> detection_head(const ad::Tensor<T>& fused, bool training) const;

  int fused_channels() const;

  /// Full forward. The raster is read only when fusion is enabled; the seg
  /// head runs when it exists and `with_seg` is set.
  NetOutputs<T> forward(const ad::Tensor<T>& raw_pillars, const ad::Tensor<T>& raster, bool training,
                        bool with_seg) const;

 private:
  NetConfig cfg_;
  ad::ModelParams<T> params_;
  PillarLift<T> lift_;
  std::vector<ConvBnRelu<T>> map_fe_;
  std::optional<Conv<T>> agg_;
  std::vector<ConvBnRelu<T>> seg_blocks_;
  std::optional<Conv<T>> seg_out_;
  std::vector<ConvBnRelu<T>> head_trunk_;
  Conv<T> head_heatmap_;
  Conv<T> head_regression_;
};

struct LossBreakdown {
  double focal = 0.0;
  double l1 = 0.0;
  double seg = 0.0;
  double total = 0.0;
};

/// focal + l1 + lambda_seg * bce(seg, raster). The seg term is added only
/// when seg_logits is defined.
template <typename T>
ad::Tensor<T> total_loss(const HeadOutputs<T>& head, const ad::Tensor<T>& seg_logits, const DetectionTargets& targets,
                         const std::vector<float>& raster, double lambda_seg, LossBreakdown* breakdown = nullptr);

/// Shapes [1, C, H, W] tensors for the network inputs.
template <typename T>
ad::Tensor<T> to_input(const std::vector<double>& chw, int channels, const GridConfig& grid);
template <typename T>
ad::Tensor<T> to_input(const std::vector<float>& chw, int channels, const GridConfig& grid);

extern template class MapFusionNet<float>;
extern template class MapFusionNet<double>;

}  // namespace mapfusion::net
