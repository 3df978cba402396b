#include "mapfusion/net/network.hpp"

#include <stdexcept>

#include "mapfusion/ad/losses.hpp"
#include "mapfusion/ad/ops.hpp"
#include "mapfusion/hdmap.hpp"

namespace mapfusion::net {

std::string_view fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::baseline_no_map: return "baseline_no_map";
    case FusionMode::simple_concat: return "simple_concat";
    case FusionMode::deep_concat_v1: return "deep_concat_v1";
    case FusionMode::deep_concat_v2: return "deep_concat_v2";
  }
  return "deep_concat_v2";
}

FusionMode fusion_mode_from_name(std::string_view s) {
  for (FusionMode m : {FusionMode::baseline_no_map, FusionMode::simple_concat, FusionMode::deep_concat_v1,
                       FusionMode::deep_concat_v2})
    if (fusion_mode_name(m) == s) return m;
  throw std::invalid_argument("unknown fusion mode '" + std::string(s) + "'");
}

template <typename T>
MapFusionNet<T>::MapFusionNet(const NetConfig& cfg)
    : cfg_(cfg), lift_(PillarLift<T>::create(params_, cfg.seed)) {
  const int cv = PillarLift<T>::kOutChannels;
  if (cfg_.fusion != FusionMode::baseline_no_map) {
    int cin = kNumLayers;
    for (std::size_t i = 0; i < kMapFeatureChannels.size(); ++i) {
      map_fe_.push_back(
          ConvBnRelu<T>::create(params_, "map_fe." + std::to_string(i), cin, kMapFeatureChannels[i], 3, cfg_.seed));
      cin = kMapFeatureChannels[i];
    }
    const int cm = kMapFeatureChannels.back();
    if (cfg_.fusion == FusionMode::deep_concat_v1) agg_ = Conv<T>::create(params_, "agg.conv", cv + cm, cv, 1, cfg_.seed);
    if (cfg_.fusion == FusionMode::deep_concat_v2)
      agg_ = Conv<T>::create(params_, "agg.conv", cv + cm, cv + cm, 1, cfg_.seed);
  }
  const int fused = fused_channels();
  head_trunk_.push_back(ConvBnRelu<T>::create(params_, "head.trunk.0", fused, kHeadChannels, 3, cfg_.seed));
  head_trunk_.push_back(ConvBnRelu<T>::create(params_, "head.trunk.1", kHeadChannels, kHeadChannels, 3, cfg_.seed));
  head_heatmap_ = Conv<T>::create(params_, "head.heatmap", kHeadChannels, kNumClasses, 1, cfg_.seed);
  for (auto& b : params_.get("head.heatmap.bias").mutable_data()) b = static_cast<T>(cfg_.heatmap_bias);
  head_regression_ = Conv<T>::create(params_, "head.regression", kHeadChannels, kRegChannels, 1, cfg_.seed);
  if (cfg_.map_seg) {
    for (int i = 0; i < 3; ++i)
      seg_blocks_.push_back(ConvBnRelu<T>::create(params_, "seg.backbone." + std::to_string(i), cv, cv, 3, cfg_.seed));
    seg_blocks_.push_back(ConvBnRelu<T>::create(params_, "seg.conv", cv, cv, 3, cfg_.seed));
    seg_out_ = Conv<T>::create(params_, "seg.out", cv, kNumLayers, 1, cfg_.seed);
  }
}

template <typename T>
int MapFusionNet<T>::fused_channels() const {
  const int cv = PillarLift<T>::kOutChannels, cm = kMapFeatureChannels.back();
  switch (cfg_.fusion) {
    case FusionMode::baseline_no_map: return cv;
    case FusionMode::deep_concat_v1: return cv;
    case FusionMode::simple_concat:
    case FusionMode::deep_concat_v2: return cv + cm;
  }
  return cv;
}

template <typename T>
ad::Tensor<T> MapFusionNet<T>::map_feature_extractor(const ad::Tensor<T>& raster, bool training) const {
  if (map_fe_.empty()) throw std::logic_error("map_feature_extractor: network has no map branch");
  if (raster.rank() != 4 || raster.dim(1) != kNumLayers)
    throw ad::ShapeError("map_feature_extractor: raster must have " + std::to_string(kNumLayers) +
                         " channels, got " + ad::shape_str(raster.shape()));
  ad::Tensor<T> x = raster;
  for (const auto& b : map_fe_) x = b(x, training);
  return x;
}

template <typename T>
ad::Tensor<T> MapFusionNet<T>::feature_agg(const ad::Tensor<T>& voxel, const ad::Tensor<T>& map_feat) const {
  if (cfg_.fusion == FusionMode::baseline_no_map) throw std::logic_error("feature_agg: baseline has no fusion");
  if (voxel.rank() != 4 || map_feat.rank() != 4 || voxel.dim(2) != map_feat.dim(2) || voxel.dim(3) != map_feat.dim(3))
    throw ad::ShapeError("feature_agg: voxel " + ad::shape_str(voxel.shape()) + " and map feature " +
                         ad::shape_str(map_feat.shape()) + " are not aligned");
  ad::Tensor<T> cat = ad::concat_channels(voxel, map_feat);
  if (!agg_) return cat;
  return ad::relu((*agg_)(cat));
}

template <typename T>
ad::Tensor<T> MapFusionNet<T>::map_seg_head(const ad::Tensor<T>& voxel, bool training) const {
  if (!seg_out_) throw std::logic_error("map_seg_head: network was built without MapSeg");
  ad::Tensor<T> x = voxel;
  for (const auto& b : seg_blocks_) x = b(x, training);
  return (*seg_out_)(x);
}

template <typename T>
HeadOutputs<T> MapFusionNet<T>::detection_head(const ad::Tensor<T>& fused, bool training) const {
  ad::Tensor<T> x = fused;
  for (const auto& b : head_trunk_) x = b(x, training);
  return {head_heatmap_(x), head_regression_(x)};
}

template <typename T>
NetOutputs<T> MapFusionNet<T>::forward(const ad::Tensor<T>& raw_pillars, const ad::Tensor<T>& raster, bool training,
                                       bool with_seg) const {
  NetOutputs<T> out;
  out.voxel = pillar_lift(raw_pillars, training);
  ad::Tensor<T> fused = out.voxel;
  if (cfg_.fusion != FusionMode::baseline_no_map)
    fused = feature_agg(out.voxel, map_feature_extractor(raster, training));
  out.head = detection_head(fused, training);
  if (with_seg && seg_out_) out.seg_logits = map_seg_head(out.voxel, training);
  return out;
}

template <typename T>
ad::Tensor<T> total_loss(const HeadOutputs<T>& head, const ad::Tensor<T>& seg_logits, const DetectionTargets& targets,
                         const std::vector<float>& raster, double lambda_seg, LossBreakdown* breakdown) {
  if (lambda_seg < 0) throw std::invalid_argument("total_loss: lambda_seg must be non-negative");
  const auto& hs = head.heatmap.shape();
  const ad::Tensor<T> hm_target(hs, std::vector<T>(targets.heatmap.begin(), targets.heatmap.end()));
  const ad::Tensor<T> reg_target(head.regression.shape(),
                                 std::vector<T>(targets.regression.begin(), targets.regression.end()));
  const ad::Tensor<T> mask({hs[0], 1, hs[2], hs[3]}, std::vector<T>(targets.mask.begin(), targets.mask.end()));
  ad::Tensor<T> focal = ad::penalty_reduced_focal(head.heatmap, hm_target);
  ad::Tensor<T> l1 = ad::l1_masked(head.regression, reg_target, mask);
  ad::Tensor<T> total = ad::add(focal, l1);
  LossBreakdown b{static_cast<double>(focal.item()), static_cast<double>(l1.item()), 0.0, 0.0};
  if (seg_logits.defined()) {
    const ad::Tensor<T> seg_target(seg_logits.shape(), std::vector<T>(raster.begin(), raster.end()));
    ad::Tensor<T> seg = ad::bce_with_logits(seg_logits, seg_target);
    b.seg = seg.item();
    total = ad::add(total, ad::scale(seg, static_cast<T>(lambda_seg)));
  }
  b.total = total.item();
  if (breakdown) *breakdown = b;
  return total;
}

template <typename T>
ad::Tensor<T> to_input(const std::vector<double>& chw, int channels, const GridConfig& grid) {
  return ad::Tensor<T>({1, channels, grid.height_px, grid.width_px}, std::vector<T>(chw.begin(), chw.end()));
}

template <typename T>
ad::Tensor<T> to_input(const std::vector<float>& chw, int channels, const GridConfig& grid) {
  return ad::Tensor<T>({1, channels, grid.height_px, grid.width_px}, std::vector<T>(chw.begin(), chw.end()));
}

template class MapFusionNet<float>;
template class MapFusionNet<double>;

#define MAPFUSION_INSTANTIATE_NET(T)                                                                           \
  template ad::Tensor<T> total_loss(const HeadOutputs<T>&, const ad::Tensor<T>&, const DetectionTargets&,      \
                                    const std::vector<float>&, double, LossBreakdown*);                        \
  template ad::Tensor<T> to_input(const std::vector<double>&, int, const GridConfig&);                         \
  template ad::Tensor<T> to_input(const std::vector<float>&, int, const GridConfig&);

MAPFUSION_INSTANTIATE_NET(float)
MAPFUSION_INSTANTIATE_NET(double)

}  // namespace mapfusion::net
