#pragma once

#include <vector>

#include "mapfusion/ad/tensor.hpp"
#include "mapfusion/geometry.hpp"

namespace mapfusion::net {

/// Regression channels: dx, dy (sub-cell offset in cell units), z,
/// log l, log w, log h, sin yaw, cos yaw.
inline constexpr int kRegChannels = 8;

template <typename T>
struct HeadOutputs {
  ad::Tensor<T> heatmap;     // [1, K, H, W] logits
  ad::Tensor<T> regression;  // [1, 8, H, W]
};

struct DetectionTargets {
  std::vector<float> heatmap;     // K x H x W in [0, 1]
  std::vector<float> regression;  // 8 x H x W, valid where mask is 1
  std::vector<float> mask;        // H x W
  int skipped = 0;                // boxes whose center is off the grid
};

/// Gaussian radius in cells for a box footprint.
double gaussian_radius(const Box3D& box, const GridConfig& grid);

DetectionTargets encode_targets(const std::vector<Box3D>& boxes, const GridConfig& grid, Warnings* warnings = nullptr);

struct Detection {
  Box3D box;
  double score = 0.0;
};
using DetectionSet = std::vector<Detection>;

/// Sigmoid the heatmap logits, keep cells that are >= every in-grid 3x3
/// neighbour of the same class and above the threshold, and decode boxes.
/// Sorted by descending score (stable over class, row, col scan order).
DetectionSet decode_detections(const std::vector<float>& heatmap_logits, const std::vector<float>& regression,
                               const GridConfig& grid, double score_threshold, std::size_t max_dets);

template <typename T>
DetectionSet decode_detections(const HeadOutputs<T>& head, const GridConfig& grid, double score_threshold,
                               std::size_t max_dets) {
  return decode_detections(std::vector<float>(head.heatmap.values().begin(), head.heatmap.values().end()),
                           std::vector<float>(head.regression.values().begin(), head.regression.values().end()),
                           grid, score_threshold, max_dets);
}

}  // namespace mapfusion::net
