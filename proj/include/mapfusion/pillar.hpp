#pragma once

#include <vector>

#include "mapfusion/geometry.hpp"
#include "mapfusion/net/layers.hpp"
#include "mapfusion/sample.hpp"

namespace mapfusion {

inline constexpr int kPillarChannels = 6;

/// Per-cell statistics, 6 x H x W row-major:
/// occupancy, log(1 + count), mean z, max z, mean intensity, mean radial
/// distance. Points outside the grid (x, y, or z) are ignored. The result
/// does not depend on point order.
std::vector<double> pillarize(const std::vector<LidarPoint>& points, const GridConfig& grid);

/// 6 -> 32 learned per-cell embedding: 1x1 conv, batchnorm, relu.
template <typename T>
struct PillarLift {
  static constexpr int kOutChannels = 32;
  net::ConvBnRelu<T> block;

  static PillarLift create(ad::ModelParams<T>& params, std::uint64_t seed);
  ad::Tensor<T> operator()(const ad::Tensor<T>& raw, bool training) const { return block(raw, training); }
};

}  // namespace mapfusion
