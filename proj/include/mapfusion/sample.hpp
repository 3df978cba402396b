#pragma once

#include <string>
#include <vector>

#include "mapfusion/geometry.hpp"
#include "mapfusion/hdmap.hpp"

namespace mapfusion {

/// Ego-frame LiDAR return. Coordinates are stored in double but generated
/// and serialized at float32 precision.
struct LidarPoint {
  double x = 0.0, y = 0.0, z = 0.0;
  double intensity = 0.0;

  friend bool operator==(const LidarPoint&, const LidarPoint&) = default;
};

struct Sample {
  std::vector<LidarPoint> points;
  HdMap map;
  std::vector<Box3D> boxes;
  std::string sample_id;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Throws std::invalid_argument naming the first violated Sample invariant.
void validate_sample(const Sample& s, const GridConfig& grid);

}  // namespace mapfusion
