#pragma once

#include "mapfusion/geometry.hpp"
#include "mapfusion/sample.hpp"

namespace mapfusion {

/// Global augmentation, applied in the fixed order scale -> flip -> rotate.
/// flip_x mirrors across the x axis (y -> -y); flip_y mirrors across the
/// y axis (x -> -x).
struct AugmentParams {
  double rotation = 0.0;
  bool flip_x = false;
  bool flip_y = false;
  double scale = 1.0;

  static constexpr double kMaxRotation = 0.7853981633974483;  // pi / 4
  static constexpr double kMinScale = 0.95;
  static constexpr double kMaxScale = 1.05;

  /// True when the parameters lie in the sampling ranges.
  bool in_sampling_range() const;
  /// Parameters that undo this transform. The inverse scale can fall just
  /// outside the sampling range; apply_augment accepts any positive scale.
  AugmentParams inverse() const;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

Vec2 augment_point(Vec2 p, const AugmentParams& a);
double augment_yaw(double yaw, const AugmentParams& a);
Polygon augment_polygon(const Polygon& poly, const AugmentParams& a);
Box3D augment_box(const Box3D& box, const AugmentParams& a);

/// Apply one transform to every point, box, and map polygon of the sample.
/// Heights (point z, box z and box height) are scaled with the same factor.
Sample apply_augment(const Sample& sample, const AugmentParams& a);

}  // namespace mapfusion
