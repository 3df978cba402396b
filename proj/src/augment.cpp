#include "mapfusion/augment.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mapfusion {

bool AugmentParams::in_sampling_range() const {
  return std::abs(rotation) <= kMaxRotation && scale >= kMinScale && scale <= kMaxScale;
}

AugmentParams AugmentParams::inverse() const {
  // Forward map is R(theta) F s. Its inverse (1/s) F R(-theta) equals
  // R(-det(F) theta) F (1/s), because a single reflection reverses rotation.
  const bool single_flip = flip_x != flip_y;
  return {single_flip ? rotation : -rotation, flip_x, flip_y, 1.0 / scale};
}

Vec2 augment_point(Vec2 p, const AugmentParams& a) {
  double x = p.x * a.scale;
  double y = p.y * a.scale;
  if (a.flip_x) y = -y;
  if (a.flip_y) x = -x;
  if (a.rotation == 0.0) return {x, y};
  const double c = std::cos(a.rotation), s = std::sin(a.rotation);
  return {c * x - s * y, s * x + c * y};
}

double augment_yaw(double yaw, const AugmentParams& a) {
  if (a.flip_x) yaw = -yaw;
  if (a.flip_y) yaw = std::numbers::pi - yaw;
  return normalize_angle(yaw + a.rotation);
}

Polygon augment_polygon(const Polygon& poly, const AugmentParams& a) {
  Polygon out;
  out.exterior.reserve(poly.exterior.size());
  for (const auto& v : poly.exterior) out.exterior.push_back(augment_point(v, a));
  for (const auto& hole : poly.holes) {
    Ring r;
    r.reserve(hole.size());
    for (const auto& v : hole) r.push_back(augment_point(v, a));
    out.holes.push_back(std::move(r));
  }
  return out;
}

Box3D augment_box(const Box3D& box, const AugmentParams& a) {
  Box3D out = box;
  const Vec2 c = augment_point({box.x, box.y}, a);
  out.x = c.x;
  out.y = c.y;
  out.z = box.z * a.scale;
  out.length = box.length * a.scale;
  out.width = box.width * a.scale;
  out.height = box.height * a.scale;
  out.yaw = augment_yaw(box.yaw, a);
  return out;
}

Sample apply_augment(const Sample& sample, const AugmentParams& a) {
  if (!(a.scale > 0.0) || !std::isfinite(a.scale)) throw std::invalid_argument("apply_augment: scale must be positive");
  if (a == AugmentParams{}) return sample;
  Sample out;
  out.sample_id = sample.sample_id;
  out.points.reserve(sample.points.size());
  for (const auto& p : sample.points) {
    const Vec2 q = augment_point({p.x, p.y}, a);
    out.points.push_back({q.x, q.y, p.z * a.scale, p.intensity});
  }
  out.boxes.reserve(sample.boxes.size());
  for (const auto& b : sample.boxes) out.boxes.push_back(augment_box(b, a));
  for (int k = 0; k < kNumLayers; ++k) {
    out.map.layers[k].reserve(sample.map.layers[k].size());
    for (const auto& poly : sample.map.layers[k]) out.map.layers[k].push_back(augment_polygon(poly, a));
  }
  return out;
}

}  // namespace mapfusion
