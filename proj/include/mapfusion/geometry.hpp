#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mapfusion {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Wrap an angle into (-pi, pi].
double normalize_angle(double a);

/// Planar pose. Yaw is counterclockwise about the gravity axis, kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(normalize_angle(yaw_)) {}

  Pose2D inverse() const;
  /// this ∘ other: apply `other` first, then this.
  Pose2D compose(const Pose2D& other) const;
};

/// Rotate by pose.yaw, then translate by (pose.x, pose.y).
Vec2 transform_point(Vec2 p, const Pose2D& pose);

using Ring = std::vector<Vec2>;

struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;

  friend bool operator==(const Polygon&, const Polygon&) = default;
};

Polygon transform_polygon(const Polygon& poly, const Pose2D& pose);

/// Even-odd crossing test over the exterior and every hole ring.
bool point_in_polygon(Vec2 p, const Polygon& poly);

struct Range {
  double min = 0.0;
  double max = 0.0;

  double extent() const { return max - min; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Shared BEV discretization for pillars and map rasters. Row index grows
/// with y, column index with x; both ranges are half-open [min, max).
struct GridConfig {
  int width_px = 128;
  int height_px = 128;
  Range x_range{-32.0, 32.0};
  Range y_range{-32.0, 32.0};
  Range z_range{-3.0, 3.0};

  /// Throws std::invalid_argument if the grid is unusable.
  void validate() const;

  double cell_size_x() const { return x_range.extent() / width_px; }
  double cell_size_y() const { return y_range.extent() / height_px; }
  std::size_t cells() const { return static_cast<std::size_t>(width_px) * height_px; }
  /// Metric center of pixel (row, col).
  Vec2 cell_center(int row, int col) const;

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Floor-quantize into the grid; nullopt when outside [min, max) on either axis.
std::optional<Cell> bev_cell_of(Vec2 p, const GridConfig& grid);

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t& at(int row, int col) { return bits[static_cast<std::size_t>(row) * width + col]; }
  std::size_t count() const;
};

/// Collects non-fatal diagnostics from geometry and target encoding.
struct Warnings {
  std::vector<std::string> messages;
  void add(std::string msg) { messages.push_back(std::move(msg)); }
};

/// mask(r, c) = 1 iff the metric center of pixel (r, c) is inside `poly`
/// under the even-odd rule. Polygons with fewer than 3 exterior vertices
/// produce an empty mask and a warning.
BinaryMask rasterize_polygon(const Polygon& poly, const GridConfig& grid, Warnings* warnings = nullptr);

/// OR-accumulate a polygon into an existing mask of the grid's size.
void rasterize_polygon_into(const Polygon& poly, const GridConfig& grid, BinaryMask& mask,
                            Warnings* warnings = nullptr);

enum class ObjectClass : int { car = 0, pedestrian = 1, barrier = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames{"car", "pedestrian", "barrier"};

std::string_view class_name(ObjectClass c);
/// Throws std::invalid_argument for unknown names.
ObjectClass class_from_name(std::string_view name);

struct Box3D {
  double x = 0.0, y = 0.0, z = 0.0;
  double length = 1.0, width = 1.0, height = 1.0;
  double yaw = 0.0;
  ObjectClass cls = ObjectClass::car;

  Vec2 center_bev() const { return {x, y}; }
  /// BEV footprint corners, counterclockwise starting at front-left.
  std::array<Vec2, 4> corners() const;
  bool contains_bev(Vec2 p) const;

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

}  // namespace mapfusion
