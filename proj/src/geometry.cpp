#include "mapfusion/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mapfusion {

double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Pose2D Pose2D::inverse() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return Pose2D(-(c * x + s * y), -(-s * x + c * y), -yaw);
}

Pose2D Pose2D::compose(const Pose2D& other) const {
  Vec2 t = transform_point({other.x, other.y}, *this);
  return Pose2D(t.x, t.y, yaw + other.yaw);
}

Vec2 transform_point(Vec2 p, const Pose2D& pose) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  return {c * p.x - s * p.y + pose.x, s * p.x + c * p.y + pose.y};
}

Polygon transform_polygon(const Polygon& poly, const Pose2D& pose) {
  Polygon out;
  out.exterior.reserve(poly.exterior.size());
  for (const auto& v : poly.exterior) out.exterior.push_back(transform_point(v, pose));
  out.holes.reserve(poly.holes.size());
  for (const auto& hole : poly.holes) {
    Ring r;
    r.reserve(hole.size());
    for (const auto& v : hole) r.push_back(transform_point(v, pose));
    out.holes.push_back(std::move(r));
  }
  return out;
}

namespace {

// Crossing abscissa of edge (a, b) with the horizontal line through y.
// Only called when the edge straddles y under the half-open rule.
inline double crossing_x(const Vec2& a, const Vec2& b, double y) {
  return a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
}

inline bool straddles(const Vec2& a, const Vec2& b, double y) { return (a.y > y) != (b.y > y); }

bool ring_crossings_odd(const Vec2& p, const Ring& ring) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = ring[j];
    const Vec2& b = ring[i];
    if (straddles(a, b, p.y) && p.x < crossing_x(a, b, p.y)) inside = !inside;
  }
  return inside;
}

void collect_crossings(const Ring& ring, double y, std::vector<double>& xs) {
  const std::size_t n = ring.size();
  if (n < 3) return;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = ring[j];
    const Vec2& b = ring[i];
    if (straddles(a, b, y)) xs.push_back(crossing_x(a, b, y));
  }
}

}  // namespace

bool point_in_polygon(Vec2 p, const Polygon& poly) {
  if (poly.exterior.size() < 3) return false;
  bool inside = ring_crossings_odd(p, poly.exterior);
  for (const auto& hole : poly.holes) {
    if (hole.size() >= 3 && ring_crossings_odd(p, hole)) inside = !inside;
  }
  return inside;
}

void GridConfig::validate() const {
  if (width_px <= 0 || height_px <= 0) throw std::invalid_argument("grid: width_px and height_px must be positive");
  auto check = [](const Range& r, const char* name) {
    if (!(r.max > r.min) || !std::isfinite(r.min) || !std::isfinite(r.max))
      throw std::invalid_argument(std::string("grid: degenerate ") + name);
  };
  check(x_range, "x_range");
  check(y_range, "y_range");
  check(z_range, "z_range");
}

Vec2 GridConfig::cell_center(int row, int col) const {
  return {x_range.min + (col + 0.5) * cell_size_x(), y_range.min + (row + 0.5) * cell_size_y()};
}

std::optional<Cell> bev_cell_of(Vec2 p, const GridConfig& grid) {
  if (!(p.x >= grid.x_range.min && p.x < grid.x_range.max)) return std::nullopt;
  if (!(p.y >= grid.y_range.min && p.y < grid.y_range.max)) return std::nullopt;
  int col = static_cast<int>(std::floor((p.x - grid.x_range.min) / grid.cell_size_x()));
  int row = static_cast<int>(std::floor((p.y - grid.y_range.min) / grid.cell_size_y()));
  // Rounding can push a point just below max into the one-past-the-end cell.
  if (col >= grid.width_px || row >= grid.height_px) return std::nullopt;
  return Cell{row, col};
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

void rasterize_polygon_into(const Polygon& poly, const GridConfig& grid, BinaryMask& mask, Warnings* warnings) {
  if (poly.exterior.size() < 3) {
    if (warnings) warnings->add("rasterize_polygon: degenerate polygon with " +
                                std::to_string(poly.exterior.size()) + " vertices skipped");
    return;
  }
  std::vector<double> xs;
  for (int row = 0; row < grid.height_px; ++row) {
    const double y = grid.cell_center(row, 0).y;
    xs.clear();
    collect_crossings(poly.exterior, y, xs);
    for (const auto& hole : poly.holes) collect_crossings(hole, y, xs);
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    // A pixel center px is inside iff an odd number of crossings satisfy px < x.
    // Walking columns left to right, that count only decreases.
    std::size_t first_greater = 0;
    for (int col = 0; col < grid.width_px; ++col) {
      const double px = grid.cell_center(row, col).x;
      while (first_greater < xs.size() && !(px < xs[first_greater])) ++first_greater;
      if ((xs.size() - first_greater) % 2 == 1) mask.at(row, col) = 1;
    }
  }
}

BinaryMask rasterize_polygon(const Polygon& poly, const GridConfig& grid, Warnings* warnings) {
  BinaryMask mask(grid.height_px, grid.width_px);
  rasterize_polygon_into(poly, grid, mask, warnings);
  return mask;
}

std::string_view class_name(ObjectClass c) { return kClassNames.at(static_cast<std::size_t>(c)); }

ObjectClass class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i)
    if (kClassNames[i] == name) return static_cast<ObjectClass>(i);
  throw std::invalid_argument("unknown object class '" + std::string(name) + "'");
}

std::array<Vec2, 4> Box3D::corners() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double hl = 0.5 * length, hw = 0.5 * width;
  const std::array<Vec2, 4> local{Vec2{hl, hw}, Vec2{-hl, hw}, Vec2{-hl, -hw}, Vec2{hl, -hw}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i)
    out[i] = {x + c * local[i].x - s * local[i].y, y + s * local[i].x + c * local[i].y};
  return out;
}

bool Box3D::contains_bev(Vec2 p) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double dx = p.x - x, dy = p.y - y;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= 0.5 * length && std::abs(ly) <= 0.5 * width;
}

}  // namespace mapfusion
