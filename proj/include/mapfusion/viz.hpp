#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mapfusion/geometry.hpp"
#include "mapfusion/net/targets.hpp"
#include "mapfusion/sample.hpp"

namespace mapfusion {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kGroundTruthColor{255, 255, 0};
inline constexpr Rgb kPredictionColor{0, 255, 255};
inline constexpr Rgb kPointColor{200, 200, 200};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}
  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);  // ignores out-of-range pixels
  void write_ppm(const std::string& path) const;
};

/// Continuous image coordinates of a metric point: x grows with metric x,
/// image y grows downward (decreasing metric y).
Vec2 bev_to_image(Vec2 p, const GridConfig& grid, int scale);
/// Pixel containing bev_to_image(p).
std::array<int, 2> bev_to_pixel(Vec2 p, const GridConfig& grid, int scale);

/// Map layers tinted, points as dots, ground truth yellow, predictions cyan.
Image render_bev(const Sample& sample, const GridConfig& grid, const net::DetectionSet* predictions, int scale = 4);

/// MapSeg probabilities (3 x H x W in [0, 1]) as an RGB panel, one layer per
/// colour channel.
Image render_seg(const std::vector<float>& probs, const GridConfig& grid, int scale = 4);

}  // namespace mapfusion
