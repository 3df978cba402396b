#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mapfusion/geometry.hpp"

namespace mapfusion {

/// Semantic map layers in raster channel order.
enum class LayerKind : int { drivable_area = 0, walkway = 1, carpark_area = 2 };

inline constexpr int kNumLayers = 3;
inline constexpr std::array<std::string_view, kNumLayers> kLayerNames{"drivable_area", "walkway", "carpark_area"};

std::string_view layer_name(LayerKind k);

struct HdMap {
  std::array<std::vector<Polygon>, kNumLayers> layers;

  std::vector<Polygon>& layer(LayerKind k) { return layers[static_cast<std::size_t>(k)]; }
  const std::vector<Polygon>& layer(LayerKind k) const { return layers[static_cast<std::size_t>(k)]; }
  bool contains(LayerKind k, Vec2 p) const;
  bool contains_any(Vec2 p) const;

  friend bool operator==(const HdMap&, const HdMap&) = default;
};

/// Three binary channels (kNumLayers x H x W, row-major).
struct RasterStack {
  GridConfig grid;
  std::vector<std::uint8_t> channels;

  std::uint8_t at(int channel, int row, int col) const {
    return channels[(static_cast<std::size_t>(channel) * grid.height_px + row) * grid.width_px + col];
  }
  std::vector<float> as_floats() const;
};

/// Transform every polygon into the ego frame (inverse of `ego`) and
/// rasterize each layer into its channel. Polygons within a layer union.
RasterStack render_ego_raster(const HdMap& map, const Pose2D& ego, const GridConfig& grid,
                              Warnings* warnings = nullptr);

class MapParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse a map document; errors name the offending JSON path.
HdMap load_map(std::string_view text);
std::string save_map(const HdMap& map);

HdMap load_map_file(const std::string& path);
void save_map_file(const HdMap& map, const std::string& path);

}  // namespace mapfusion
