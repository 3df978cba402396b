#include "mapfusion/hdmap.hpp"

#include <fstream>
#include "json.hpp"
#include <sstream>

namespace mapfusion {

using nlohmann::json;

std::string_view layer_name(LayerKind k) { return kLayerNames.at(static_cast<std::size_t>(k)); }

bool HdMap::contains(LayerKind k, Vec2 p) const {
  for (const auto& poly : layer(k))
    if (point_in_polygon(p, poly)) return true;
  return false;
}

bool HdMap::contains_any(Vec2 p) const {
  for (int k = 0; k < kNumLayers; ++k)
    if (contains(static_cast<LayerKind>(k), p)) return true;
  return false;
}

std::vector<float> RasterStack::as_floats() const { return {channels.begin(), channels.end()}; }

RasterStack render_ego_raster(const HdMap& map, const Pose2D& ego, const GridConfig& grid, Warnings* warnings) {
  grid.validate();
  RasterStack out{grid, std::vector<std::uint8_t>(grid.cells() * kNumLayers, 0)};
  const Pose2D to_ego = ego.inverse();
  BinaryMask mask(grid.height_px, grid.width_px);
  for (int k = 0; k < kNumLayers; ++k) {
    std::fill(mask.bits.begin(), mask.bits.end(), 0);
    for (const auto& poly : map.layers[k]) rasterize_polygon_into(transform_polygon(poly, to_ego), grid, mask, warnings);
    std::copy(mask.bits.begin(), mask.bits.end(), out.channels.begin() + k * grid.cells());
  }
  return out;
}

namespace {

json ring_to_json(const Ring& ring) {
  json arr = json::array();
  for (const auto& v : ring) arr.push_back({v.x, v.y});
  return arr;
}

Ring ring_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw MapParseError(path + ": expected an array of [x, y] vertices");
  Ring ring;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string vpath = path + "[" + std::to_string(i) + "]";
    const json& v = j[i];
    if (!v.is_array() || v.size() != 2) throw MapParseError(vpath + ": expected [x, y]");
    for (int c = 0; c < 2; ++c)
      if (!v[c].is_number())
        throw MapParseError(vpath + "[" + std::to_string(c) + "]: non-numeric coordinate");
    ring.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  if (ring.size() < 3) throw MapParseError(path + ": ring has " + std::to_string(ring.size()) + " vertices, need >= 3");
  return ring;
}

}  // namespace

HdMap load_map(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MapParseError(std::string("$: malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw MapParseError("$: expected an object");
  HdMap map;
  for (int k = 0; k < kNumLayers; ++k) {
    const std::string key(kLayerNames[k]);
    if (!doc.contains(key)) throw MapParseError("$." + key + ": missing layer key");
    const json& polys = doc[key];
    if (!polys.is_array()) throw MapParseError("$." + key + ": expected a list of polygons");
    for (std::size_t i = 0; i < polys.size(); ++i) {
      const std::string ppath = "$." + key + "[" + std::to_string(i) + "]";
      const json& p = polys[i];
      if (!p.is_object() || !p.contains("exterior")) throw MapParseError(ppath + ": expected {\"exterior\", \"holes\"}");
      Polygon poly;
      poly.exterior = ring_from_json(p["exterior"], ppath + ".exterior");
      if (p.contains("holes")) {
        const json& holes = p["holes"];
        if (!holes.is_array()) throw MapParseError(ppath + ".holes: expected a list of rings");
        for (std::size_t h = 0; h < holes.size(); ++h)
          poly.holes.push_back(ring_from_json(holes[h], ppath + ".holes[" + std::to_string(h) + "]"));
      }
      map.layers[k].push_back(std::move(poly));
    }
  }
  return map;
}

std::string save_map(const HdMap& map) {
  json doc = json::object();
  for (int k = 0; k < kNumLayers; ++k) {
    json polys = json::array();
    for (const auto& poly : map.layers[k]) {
      json holes = json::array();
      for (const auto& h : poly.holes) holes.push_back(ring_to_json(h));
      polys.push_back({{"exterior", ring_to_json(poly.exterior)}, {"holes", holes}});
    }
    doc[std::string(kLayerNames[k])] = std::move(polys);
  }
  return doc.dump(1);
}

HdMap load_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open map file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return load_map(ss.str());
  } catch (const MapParseError& e) {
    throw MapParseError(path + ": " + e.what());
  }
}

void save_map_file(const HdMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write map file '" + path + "'");
  out << save_map(map);
  if (!out) throw std::runtime_error("write failed for map file '" + path + "'");
}

}  // namespace mapfusion
