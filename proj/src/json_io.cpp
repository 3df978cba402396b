#include "mapfusion/json_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mapfusion {

using nlohmann::json;

void to_json(json& j, const Range& r) { j = json::array({r.min, r.max}); }

void from_json(const json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("range: expected [min, max]");
  r.min = j[0].get<double>();
  r.max = j[1].get<double>();
}

void to_json(json& j, const GridConfig& g) {
  j = json{{"width_px", g.width_px}, {"height_px", g.height_px}, {"x_range", g.x_range},
           {"y_range", g.y_range},   {"z_range", g.z_range}};
}

void from_json(const json& j, GridConfig& g) {
  g.width_px = j.at("width_px").get<int>();
  g.height_px = j.at("height_px").get<int>();
  g.x_range = j.at("x_range").get<Range>();
  g.y_range = j.at("y_range").get<Range>();
  g.z_range = j.at("z_range").get<Range>();
  g.validate();
}

void to_json(json& j, const Box3D& b) {
  j = json{{"class", std::string(class_name(b.cls))},
           {"x", b.x}, {"y", b.y}, {"z", b.z}, {"l", b.length}, {"w", b.width}, {"h", b.height}, {"yaw", b.yaw}};
}

void from_json(const json& j, Box3D& b) {
  b.cls = class_from_name(j.at("class").get<std::string>());
  b.x = j.at("x").get<double>();
  b.y = j.at("y").get<double>();
  b.z = j.at("z").get<double>();
  b.length = j.at("l").get<double>();
  b.width = j.at("w").get<double>();
  b.height = j.at("h").get<double>();
  b.yaw = j.at("yaw").get<double>();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot finalize '" + path + "': " + ec.message());
}

}  // namespace mapfusion
