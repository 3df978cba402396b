#pragma once

#include "json.hpp"
#include "mapfusion/geometry.hpp"

namespace mapfusion {

void to_json(nlohmann::json& j, const Range& r);
void from_json(const nlohmann::json& j, Range& r);
void to_json(nlohmann::json& j, const GridConfig& g);
void from_json(const nlohmann::json& j, GridConfig& g);
/// {class, x, y, z, l, w, h, yaw}
void to_json(nlohmann::json& j, const Box3D& b);
void from_json(const nlohmann::json& j, Box3D& b);

std::string read_text_file(const std::string& path);
/// Writes via a temporary sibling and renames, so readers never see a partial file.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mapfusion
