#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapfusion/geometry.hpp"
#include "mapfusion/sample.hpp"

namespace mapfusion {

/// Parameters of the synthetic scene distribution.
struct SceneSpec {
  std::uint64_t seed = 0;
  int n_cars = 6;
  int n_pedestrians = 6;
  int n_barriers = 4;
  /// Mean number of unlabeled off-map distractors per scene.
  double clutter_rate = 5.0;
  /// Mean surface points of a car; smaller classes scale this down.
  double points_per_object = 80.0;
  /// Ground returns per square meter over the grid extent.
  double ground_point_density = 2.0;
  GridConfig grid;

  void validate() const;
};

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

/// Deterministic in (spec, index). The map always holds a road corridor with
/// walkways and one carpark; clutter is placed off every map layer and is
/// never labeled.
Sample generate_scene(const SceneSpec& spec, std::uint64_t index);

struct DatasetIndex {
  std::vector<std::string> train;
  std::vector<std::string> val;
  GridConfig grid;
  std::vector<std::string> classes;
};

std::string sample_id_for(std::uint64_t index);

/// Writes <out>/index.json and <out>/samples/<id>/{points.bin,map.json,boxes.json}.
DatasetIndex generate_dataset(const SceneSpec& spec, int n_train, int n_val, const std::string& out_dir);

DatasetIndex load_index(const std::string& dataset_dir);
Sample load_sample(const std::string& dataset_dir, const std::string& sample_id);
void write_sample(const Sample& s, const std::string& dataset_dir);

/// Little-endian float32 (x, y, z, intensity) records.
std::string encode_points(const std::vector<LidarPoint>& pts);
std::vector<LidarPoint> decode_points(const std::string& bytes, const std::string& context);

}  // namespace mapfusion
