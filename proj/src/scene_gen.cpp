#include "mapfusion/scene_gen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mapfusion/json_io.hpp"
#include "mapfusion/rng.hpp"

namespace mapfusion {

using nlohmann::json;
namespace fs = std::filesystem;

void SceneSpec::validate() const {
  if (n_cars < 0 || n_pedestrians < 0 || n_barriers < 0) throw std::invalid_argument("scene spec: counts must be >= 0");
  if (!(clutter_rate >= 0.0) || !(points_per_object >= 0.0) || !(ground_point_density >= 0.0))
    throw std::invalid_argument("scene spec: rates and densities must be >= 0");
  grid.validate();
}

void to_json(json& j, const SceneSpec& s) {
  j = json{{"seed", s.seed},
           {"n_cars", s.n_cars},
           {"n_pedestrians", s.n_pedestrians},
           {"n_barriers", s.n_barriers},
           {"clutter_rate", s.clutter_rate},
           {"points_per_object", s.points_per_object},
           {"ground_point_density", s.ground_point_density},
           {"grid", s.grid}};
}

void from_json(const json& j, SceneSpec& s) {
  SceneSpec d;
  s.seed = j.value("seed", d.seed);
  s.n_cars = j.value("n_cars", d.n_cars);
  s.n_pedestrians = j.value("n_pedestrians", d.n_pedestrians);
  s.n_barriers = j.value("n_barriers", d.n_barriers);
  s.clutter_rate = j.value("clutter_rate", d.clutter_rate);
  s.points_per_object = j.value("points_per_object", d.points_per_object);
  s.ground_point_density = j.value("ground_point_density", d.ground_point_density);
  s.grid = j.contains("grid") ? j["grid"].get<GridConfig>() : d.grid;
  s.validate();
}

namespace {

constexpr double kGroundZ = -1.7;
constexpr double kCurb = 0.15;
constexpr double kFar = 80.0;

struct Layout {
  Pose2D to_ego;  // road-local -> ego
  double road_width = 10.0;
  double walk_width = 3.0;
  bool has_side_road = false;
  double side_u = 0.0;
  double side_width = 8.0;
  double along = 0.0;
};

Polygon rect_local(const Layout& L, double u0, double u1, double v0, double v1) {
  Polygon p;
  p.exterior = {transform_point({u0, v0}, L.to_ego), transform_point({u1, v0}, L.to_ego),
                transform_point({u1, v1}, L.to_ego), transform_point({u0, v1}, L.to_ego)};
  return p;
}

Ring rect_ring_local(const Layout& L, double u0, double u1, double v0, double v1) {
  return rect_local(L, u0, u1, v0, v1).exterior;
}

struct ClassProfile {
  double len_lo, len_hi, wid_lo, wid_hi, h_lo, h_hi;
  double point_factor;
  double intensity_mean, intensity_std;
};

constexpr ClassProfile kCarProfile{3.9, 4.8, 1.7, 2.0, 1.4, 1.8, 1.0, 0.55, 0.12};
constexpr ClassProfile kPedProfile{0.5, 0.9, 0.5, 0.8, 1.6, 1.9, 0.35, 0.40, 0.10};
constexpr ClassProfile kBarrierProfile{1.6, 2.4, 0.3, 0.5, 0.9, 1.1, 0.4, 0.85, 0.06};

const ClassProfile& profile_for(ObjectClass c) {
  switch (c) {
    case ObjectClass::car: return kCarProfile;
    case ObjectClass::pedestrian: return kPedProfile;
    default: return kBarrierProfile;
  }
}

struct Placed {
  Vec2 c;
  double r;
};

// Kept out of line: GCC 11 at -O3 (SLP vectorizer) folds the float round
// trip away when this is inlined into brace-initialized point records.
[[gnu::noinline]] double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

class SceneBuilder {
 public:
  SceneBuilder(const SceneSpec& spec, std::uint64_t index) : spec_(spec), rng_(derive_seed(spec.seed, index)) {}

  Sample build(std::uint64_t index) {
    Sample s;
    s.sample_id = sample_id_for(index);
    build_map(s.map);
    const double lo_x = spec_.grid.x_range.min + 2.0, hi_x = spec_.grid.x_range.max - 2.0;
    const double lo_y = spec_.grid.y_range.min + 2.0, hi_y = spec_.grid.y_range.max - 2.0;
    bounds_ = {lo_x, hi_x, lo_y, hi_y};

    for (int i = 0; i < spec_.n_cars; ++i) s.boxes.push_back(place_car(s.map));
    for (int i = 0; i < spec_.n_pedestrians; ++i) s.boxes.push_back(place_pedestrian(s.map));
    for (int i = 0; i < spec_.n_barriers; ++i) s.boxes.push_back(place_barrier(s.map));

    std::vector<Box3D> clutter;
    const double whole = std::floor(spec_.clutter_rate);
    int n_clutter = static_cast<int>(whole) + (rng_.bernoulli(spec_.clutter_rate - whole) ? 1 : 0);
    for (int i = 0; i < n_clutter; ++i) {
      if (auto b = place_clutter(s.map)) clutter.push_back(*b);
    }

    std::vector<Box3D> all = s.boxes;
    all.insert(all.end(), clutter.begin(), clutter.end());
    for (const auto& b : all) emit_object_points(b, s.points);
    emit_ground_points(s.map, all, s.points);
    return s;
  }

 private:
  struct Bounds {
    double x0, x1, y0, y1;
  };

  void build_map(HdMap& map) {
    L_.road_width = rng_.uniform(8.0, 13.0);
    L_.walk_width = rng_.uniform(2.5, 4.0);
    const double phi = rng_.uniform(-std::numbers::pi, std::numbers::pi);
    const double offset = rng_.uniform(-0.3, 0.3) * L_.road_width;
    const double along = rng_.uniform(-10.0, 10.0);
    L_.along = along;
    // Local frame: u along the road, v across it. The origin sits `offset`
    // meters off the centerline so the ego is always on the road.
    const Vec2 t = transform_point({along, offset}, Pose2D(0, 0, phi));
    L_.to_ego = Pose2D(-t.x, -t.y, phi);
    const double hw = 0.5 * L_.road_width;
    const double ww = L_.walk_width;

    map.layer(LayerKind::drivable_area).push_back(rect_local(L_, -kFar, kFar, -hw, hw));
    L_.has_side_road = rng_.bernoulli(0.5);
    L_.side_u = along + rng_.uniform(-16.0, 16.0);
    L_.side_width = rng_.uniform(7.0, 10.0);
    const double s0 = L_.side_u - 0.5 * L_.side_width, s1 = L_.side_u + 0.5 * L_.side_width;
    auto& walk = map.layer(LayerKind::walkway);
    walk.push_back(rect_local(L_, -kFar, kFar, -hw - ww, -hw));
    if (L_.has_side_road) {
      map.layer(LayerKind::drivable_area).push_back(rect_local(L_, s0, s1, 0.0, kFar));
      walk.push_back(rect_local(L_, -kFar, s0, hw, hw + ww));
      walk.push_back(rect_local(L_, s1, kFar, hw, hw + ww));
      walk.push_back(rect_local(L_, s0 - ww, s0, hw + ww, kFar));
      walk.push_back(rect_local(L_, s1, s1 + ww, hw + ww, kFar));
    } else {
      walk.push_back(rect_local(L_, -kFar, kFar, hw, hw + ww));
    }

    const double len = rng_.uniform(14.0, 22.0);
    const double depth = rng_.uniform(10.0, 16.0);
    const double cu = along + rng_.uniform(-14.0, 14.0);
    Polygon lot = rect_local(L_, cu - 0.5 * len, cu + 0.5 * len, -hw - ww - depth, -hw - ww);
    if (rng_.bernoulli(0.5)) {
      const double vmid = -hw - ww - 0.5 * depth;
      lot.holes.push_back(rect_ring_local(L_, cu - len / 6.0, cu + len / 6.0, vmid - 1.0, vmid + 1.0));
    }
    map.layer(LayerKind::carpark_area).push_back(lot);
    map.layer(LayerKind::drivable_area).push_back(lot);
  }

  Vec2 to_local(Vec2 p) const { return transform_point(p, L_.to_ego.inverse()); }

  bool in_main_road(Vec2 p) const { return std::abs(to_local(p).y) <= 0.5 * L_.road_width; }

  bool free_at(Vec2 c, double r) const {
    for (const auto& p : placed_)
      if (std::hypot(p.c.x - c.x, p.c.y - c.y) < p.r + r + 0.2) return false;
    return true;
  }

  Box3D sized_box(ObjectClass cls, const ClassProfile& prof) {
    Box3D b;
    b.cls = cls;
    b.length = quantize(rng_.uniform(prof.len_lo, prof.len_hi));
    b.width = quantize(rng_.uniform(prof.wid_lo, prof.wid_hi));
    b.height = quantize(rng_.uniform(prof.h_lo, prof.h_hi));
    return b;
  }

  Vec2 random_in_bounds() { return {rng_.uniform(bounds_.x0, bounds_.x1), rng_.uniform(bounds_.y0, bounds_.y1)}; }

  double ground_z(const HdMap& map, Vec2 p) const {
    if (!map.contains(LayerKind::drivable_area, p) && map.contains(LayerKind::walkway, p)) return kGroundZ + kCurb;
    return kGroundZ;
  }

  // Rejection-samples a center satisfying `accept`; when the scene is too
  // crowded the overlap constraint is dropped so counts stay exact.
  template <typename Propose, typename Accept>
  Box3D place(Box3D b, Propose propose, Accept accept, const HdMap& map) {
    const double r = 0.5 * std::hypot(b.length, b.width);
    for (int pass = 0; pass < 2; ++pass) {
      for (int attempt = 0; attempt < 4000; ++attempt) {
        Box3D cand = b;
        propose(cand);
        if (cand.x < bounds_.x0 || cand.x > bounds_.x1 || cand.y < bounds_.y0 || cand.y > bounds_.y1) continue;
        if (!accept(cand)) continue;
        if (pass == 0 && !free_at(cand.center_bev(), r)) continue;
        cand.x = quantize(cand.x);
        cand.y = quantize(cand.y);
        cand.yaw = quantize(normalize_angle(cand.yaw));
        cand.z = quantize(ground_z(map, cand.center_bev()) + 0.5 * cand.height);
        placed_.push_back({cand.center_bev(), r});
        return cand;
      }
    }
    throw std::logic_error("scene generator: could not place object of class " + std::string(class_name(b.cls)));
  }

  Box3D place_car(const HdMap& map) {
    Box3D b = sized_box(ObjectClass::car, kCarProfile);
    const double phi = L_.to_ego.yaw;
    auto propose = [&](Box3D& c) {
      const Vec2 p = random_in_bounds();
      c.x = p.x;
      c.y = p.y;
      double heading = phi;
      if (map.contains(LayerKind::carpark_area, p) || !in_main_road(p)) heading += 0.5 * std::numbers::pi;
      if (rng_.bernoulli(0.5)) heading += std::numbers::pi;
      c.yaw = heading + rng_.normal(0.0, 0.05);
    };
    auto accept = [&](const Box3D& c) {
      if (!map.contains(LayerKind::drivable_area, c.center_bev())) return false;
      for (const auto& v : c.corners())
        if (!map.contains(LayerKind::drivable_area, v)) return false;
      return true;
    };
    return place(b, propose, accept, map);
  }

  Box3D place_pedestrian(const HdMap& map) {
    Box3D b = sized_box(ObjectClass::pedestrian, kPedProfile);
    const bool on_road = rng_.bernoulli(0.15);
    auto propose = [&](Box3D& c) {
      const Vec2 p = random_in_bounds();
      c.x = p.x;
      c.y = p.y;
      c.yaw = rng_.uniform(-std::numbers::pi, std::numbers::pi);
    };
    auto accept = [&](const Box3D& c) {
      return map.contains(on_road ? LayerKind::drivable_area : LayerKind::walkway, c.center_bev());
    };
    return place(b, propose, accept, map);
  }

  Box3D place_barrier(const HdMap& map) {
    Box3D b = sized_box(ObjectClass::barrier, kBarrierProfile);
    const double hw = 0.5 * L_.road_width;
    auto propose = [&](Box3D& c) {
      const double u = L_.along + rng_.uniform(-40.0, 40.0);
      const double side = rng_.bernoulli(0.5) ? 1.0 : -1.0;
      const double v = side * (hw - 0.5 * c.width - 0.15);
      const Vec2 p = transform_point({u, v}, L_.to_ego);
      c.x = p.x;
      c.y = p.y;
      c.yaw = L_.to_ego.yaw + rng_.normal(0.0, 0.03);
    };
    auto accept = [&](const Box3D& c) { return map.contains(LayerKind::drivable_area, c.center_bev()); };
    return place(b, propose, accept, map);
  }

  std::optional<Box3D> place_clutter(const HdMap& map) {
    const bool car_like = rng_.bernoulli(0.6);
    const ClassProfile& prof = car_like ? kCarProfile : kPedProfile;
    Box3D b = sized_box(car_like ? ObjectClass::car : ObjectClass::pedestrian, prof);
    auto propose = [&](Box3D& c) {
      const Vec2 p = random_in_bounds();
      c.x = p.x;
      c.y = p.y;
      c.yaw = rng_.uniform(-std::numbers::pi, std::numbers::pi);
    };
    auto accept = [&](const Box3D& c) {
      Box3D grown = c;
      grown.length += 1.0;
      grown.width += 1.0;
      if (map.contains_any(c.center_bev())) return false;
      for (const auto& v : grown.corners())
        if (map.contains_any(v)) return false;
      return true;
    };
    try {
      return place(b, propose, accept, map);
    } catch (const std::logic_error&) {
      return std::nullopt;  // scene has no off-map room left
    }
  }

  void emit_object_points(const Box3D& b, std::vector<LidarPoint>& out) {
    const ClassProfile& prof = profile_for(b.cls);
    const double mean = spec_.points_per_object * prof.point_factor;
    if (mean <= 0.0) return;
    const int n = std::max(3, static_cast<int>(std::lround(rng_.normal(mean, 0.2 * mean))));
    const double top = b.length * b.width;
    const double sides = 2.0 * (b.length + b.width) * b.height;
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const double bottom = b.z - 0.5 * b.height;
    for (int i = 0; i < n; ++i) {
      double lx, ly, z;
      if (rng_.uniform01() * (top + sides) < top) {
        lx = rng_.uniform(-0.5, 0.5) * b.length;
        ly = rng_.uniform(-0.5, 0.5) * b.width;
        z = bottom + b.height;
      } else {
        z = bottom + rng_.uniform(0.1, 1.0) * b.height;
        const double t = rng_.uniform01() * 2.0 * (b.length + b.width);
        if (t < b.length) {
          lx = t - 0.5 * b.length, ly = 0.5 * b.width;
        } else if (t < b.length + b.width) {
          lx = 0.5 * b.length, ly = t - b.length - 0.5 * b.width;
        } else if (t < 2.0 * b.length + b.width) {
          lx = t - b.length - b.width - 0.5 * b.length, ly = -0.5 * b.width;
        } else {
          lx = -0.5 * b.length, ly = t - 2.0 * b.length - b.width - 0.5 * b.width;
        }
      }
      lx += rng_.normal(0.0, 0.02);
      ly += rng_.normal(0.0, 0.02);
      z += rng_.normal(0.0, 0.02);
      const double x = b.x + c * lx - s * ly;
      const double y = b.y + s * lx + c * ly;
      out.push_back({quantize(x), quantize(y), quantize(z),
                     quantize(clamp01(rng_.normal(prof.intensity_mean, prof.intensity_std)))});
    }
  }

  void emit_ground_points(const HdMap& map, const std::vector<Box3D>& objects, std::vector<LidarPoint>& out) {
    const GridConfig& g = spec_.grid;
    const double area = g.x_range.extent() * g.y_range.extent();
    const auto n = static_cast<std::size_t>(std::llround(spec_.ground_point_density * area));
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 p{rng_.uniform(g.x_range.min, g.x_range.max), rng_.uniform(g.y_range.min, g.y_range.max)};
      const double u_i = rng_.uniform01();
      const double u_z = rng_.normal();
      bool occluded = false;
      for (const auto& b : objects) {
        if (b.contains_bev(p)) {
          occluded = true;
          break;
        }
      }
      if (occluded) continue;
      double z, intensity;
      if (map.contains(LayerKind::carpark_area, p)) {
        z = kGroundZ + 0.02 * u_z;
        intensity = 0.20 + 0.05 * (2.0 * u_i - 1.0) * 1.7;
      } else if (map.contains(LayerKind::drivable_area, p)) {
        z = kGroundZ + 0.02 * u_z;
        intensity = 0.10 + 0.05 * (2.0 * u_i - 1.0) * 1.7;
      } else if (map.contains(LayerKind::walkway, p)) {
        z = kGroundZ + kCurb + 0.02 * u_z;
        intensity = 0.30 + 0.07 * (2.0 * u_i - 1.0) * 1.7;
      } else {
        z = kGroundZ + 0.05 + 0.08 * u_z;
        intensity = 0.20 + 0.10 * (2.0 * u_i - 1.0) * 1.7;
      }
      out.push_back({quantize(p.x), quantize(p.y), quantize(z), quantize(clamp01(intensity))});
    }
  }

  const SceneSpec& spec_;
  Rng rng_;
  Layout L_;
  Bounds bounds_{};
  std::vector<Placed> placed_;
};

void write_binary_file(const std::string& path, const std::string& bytes) { write_text_file(path, bytes); }

}  // namespace

std::string sample_id_for(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%06llu", static_cast<unsigned long long>(index));
  return buf;
}

Sample generate_scene(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  SceneBuilder builder(spec, index);
  return builder.build(index);
}

void validate_sample(const Sample& s, const GridConfig& grid) {
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    const Box3D& b = s.boxes[i];
    const std::string where = s.sample_id + ": box " + std::to_string(i);
    if (!(b.length > 0 && b.width > 0 && b.height > 0)) throw std::invalid_argument(where + " has a non-positive size");
    if (!(b.z >= grid.z_range.min && b.z <= grid.z_range.max)) throw std::invalid_argument(where + " is outside z_range");
    if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.yaw))
      throw std::invalid_argument(where + " has a non-finite field");
  }
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const LidarPoint& p = s.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::invalid_argument(s.sample_id + ": point " + std::to_string(i) + " is not finite");
    if (!(p.intensity >= 0.0 && p.intensity <= 1.0))
      throw std::invalid_argument(s.sample_id + ": point " + std::to_string(i) + " intensity outside [0, 1]");
  }
}

std::string encode_points(const std::vector<LidarPoint>& pts) {
  static_assert(std::endian::native == std::endian::little, "points.bin writer assumes a little-endian host");
  std::string bytes(pts.size() * 16, '\0');
  char* dst = bytes.data();
  for (const auto& p : pts) {
    const float rec[4] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z),
                          static_cast<float>(p.intensity)};
    std::memcpy(dst, rec, 16);
    dst += 16;
  }
  return bytes;
}

std::vector<LidarPoint> decode_points(const std::string& bytes, const std::string& context) {
  if (bytes.size() % 16 != 0) throw std::runtime_error(context + ": size " + std::to_string(bytes.size()) + " is not a multiple of 16");
  std::vector<LidarPoint> pts(bytes.size() / 16);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    float rec[4];
    std::memcpy(rec, bytes.data() + 16 * i, 16);
    pts[i] = {rec[0], rec[1], rec[2], rec[3]};
  }
  return pts;
}

void write_sample(const Sample& s, const std::string& dataset_dir) {
  const fs::path dir = fs::path(dataset_dir) / "samples" / s.sample_id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  write_binary_file((dir / "points.bin").string(), encode_points(s.points));
  write_text_file((dir / "map.json").string(), save_map(s.map));
  write_text_file((dir / "boxes.json").string(), json(s.boxes).dump(1));
}

Sample load_sample(const std::string& dataset_dir, const std::string& sample_id) {
  const fs::path dir = fs::path(dataset_dir) / "samples" / sample_id;
  if (!fs::is_directory(dir)) throw std::runtime_error("sample '" + sample_id + "' not found under '" + dataset_dir + "'");
  Sample s;
  s.sample_id = sample_id;
  const std::string pts_path = (dir / "points.bin").string();
  s.points = decode_points(read_text_file(pts_path), pts_path);
  s.map = load_map_file((dir / "map.json").string());
  const std::string boxes_path = (dir / "boxes.json").string();
  try {
    s.boxes = json::parse(read_text_file(boxes_path)).get<std::vector<Box3D>>();
  } catch (const json::exception& e) {
    throw std::runtime_error(boxes_path + ": " + e.what());
  }
  return s;
}

DatasetIndex generate_dataset(const SceneSpec& spec, int n_train, int n_val, const std::string& out_dir) {
  spec.validate();
  if (n_train < 0 || n_val < 0) throw std::invalid_argument("generate_dataset: negative split size");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + out_dir + "': " + ec.message());
  DatasetIndex idx;
  idx.grid = spec.grid;
  idx.classes.assign(kClassNames.begin(), kClassNames.end());
  const auto total = static_cast<std::uint64_t>(n_train) + static_cast<std::uint64_t>(n_val);
  for (std::uint64_t i = 0; i < total; ++i) {
    Sample s = generate_scene(spec, i);
    write_sample(s, out_dir);
    (i < static_cast<std::uint64_t>(n_train) ? idx.train : idx.val).push_back(s.sample_id);
  }
  json doc{{"train", idx.train}, {"val", idx.val}, {"grid", idx.grid}, {"classes", idx.classes}, {"scene_spec", spec}};
  write_text_file((fs::path(out_dir) / "index.json").string(), doc.dump(1));
  return idx;
}

DatasetIndex load_index(const std::string& dataset_dir) {
  const std::string path = (fs::path(dataset_dir) / "index.json").string();
  json doc;
  try {
    doc = json::parse(read_text_file(path));
    DatasetIndex idx;
    idx.train = doc.at("train").get<std::vector<std::string>>();
    idx.val = doc.at("val").get<std::vector<std::string>>();
    idx.grid = doc.at("grid").get<GridConfig>();
    idx.classes = doc.at("classes").get<std::vector<std::string>>();
    return idx;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace mapfusion
