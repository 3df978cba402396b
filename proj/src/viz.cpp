#include "mapfusion/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "mapfusion/hdmap.hpp"

namespace mapfusion {

Rgb Image::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  rgb[i] = c[0], rgb[i + 1] = c[1], rgb[i + 2] = c[2];
}

void Image::write_ppm(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write image '" + path + "'");
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw std::runtime_error("failed writing image '" + path + "'");
}

Vec2 bev_to_image(Vec2 p, const GridConfig& grid, int scale) {
  return {(p.x - grid.x_range.min) / grid.cell_size_x() * scale, (grid.y_range.max - p.y) / grid.cell_size_y() * scale};
}

std::array<int, 2> bev_to_pixel(Vec2 p, const GridConfig& grid, int scale) {
  const Vec2 q = bev_to_image(p, grid, scale);
  return {static_cast<int>(std::floor(q.x)), static_cast<int>(std::floor(q.y))};
}

namespace {

void draw_line(Image& img, std::array<int, 2> a, std::array<int, 2> b, Rgb c) {
  int x0 = a[0], y0 = a[1];
  const int x1 = b[0], y1 = b[1];
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    img.set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) err += dy, x0 += sx;
    if (e2 <= dx) err += dx, y0 += sy;
  }
}

void draw_box(Image& img, const Box3D& box, const GridConfig& grid, int scale, Rgb c) {
  const auto corners = box.corners();
  for (std::size_t i = 0; i < 4; ++i)
    draw_line(img, bev_to_pixel(corners[i], grid, scale), bev_to_pixel(corners[(i + 1) % 4], grid, scale), c);
}

}  // namespace

Image render_bev(const Sample& sample, const GridConfig& grid, const net::DetectionSet* predictions, int scale) {
  if (scale < 1) throw std::invalid_argument("render_bev: scale must be >= 1");
  const int W = grid.width_px, H = grid.height_px;
  Image img(W * scale, H * scale);
  const RasterStack raster = render_ego_raster(sample.map, Pose2D{}, grid);
  static constexpr std::array<Rgb, kNumLayers> tint{Rgb{55, 55, 75}, Rgb{40, 85, 45}, Rgb{95, 70, 35}};
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      Rgb col{0, 0, 0};
      // Later layers draw over earlier ones: carpark over walkway over road.
      for (int k = 0; k < kNumLayers; ++k)
        if (raster.at(k, r, c)) col = tint[k];
      // Raster row r grows with y; image rows grow downward.
      const int y0 = (H - 1 - r) * scale, x0 = c * scale;
      for (int dy = 0; dy < scale; ++dy)
        for (int dx = 0; dx < scale; ++dx) img.set(x0 + dx, y0 + dy, col);
    }
  for (const auto& p : sample.points) {
    const auto px = bev_to_pixel({p.x, p.y}, grid, scale);
    img.set(px[0], px[1], kPointColor);
  }
  for (const auto& b : sample.boxes) draw_box(img, b, grid, scale, kGroundTruthColor);
  if (predictions)
    for (const auto& d : *predictions) draw_box(img, d.box, grid, scale, kPredictionColor);
  return img;
}

Image render_seg(const std::vector<float>& probs, const GridConfig& grid, int scale) {
  const int W = grid.width_px, H = grid.height_px;
  if (probs.size() != static_cast<std::size_t>(kNumLayers) * W * H)
    throw std::invalid_argument("render_seg: expected 3 x H x W probabilities");
  Image img(W * scale, H * scale);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      Rgb col;
      for (int k = 0; k < kNumLayers; ++k) {
        const double v = std::clamp(static_cast<double>(probs[(static_cast<std::size_t>(k) * H + r) * W + c]), 0.0, 1.0);
        col[k] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
      const int y0 = (H - 1 - r) * scale, x0 = c * scale;
      for (int dy = 0; dy < scale; ++dy)
        for (int dx = 0; dx < scale; ++dx) img.set(x0 + dx, y0 + dy, col);
    }
  return img;
}

}  // namespace mapfusion
