#include "mapfusion/net/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mapfusion::net {

double gaussian_radius(const Box3D& box, const GridConfig& grid) {
  const double cell = std::min(grid.cell_size_x(), grid.cell_size_y());
  return std::max(1.0, std::min(box.length, box.width) / (2.0 * cell));
}

DetectionTargets encode_targets(const std::vector<Box3D>& boxes, const GridConfig& grid, Warnings* warnings) {
  const int H = grid.height_px, W = grid.width_px;
  const std::size_t cells = grid.cells();
  DetectionTargets t;
  t.heatmap.assign(kNumClasses * cells, 0.0f);
  t.regression.assign(kRegChannels * cells, 0.0f);
  t.mask.assign(cells, 0.0f);
  for (const auto& b : boxes) {
    const auto cell = bev_cell_of(b.center_bev(), grid);
    if (!cell) {
      ++t.skipped;
      if (warnings) warnings->add("box center (" + std::to_string(b.x) + ", " + std::to_string(b.y) + ") off the grid");
      continue;
    }
    const int r = static_cast<int>(gaussian_radius(b, grid));
    const double sigma = (2.0 * r + 1.0) / 6.0;
    float* hm = t.heatmap.data() + static_cast<std::size_t>(b.cls) * cells;
    for (int dr = -r; dr <= r; ++dr)
      for (int dc = -r; dc <= r; ++dc) {
        const int rr = cell->row + dr, cc = cell->col + dc;
        if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
        const float v = static_cast<float>(std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma)));
        float& dst = hm[static_cast<std::size_t>(rr) * W + cc];
        dst = std::max(dst, v);
      }
    const std::size_t at = static_cast<std::size_t>(cell->row) * W + cell->col;
    const Vec2 c = grid.cell_center(cell->row, cell->col);
    const double reg[kRegChannels] = {(b.x - c.x) / grid.cell_size_x(),
                                      (b.y - c.y) / grid.cell_size_y(),
                                      b.z,
                                      std::log(b.length),
                                      std::log(b.width),
                                      std::log(b.height),
                                      std::sin(b.yaw),
                                      std::cos(b.yaw)};
    for (int k = 0; k < kRegChannels; ++k) t.regression[k * cells + at] = static_cast<float>(reg[k]);
    t.mask[at] = 1.0f;
  }
  return t;
}

DetectionSet decode_detections(const std::vector<float>& heatmap_logits, const std::vector<float>& regression,
                               const GridConfig& grid, double score_threshold, std::size_t max_dets) {
  const int H = grid.height_px, W = grid.width_px;
  const std::size_t cells = grid.cells();
  if (heatmap_logits.size() != kNumClasses * cells || regression.size() != kRegChannels * cells)
    throw std::invalid_argument("decode_detections: head outputs do not match the grid");
  std::vector<double> prob(heatmap_logits.size());
  for (std::size_t i = 0; i < prob.size(); ++i) prob[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(heatmap_logits[i])));

  DetectionSet out;
  for (int k = 0; k < kNumClasses; ++k) {
    const double* p = prob.data() + static_cast<std::size_t>(k) * cells;
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        const double v = p[static_cast<std::size_t>(r) * W + c];
        if (!(v > score_threshold)) continue;
        bool peak = true;
        for (int dr = -1; dr <= 1 && peak; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if ((dr == 0 && dc == 0) || rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
            if (p[static_cast<std::size_t>(rr) * W + cc] > v) {
              peak = false;
              break;
            }
          }
        if (!peak) continue;
        const std::size_t at = static_cast<std::size_t>(r) * W + c;
        auto reg = [&](int ch) { return static_cast<double>(regression[ch * cells + at]); };
        const Vec2 center = grid.cell_center(r, c);
        Detection d;
        d.score = v;
        d.box.cls = static_cast<ObjectClass>(k);
        d.box.x = center.x + reg(0) * grid.cell_size_x();
        d.box.y = center.y + reg(1) * grid.cell_size_y();
        d.box.z = reg(2);
        d.box.length = std::exp(std::clamp(reg(3), -6.0, 6.0));
        d.box.width = std::exp(std::clamp(reg(4), -6.0, 6.0));
        d.box.height = std::exp(std::clamp(reg(5), -6.0, 6.0));
        d.box.yaw = std::atan2(reg(6), reg(7));
        out.push_back(d);
      }
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (out.size() > max_dets) out.resize(max_dets);
  return out;
}

}  // namespace mapfusion::net
