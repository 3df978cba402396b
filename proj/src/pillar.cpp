#include "mapfusion/pillar.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace mapfusion {

std::vector<double> pillarize(const std::vector<LidarPoint>& points, const GridConfig& grid) {
  const std::size_t cells = grid.cells();
  std::vector<double> out(kPillarChannels * cells, 0.0);
  std::vector<std::pair<std::size_t, LidarPoint>> binned;
  binned.reserve(points.size());
  for (const auto& p : points) {
    if (!(p.z >= grid.z_range.min && p.z < grid.z_range.max)) continue;
    const auto cell = bev_cell_of({p.x, p.y}, grid);
    if (!cell) continue;
    binned.emplace_back(static_cast<std::size_t>(cell->row) * grid.width_px + cell->col, p);
  }
  // Sorting fixes the summation order within every cell.
  std::sort(binned.begin(), binned.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first, a.second.x, a.second.y, a.second.z, a.second.intensity) <
           std::tie(b.first, b.second.x, b.second.y, b.second.z, b.second.intensity);
  });
  for (std::size_t i = 0; i < binned.size();) {
    const std::size_t cell = binned[i].first;
    std::size_t j = i;
    double sz = 0.0, mz = -1e300, si = 0.0, sr = 0.0;
    for (; j < binned.size() && binned[j].first == cell; ++j) {
      const auto& p = binned[j].second;
      sz += p.z;
      mz = std::max(mz, p.z);
      si += p.intensity;
      sr += std::hypot(p.x, p.y);
    }
    const double n = static_cast<double>(j - i);
    out[0 * cells + cell] = 1.0;
    out[1 * cells + cell] = std::log1p(n);
    out[2 * cells + cell] = sz / n;
    out[3 * cells + cell] = mz;
    out[4 * cells + cell] = si / n;
    out[5 * cells + cell] = sr / n;
    i = j;
  }
  return out;
}

template <typename T>
PillarLift<T> PillarLift<T>::create(ad::ModelParams<T>& params, std::uint64_t seed) {
  return {net::ConvBnRelu<T>::create(params, "pillar.lift", kPillarChannels, kOutChannels, 1, seed)};
}

template struct PillarLift<float>;
template struct PillarLift<double>;

}  // namespace mapfusion
