#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mapfusion/geometry.hpp"
#include "mapfusion/rng.hpp"

namespace mapfusion::testing {

// PNPOLY-style crossing count, written independently of the library.
inline bool pnpoly(const Ring& ring, double x, double y) {
  bool c = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const double xi = ring[i].x, yi = ring[i].y, xj = ring[j].x, yj = ring[j].y;
    if (((yi > y) != (yj > y)) && (x < (xj - xi) * (y - yi) / (yj - yi) + xi)) c = !c;
  }
  return c;
}

inline bool inside_oracle(const Polygon& p, double x, double y) {
  bool in = pnpoly(p.exterior, x, y);
  for (const auto& h : p.holes) in ^= pnpoly(h, x, y);
  return in;
}

// Convex polygon: sorted random angles on a jittered circle.
inline Ring random_convex_ring(Rng& rng, Vec2 center, double radius, int n) {
  std::vector<double> ang(static_cast<std::size_t>(n));
  for (auto& a : ang) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::sort(ang.begin(), ang.end());
  Ring r;
  for (double a : ang) r.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  return r;
}

inline Polygon random_polygon(Rng& rng, bool with_hole) {
  const Vec2 c{rng.uniform(-30, 30), rng.uniform(-30, 30)};
  const double r = rng.uniform(3, 25);
  Polygon p;
  p.exterior = random_convex_ring(rng, c, r, 3 + static_cast<int>(rng.index(8)));
  if (with_hole) p.holes.push_back(random_convex_ring(rng, c, r * 0.3, 3 + static_cast<int>(rng.index(4))));
  return p;
}

inline bool near_boundary(const Polygon& p, Vec2 q, double tol) {
  auto ring_near = [&](const Ring& r) {
    for (std::size_t i = 0, j = r.size() - 1; i < r.size(); j = i++) {
      const Vec2 a = r[j], b = r[i];
      const double dx = b.x - a.x, dy = b.y - a.y;
      const double t = std::clamp(((q.x - a.x) * dx + (q.y - a.y) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
      if (std::hypot(a.x + t * dx - q.x, a.y + t * dy - q.y) < tol) return true;
    }
    return false;
  };
  if (ring_near(p.exterior)) return true;
  for (const auto& h : p.holes)
    if (ring_near(h)) return true;
  return false;
}

}  // namespace mapfusion::testing
