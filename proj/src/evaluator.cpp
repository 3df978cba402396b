#include "mapfusion/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace mapfusion {

namespace {

std::vector<std::size_t> score_order(const DetectionSet& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

double bev_distance(const Box3D& a, const Box3D& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

MatchResult match_detections(const DetectionSet& dets, const std::vector<Box3D>& gts, double d) {
  if (!(d > 0)) throw std::invalid_argument("match_detections: threshold must be positive");
  MatchResult res;
  res.is_tp.assign(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t i : score_order(dets)) {
    std::size_t best = gts.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].cls != dets[i].box.cls) continue;
      const double dist = bev_distance(dets[i].box, gts[g]);
      if (dist < d && dist < best_d) {
        best_d = dist;
        best = g;
      }
    }
    if (best < gts.size()) {
      taken[best] = true;
      res.is_tp[i] = true;
      res.pairs.emplace_back(i, best);
    }
  }
  return res;
}

double ap_from_ranked(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  if (num_gt == 0) throw std::invalid_argument("ap_from_ranked: no ground truth");
  constexpr double min_recall = 0.1, min_precision = 0.1;
  std::vector<double> recall, precision;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked_tp.size(); ++k) {
    tp += ranked_tp[k];
    recall.push_back(static_cast<double>(tp) / num_gt);
    precision.push_back(static_cast<double>(tp) / (k + 1));
  }
  // Precision envelope: best precision at any recall >= r.
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double acc = 0.0;
  int n = 0;
  for (int i = static_cast<int>(std::lround(100 * min_recall)); i <= 100; ++i, ++n) {
    const double r = i / 100.0;
    // First operating point reaching recall r (with a small tolerance for rounding).
    auto it = std::lower_bound(recall.begin(), recall.end(), r - 1e-12);
    const double p = it == recall.end() ? 0.0 : precision[static_cast<std::size_t>(it - recall.begin())];
    acc += std::max(0.0, p - min_precision);
  }
  return acc / n / (1.0 - min_precision);
}

std::optional<double> average_precision(const std::vector<DetectionSet>& dets,
                                        const std::vector<std::vector<Box3D>>& gts, ObjectClass cls, double d) {
  if (dets.size() != gts.size()) throw std::invalid_argument("average_precision: sample count mismatch");
  std::size_t num_gt = 0;
  struct Ranked {
    double score;
    bool tp;
  };
  std::vector<Ranked> ranked;
  for (std::size_t s = 0; s < dets.size(); ++s) {
    DetectionSet cd;
    std::vector<Box3D> cg;
    for (const auto& x : dets[s])
      if (x.box.cls == cls) cd.push_back(x);
    for (const auto& g : gts[s])
      if (g.cls == cls) cg.push_back(g);
    num_gt += cg.size();
    const auto m = match_detections(cd, cg, d);
    for (std::size_t i : score_order(cd)) ranked.push_back({cd[i].score, m.is_tp[i]});
  }
  if (num_gt == 0) return std::nullopt;
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  std::vector<bool> seq;
  for (const auto& r : ranked) seq.push_back(r.tp);
  return ap_from_ranked(seq, num_gt);
}

double scale_error(const Box3D& a, const Box3D& b) {
  const double inter = std::min(a.length, b.length) * std::min(a.width, b.width) * std::min(a.height, b.height);
  const double uni = a.length * a.width * a.height + b.length * b.width * b.height - inter;
  return 1.0 - inter / uni;
}

double orientation_error(const Box3D& a, const Box3D& b) { return std::abs(normalize_angle(a.yaw - b.yaw)); }

MetricsReport compute_metrics(const std::vector<DetectionSet>& dets, const std::vector<std::vector<Box3D>>& gts) {
  if (dets.size() != gts.size()) throw std::invalid_argument("compute_metrics: sample count mismatch");
  MetricsReport r;
  r.num_samples = dets.size();
  for (const auto& d : dets) r.num_detections += d.size();
  for (const auto& g : gts)
    for (const auto& b : g) ++r.num_gt[static_cast<std::size_t>(b.cls)];

  double ap_sum = 0.0;
  int ap_n = 0;
  for (int c = 0; c < kNumClasses; ++c)
    for (std::size_t t = 0; t < kMatchThresholds.size(); ++t) {
      r.ap[c][t] = average_precision(dets, gts, static_cast<ObjectClass>(c), kMatchThresholds[t]);
      if (r.ap[c][t]) {
        ap_sum += *r.ap[c][t];
        ++ap_n;
      }
    }
  r.mAP = ap_n ? ap_sum / ap_n : 0.0;

  double ate = 0.0, ase = 0.0, aoe = 0.0;
  int classes = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (r.num_gt[c] == 0) continue;
    ++classes;
    TpErrors sum;
    std::size_t n = 0;
    for (std::size_t s = 0; s < dets.size(); ++s) {
      DetectionSet cd;
      std::vector<Box3D> cg;
      for (const auto& x : dets[s])
        if (static_cast<int>(x.box.cls) == c) cd.push_back(x);
      for (const auto& g : gts[s])
        if (static_cast<int>(g.cls) == c) cg.push_back(g);
      for (auto [i, g] : match_detections(cd, cg, kTpThreshold).pairs) {
        sum.ate += bev_distance(cd[i].box, cg[g]);
        sum.ase += scale_error(cd[i].box, cg[g]);
        sum.aoe += orientation_error(cd[i].box, cg[g]);
        ++n;
      }
    }
    if (n) {
      r.tp_errors[c] = TpErrors{sum.ate / n, sum.ase / n, sum.aoe / n};
      ate += sum.ate / n;
      ase += sum.ase / n;
      aoe += sum.aoe / n;
    } else {
      ate += kAteScale;
      ase += 1.0;
      aoe += std::numbers::pi;
    }
  }
  if (classes) {
    r.mATE = ate / classes;
    r.mASE = ase / classes;
    r.mAOE = aoe / classes;
  } else {
    r.mATE = kAteScale;
    r.mASE = 1.0;
    r.mAOE = std::numbers::pi;
  }
  const double errs = (1.0 - std::min(1.0, r.mATE / kAteScale)) + (1.0 - std::min(1.0, r.mASE)) +
                      (1.0 - std::min(1.0, r.mAOE / std::numbers::pi));
  r.nds_lite = (5.0 * r.mAP + errs) / 8.0;
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json ap = nlohmann::json::object();
  nlohmann::json tp = nlohmann::json::object();
  nlohmann::json gt = nlohmann::json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const std::string name(kClassNames[c]);
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t t = 0; t < kMatchThresholds.size(); ++t) {
      char key[16];
      std::snprintf(key, sizeof key, "%.1f", kMatchThresholds[t]);
      per[key] = r.ap[c][t] ? nlohmann::json(*r.ap[c][t]) : nlohmann::json(nullptr);
    }
    ap[name] = per;
    tp[name] = r.tp_errors[c] ? nlohmann::json{{"ATE", r.tp_errors[c]->ate},
                                               {"ASE", r.tp_errors[c]->ase},
                                               {"AOE", r.tp_errors[c]->aoe}}
                              : nlohmann::json(nullptr);
    gt[name] = r.num_gt[c];
  }
  return {{"mAP", r.mAP},
          {"mATE", r.mATE},
          {"mASE", r.mASE},
          {"mAOE", r.mAOE},
          {"NDS_lite", r.nds_lite},
          {"AP", ap},
          {"tp_errors", tp},
          {"num_gt", gt},
          {"num_detections", r.num_detections},
          {"num_samples", r.num_samples}};
}

}  // namespace mapfusion
