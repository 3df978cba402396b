#pragma once

#include <array>
#include <optional>
#include <vector>

#include "json.hpp"
#include "mapfusion/geometry.hpp"
#include "mapfusion/net/targets.hpp"

namespace mapfusion {

using net::Detection;
using net::DetectionSet;

inline constexpr std::array<double, 4> kMatchThresholds{0.5, 1.0, 2.0, 4.0};
inline constexpr double kTpThreshold = 2.0;
/// ATE normalization in NDS-lite (metres).
inline constexpr double kAteScale = 4.0;

struct MatchResult {
  std::vector<bool> is_tp;                             // per detection, input order
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (detection, ground truth)
};

/// Greedy matching in descending score order (ties keep input order). A
/// detection takes the closest unmatched same-class ground truth whose BEV
/// center distance is < d.
MatchResult match_detections(const DetectionSet& dets, const std::vector<Box3D>& gts, double d);

/// Interpolated AP over recall [0.1, 1] with precision floor 0.1, pooled over
/// samples. nullopt when the class has no ground truth.
std::optional<double> average_precision(const std::vector<DetectionSet>& dets,
                                        const std::vector<std::vector<Box3D>>& gts, ObjectClass cls, double d);

/// AP from a score-ranked TP/FP sequence and the ground-truth count.
double ap_from_ranked(const std::vector<bool>& ranked_tp, std::size_t num_gt);

struct TpErrors {
  double ate = 0.0;  // metres
  double ase = 0.0;  // 1 - IoU of aligned boxes
  double aoe = 0.0;  // radians
};

/// 1 - IoU of two boxes translated and rotated onto each other.
double scale_error(const Box3D& a, const Box3D& b);
/// Smallest absolute yaw difference in [0, pi].
double orientation_error(const Box3D& a, const Box3D& b);

struct MetricsReport {
  std::array<std::array<std::optional<double>, kMatchThresholds.size()>, kNumClasses> ap{};
  std::array<std::optional<TpErrors>, kNumClasses> tp_errors{};  // nullopt: no TP at 2 m
  double mAP = 0.0;
  double mATE = 0.0, mASE = 0.0, mAOE = 0.0;
  double nds_lite = 0.0;
  std::array<std::size_t, kNumClasses> num_gt{};
  std::size_t num_detections = 0;
  std::size_t num_samples = 0;
};

/// mAP over defined (class, threshold) pairs. TP errors come from 2 m
/// matches, averaged per class then over classes with ground truth; a class
/// without true positives contributes the worst value (kAteScale, 1, pi).
/// NDS_lite = [5 mAP + sum(1 - min(1, e))] / 8 over ATE/4, ASE, AOE/pi.
MetricsReport compute_metrics(const std::vector<DetectionSet>& dets, const std::vector<std::vector<Box3D>>& gts);

nlohmann::json to_json(const MetricsReport& r);

}  // namespace mapfusion
