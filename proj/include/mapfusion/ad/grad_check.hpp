#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mapfusion/ad/tensor.hpp"

namespace mapfusion::ad {

struct GradCheckOptions {
  double eps = 1e-5;
  /// 0 checks every coordinate; otherwise at most this many per tensor,
  /// sampled uniformly.
  std::size_t max_coords_per_tensor = 0;
  /// Extra random directional-derivative probes across all tensors.
  std::size_t directions = 0;
  /// Denominator floor of the relative error.
  double floor = 1e-3;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;        // "<tensor index>[<coordinate>]" or "dir <k>"
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose step straddles a relu kink
};

/// Compares reverse-mode gradients against central finite differences.
/// `fragment` recomputes the output from the current values of `inputs`
/// (leaf tensors that require grad). The output is reduced with fixed random
/// weights so every output coordinate contributes. Relative error is
/// |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const std::function<Tensor<double>()>& fragment, std::vector<Tensor<double>> inputs,
                           const GradCheckOptions& opt = {});

}  // namespace mapfusion::ad
