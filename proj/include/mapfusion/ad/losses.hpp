#pragma once

#include "mapfusion/ad/tensor.hpp"

namespace mapfusion::ad {

/// Mean binary cross-entropy on logits. Targets must lie in [0, 1].
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets);

/// Center-heatmap focal loss (alpha 2, beta 4) on logits, normalized by the
/// number of cells whose target is exactly 1 (at least 1).
template <typename T>
Tensor<T> penalty_reduced_focal(const Tensor<T>& logits, const Tensor<T>& targets);

/// Mean absolute error over mask-positive cells. pred/target are
/// [N, C, H, W]; mask holds N*H*W weights broadcast over channels.
/// Returns 0 for an all-zero mask.
template <typename T>
Tensor<T> l1_masked(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& mask);

}  // namespace mapfusion::ad
