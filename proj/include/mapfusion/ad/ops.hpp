#pragma once

#include <vector>

#include "mapfusion/ad/tensor.hpp"

namespace mapfusion::ad {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
};

/// Cross-correlation of x [N, Cin, H, W] with kernel [Cout, Cin, k, k] plus
/// bias [Cout] (bias may be undefined). Output [N, Cout, H', W'].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, Conv2dOptions opt = {});

/// Per-channel normalization over N, H, W. In training mode the batch
/// statistics are used and the running buffers are updated in place with
/// `momentum` (unbiased variance); in eval mode the running buffers are used.
template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& offset, Tensor<T>& running_mean,
                       Tensor<T>& running_var, bool training, double momentum = 0.1, double eps = 1e-5);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// While alive, every relu evaluated on this thread appends its activity
/// mask. Used by the gradient checker to spot finite-difference steps that
/// cross a kink.
class ReluMaskRecorder {
 public:
  ReluMaskRecorder();
  ~ReluMaskRecorder();
  ReluMaskRecorder(const ReluMaskRecorder&) = delete;
  ReluMaskRecorder& operator=(const ReluMaskRecorder&) = delete;
  const std::vector<std::vector<std::uint8_t>>& masks() const { return masks_; }

 private:
  std::vector<std::vector<std::uint8_t>> masks_;
  ReluMaskRecorder* previous_;
};
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Stack [N, C1, H, W] and [N, C2, H, W] into [N, C1 + C2, H, W].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
/// Channels [begin, end) of an [N, C, H, W] tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin, std::int64_t end);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> sum(const Tensor<T>& a);
/// sum_i a_i * weights_i with constant weights.
template <typename T>
Tensor<T> dot(const Tensor<T>& a, const std::vector<T>& weights);

}  // namespace mapfusion::ad
