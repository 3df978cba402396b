#pragma once

#include <cstdint>
#include <string>

#include "mapfusion/ad/ops.hpp"
#include "mapfusion/ad/params.hpp"

namespace mapfusion::net {

using ad::ModelParams;
using ad::Tensor;

/// Square convolution, stride 1, size-preserving padding, with bias.
template <typename T>
struct Conv {
  Tensor<T> weight;
  Tensor<T> bias;
  int padding = 0;

  static Conv create(ModelParams<T>& params, const std::string& name, int cin, int cout, int k, std::uint64_t seed);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

template <typename T>
struct BatchNorm {
  Tensor<T> gain, offset, running_mean, running_var;

  static BatchNorm create(ModelParams<T>& params, const std::string& name, int channels);
  Tensor<T> operator()(const Tensor<T>& x, bool training) const;
};

template <typename T>
struct ConvBnRelu {
  Conv<T> conv;
  BatchNorm<T> bn;

  static ConvBnRelu create(ModelParams<T>& params, const std::string& name, int cin, int cout, int k,
                           std::uint64_t seed);
  Tensor<T> operator()(const Tensor<T>& x, bool training) const;
};

}  // namespace mapfusion::net
