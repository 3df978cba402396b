#include "mapfusion/net/layers.hpp"

namespace mapfusion::net {

using ad::ParamKind;

template <typename T>
Conv<T> Conv<T>::create(ModelParams<T>& params, const std::string& name, int cin, int cout, int k,
                        std::uint64_t seed) {
  const std::int64_t fan_in = static_cast<std::int64_t>(cin) * k * k;
  const auto w = ad::kaiming_uniform(fan_in * cout, fan_in, seed, name + ".weight");
  Conv c;
  c.weight = params.add(name + ".weight", ParamKind::weight, {cout, cin, k, k}, std::vector<T>(w.begin(), w.end()));
  c.bias = params.add(name + ".bias", ParamKind::bias, {cout}, std::vector<T>(cout, T(0)));
  c.padding = k / 2;
  return c;
}

template <typename T>
Tensor<T> Conv<T>::operator()(const Tensor<T>& x) const {
  return ad::conv2d(x, weight, bias, {1, padding});
}

template <typename T>
BatchNorm<T> BatchNorm<T>::create(ModelParams<T>& params, const std::string& name, int channels) {
  BatchNorm b;
  b.gain = params.add(name + ".gain", ParamKind::gain, {channels}, std::vector<T>(channels, T(1)));
  b.offset = params.add(name + ".offset", ParamKind::offset, {channels}, std::vector<T>(channels, T(0)));
  b.running_mean = params.add(name + ".running_mean", ParamKind::running_mean, {channels}, std::vector<T>(channels, T(0)));
  b.running_var = params.add(name + ".running_var", ParamKind::running_var, {channels}, std::vector<T>(channels, T(1)));
  return b;
}

template <typename T>
Tensor<T> BatchNorm<T>::operator()(const Tensor<T>& x, bool training) const {
  // The buffers are handles; copies alias the model storage.
  Tensor<T> rm = running_mean, rv = running_var;
  return ad::batch_norm2d(x, gain, offset, rm, rv, training);
}

template <typename T>
ConvBnRelu<T> ConvBnRelu<T>::create(ModelParams<T>& params, const std::string& name, int cin, int cout, int k,
                                    std::uint64_t seed) {
  return {Conv<T>::create(params, name + ".conv", cin, cout, k, seed), BatchNorm<T>::create(params, name + ".bn", cout)};
}

template <typename T>
Tensor<T> ConvBnRelu<T>::operator()(const Tensor<T>& x, bool training) const {
  return ad::relu(bn(conv(x), training));
}

template struct Conv<float>;
template struct Conv<double>;
template struct BatchNorm<float>;
template struct BatchNorm<double>;
template struct ConvBnRelu<float>;
template struct ConvBnRelu<double>;

}  // namespace mapfusion::net
