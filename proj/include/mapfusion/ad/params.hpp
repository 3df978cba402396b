#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mapfusion/ad/tensor.hpp"

namespace mapfusion::ad {

enum class ParamKind { weight, bias, gain, offset, running_mean, running_var };

std::string_view kind_name(ParamKind k);
ParamKind kind_from_name(std::string_view s);
inline bool is_buffer(ParamKind k) { return k == ParamKind::running_mean || k == ParamKind::running_var; }

template <typename T>
struct ParamEntry {
  std::string name;
  ParamKind kind;
  Tensor<T> tensor;  // aliases the model's storage
};

/// Ordered, uniquely named parameters and batch-norm buffers.
template <typename T>
class ModelParams {
 public:
  /// Registers a tensor; trainable kinds get requires_grad. Duplicate names throw.
  Tensor<T> add(const std::string& name, ParamKind kind, Shape shape, std::vector<T> values);

  bool contains(std::string_view name) const;
  Tensor<T> get(std::string_view name) const;
  const std::vector<ParamEntry<T>>& entries() const { return entries_; }

  /// Trainable tensors in registration order.
  std::vector<Tensor<T>> trainable() const;
  std::vector<std::string> trainable_names() const;
  std::int64_t trainable_count() const;
  void zero_grad();

 private:
  std::vector<ParamEntry<T>> entries_;
};

/// Kaiming-uniform values in +-sqrt(6 / fan_in), drawn from a stream derived
/// from (seed, name) so a tensor's initial values depend only on those.
std::vector<double> kaiming_uniform(std::int64_t count, std::int64_t fan_in, std::uint64_t seed, std::string_view name);

extern template class ModelParams<float>;
extern template class ModelParams<double>;

}  // namespace mapfusion::ad
