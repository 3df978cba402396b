#include "mapfusion/ad/params.hpp"

#include <cmath>
#include <stdexcept>

#include "mapfusion/rng.hpp"

namespace mapfusion::ad {

std::string_view kind_name(ParamKind k) {
  switch (k) {
    case ParamKind::weight: return "weight";
    case ParamKind::bias: return "bias";
    case ParamKind::gain: return "gain";
    case ParamKind::offset: return "offset";
    case ParamKind::running_mean: return "running_mean";
    case ParamKind::running_var: return "running_var";
  }
  return "weight";
}

ParamKind kind_from_name(std::string_view s) {
  for (ParamKind k : {ParamKind::weight, ParamKind::bias, ParamKind::gain, ParamKind::offset, ParamKind::running_mean,
                      ParamKind::running_var})
    if (kind_name(k) == s) return k;
  throw std::invalid_argument("unknown parameter kind '" + std::string(s) + "'");
}

template <typename T>
Tensor<T> ModelParams<T>::add(const std::string& name, ParamKind kind, Shape shape, std::vector<T> values) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  Tensor<T> t = is_buffer(kind) ? Tensor<T>(std::move(shape), std::move(values))
                                : Tensor<T>::parameter(std::move(shape), std::move(values));
  entries_.push_back({name, kind, t});
  return t;
}

template <typename T>
bool ModelParams<T>::contains(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

template <typename T>
Tensor<T> ModelParams<T>::get(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

template <typename T>
std::vector<Tensor<T>> ModelParams<T>::trainable() const {
  std::vector<Tensor<T>> out;
  for (const auto& e : entries_)
    if (!is_buffer(e.kind)) out.push_back(e.tensor);
  return out;
}

template <typename T>
std::vector<std::string> ModelParams<T>::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (!is_buffer(e.kind)) out.push_back(e.name);
  return out;
}

template <typename T>
std::int64_t ModelParams<T>::trainable_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_)
    if (!is_buffer(e.kind)) n += static_cast<std::int64_t>(e.tensor.size());
  return n;
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<double> kaiming_uniform(std::int64_t count, std::int64_t fan_in, std::uint64_t seed,
                                    std::string_view name) {
  if (fan_in <= 0) throw std::invalid_argument("kaiming_uniform: fan_in must be positive");
  Rng rng(derive_seed(seed, name));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(static_cast<std::size_t>(count));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return v;
}

template class ModelParams<float>;
template class ModelParams<double>;

}  // namespace mapfusion::ad
