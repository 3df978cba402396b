#include "mapfusion/ad/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mapfusion::ad {

namespace {

template <typename T>
void check_targets(const Tensor<T>& logits, const Tensor<T>& targets, const char* op) {
  if (!logits.defined() || !targets.defined() || logits.shape() != targets.shape())
    throw ShapeError(std::string(op) + ": logits " + (logits.defined() ? shape_str(logits.shape()) : "<none>") +
                     " vs targets " + (targets.defined() ? shape_str(targets.shape()) : "<none>"));
  for (T t : targets.values())
    if (!(t >= T(0) && t <= T(1)))
      throw std::invalid_argument(std::string(op) + ": target value " + std::to_string(static_cast<double>(t)) +
                                  " outside [0, 1]");
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
  check_targets(logits, targets, "bce_with_logits");
  const auto& z = logits.values();
  const auto& t = targets.values();
  const std::size_t n = z.size();
  if (n == 0) throw ShapeError("bce_with_logits: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += softplus(z[i]) - static_cast<double>(z[i]) * t[i];
  return Tensor<T>::make_result({}, {static_cast<T>(acc / n)}, {logits}, [t](detail::Node<T>& self) {
    auto& Z = *self.parents[0];
    if (!Z.requires_grad) return;
    auto& dz = Z.ensure_grad();
    const double g = self.grad[0] / static_cast<double>(dz.size());
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += static_cast<T>(g * (sigmoid(Z.value[i]) - t[i]));
  });
}

template <typename T>
Tensor<T> penalty_reduced_focal(const Tensor<T>& logits, const Tensor<T>& targets) {
  check_targets(logits, targets, "penalty_reduced_focal");
  constexpr double alpha = 2.0, beta = 4.0;
  const auto& z = logits.values();
  const auto& t = targets.values();
  std::size_t positives = 0;
  for (T v : t) positives += v == T(1);
  const double norm = static_cast<double>(std::max<std::size_t>(positives, 1));
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = sigmoid(z[i]);
    const double log_p = -softplus(-z[i]);
    const double log_1mp = -softplus(z[i]);
    if (t[i] == T(1))
      acc -= std::pow(1.0 - p, alpha) * log_p;
    else
      acc -= std::pow(1.0 - t[i], beta) * std::pow(p, alpha) * log_1mp;
  }
  return Tensor<T>::make_result({}, {static_cast<T>(acc / norm)}, {logits}, [t, norm](detail::Node<T>& self) {
    auto& Z = *self.parents[0];
    if (!Z.requires_grad) return;
    auto& dz = Z.ensure_grad();
    const double g = self.grad[0] / norm;
    for (std::size_t i = 0; i < dz.size(); ++i) {
      const double zi = Z.value[i];
      const double p = sigmoid(zi);
      double d;
      if (t[i] == T(1))
        d = std::pow(1.0 - p, alpha) * (alpha * p * -softplus(-zi) - (1.0 - p));
      else
        d = -std::pow(1.0 - t[i], beta) * std::pow(p, alpha) * (alpha * (1.0 - p) * -softplus(zi) - p);
      dz[i] += static_cast<T>(g * d);
    }
  });
}

template <typename T>
Tensor<T> l1_masked(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& mask) {
  if (!pred.defined() || !target.defined() || pred.shape() != target.shape() || pred.rank() != 4)
    throw ShapeError("l1_masked: pred and target must share an [N, C, H, W] shape");
  const std::int64_t N = pred.dim(0), C = pred.dim(1), HW = pred.dim(2) * pred.dim(3);
  if (!mask.defined() || static_cast<std::int64_t>(mask.size()) != N * HW)
    throw ShapeError("l1_masked: mask needs " + std::to_string(N * HW) + " values for pred " +
                     shape_str(pred.shape()));
  const auto& p = pred.values();
  const auto& q = target.values();
  const auto& m = mask.values();
  double msum = 0.0;
  for (T v : m) msum += v;
  double acc = 0.0;
  if (msum > 0.0)
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < HW; ++i) {
          const T w = m[n * HW + i];
          if (w != T(0)) {
            const std::size_t k = (n * C + c) * HW + i;
            acc += w * std::abs(static_cast<double>(p[k]) - q[k]);
          }
        }
  const double denom = msum > 0.0 ? C * msum : 1.0;
  return Tensor<T>::make_result(
      {}, {static_cast<T>(acc / denom)}, {pred}, [q, m, N, C, HW, denom, msum](detail::Node<T>& self) {
        auto& P = *self.parents[0];
        if (!P.requires_grad || msum <= 0.0) return;
        auto& dp = P.ensure_grad();
        const double g = self.grad[0] / denom;
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t i = 0; i < HW; ++i) {
              const std::size_t k = (n * C + c) * HW + i;
              const double diff = static_cast<double>(P.value[k]) - q[k];
              const double s = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
              dp[k] += static_cast<T>(g * m[n * HW + i] * s);
            }
      });
}

template Tensor<float> bce_with_logits(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> bce_with_logits(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> penalty_reduced_focal(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> penalty_reduced_focal(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> l1_masked(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> l1_masked(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);

}  // namespace mapfusion::ad
