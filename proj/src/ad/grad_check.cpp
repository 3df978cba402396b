#include "mapfusion/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <tuple>

#include "mapfusion/ad/ops.hpp"
#include "mapfusion/rng.hpp"

namespace mapfusion::ad {

namespace {

using Masks = std::vector<std::vector<std::uint8_t>>;

struct Probe {
  double value;
  Masks masks;
};

}  // namespace

GradCheckResult grad_check(const std::function<Tensor<double>()>& fragment, std::vector<Tensor<double>> inputs,
                           const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, "grad_check"));
  std::vector<double> weights;
  auto evaluate = [&]() -> Probe {
    NoGradGuard ng;
    ReluMaskRecorder rec;
    const Tensor<double> out = fragment();
    if (weights.empty()) {
      weights.resize(out.size());
      for (auto& w : weights) w = rng.uniform(0.5, 1.5) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += out.values()[i] * weights[i];
    return {acc, rec.masks()};
  };

  const Probe base = evaluate();
  for (auto& t : inputs) t.zero_grad();
  {
    const Tensor<double> out = fragment();
    dot(out, weights).backward();
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) analytic.push_back(t.grad());

  GradCheckResult res;
  auto record = [&](double a, double n, const std::string& where) {
    const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), opt.floor});
    if (res.checked++ == 0 || err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst = where;
    }
  };

  // Central difference along `dir` (sparse: list of (tensor, index, weight)).
  // Shrinks the step when either side flips a relu; nullopt if it never settles.
  using Step = std::vector<std::tuple<std::size_t, std::size_t, double>>;
  auto central = [&](const Step& dir) -> std::optional<double> {
    double eps = opt.eps;
    for (int attempt = 0; attempt < 3; ++attempt, eps *= 0.1) {
      auto shift = [&](double s) {
        for (auto [ti, idx, w] : dir) inputs[ti].mutable_data()[idx] += s * w;
      };
      const auto saved = [&] {
        std::vector<double> v;
        for (auto [ti, idx, w] : dir) v.push_back(inputs[ti].values()[idx]);
        return v;
      }();
      auto restore = [&] {
        std::size_t k = 0;
        for (auto [ti, idx, w] : dir) inputs[ti].mutable_data()[idx] = saved[k++];
      };
      shift(eps);
      const Probe plus = evaluate();
      restore();
      shift(-eps);
      const Probe minus = evaluate();
      restore();
      if (plus.masks == base.masks && minus.masks == base.masks) return (plus.value - minus.value) / (2.0 * eps);
    }
    return std::nullopt;
  };

  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    const std::size_t n = inputs[ti].size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (opt.max_coords_per_tensor > 0 && n > opt.max_coords_per_tensor) {
      for (std::size_t i = 0; i < opt.max_coords_per_tensor; ++i) std::swap(coords[i], coords[i + rng.index(n - i)]);
      coords.resize(opt.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const auto num = central({{ti, idx, 1.0}});
      if (!num) {
        ++res.skipped;
        continue;
      }
      record(analytic[ti][idx], *num, std::to_string(ti) + "[" + std::to_string(idx) + "]");
    }
  }

  for (std::size_t k = 0; k < opt.directions; ++k) {
    Step dir;
    double a = 0.0;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti)
      for (std::size_t i = 0; i < inputs[ti].size(); ++i) {
        const double w = rng.normal();
        dir.emplace_back(ti, i, w);
        a += w * analytic[ti][i];
      }
    const auto num = central(dir);
    if (!num) {
      ++res.skipped;
      continue;
    }
    record(a, *num, "dir " + std::to_string(k));
  }
  return res;
}

}  // namespace mapfusion::ad
