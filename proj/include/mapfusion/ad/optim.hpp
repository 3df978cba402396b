#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapfusion/ad/params.hpp"

namespace mapfusion::ad {

struct AdamWConfig {
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments are kept per parameter, in the order the parameters are passed.
template <typename T>
struct OptimState {
  AdamWConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

/// One AdamW update with decoupled weight decay. A parameter without an
/// accumulated gradient is treated as having a zero gradient.
template <typename T>
void adamw_step(std::vector<Tensor<T>>& params, OptimState<T>& state, double lr);

/// Linear warm-up from max_lr/10 over the first 40% of steps, then cosine
/// decay to max_lr/1000 at total_steps.
double one_cycle_lr(std::int64_t step, std::int64_t total_steps, double max_lr);

/// Checkpoint I/O. The payload is always little-endian float32.
void save_checkpoint(const std::string& path, const ModelParams<float>& params, const OptimState<float>* optim,
                     const nlohmann::json& meta);

/// Restores params (and optim when given and present). Names beginning with
/// any of `ignored_prefixes` are skipped on both sides. Returns the meta
/// object. Name or shape mismatches throw with the full list.
nlohmann::json load_checkpoint(const std::string& path, ModelParams<float>& params, OptimState<float>* optim = nullptr,
                               const std::vector<std::string>& ignored_prefixes = {});

/// Meta object only, without touching any parameters.
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace mapfusion::ad
