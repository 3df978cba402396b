#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapfusion/trainer.hpp"

namespace mapfusion {

/// All supported variants, in table order.
const std::vector<std::string>& ablation_variants();

struct AblationConfig {
  TrainConfig base;  // fusion/map_seg/seed are overridden per run
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<std::string> variants = ablation_variants();
};

struct VariantRow {
  std::string variant;
  std::vector<double> mAP;  // one per seed, final epoch
  std::vector<double> nds_lite;
  double mean_mAP = 0.0, std_mAP = 0.0;
  double mean_nds = 0.0, std_nds = 0.0;
};

struct AblationDelta {
  std::string label;  // "<a> - <b>"
  double mAP = 0.0;   // difference of means
  double nds_lite = 0.0;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<VariantRow> rows;
  std::vector<AblationDelta> deltas;

  const VariantRow* find(const std::string& variant) const;
  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

/// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_std(const std::vector<double>& v);

/// Builds the table from per-(variant, seed) results.
AblationTable make_table(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                         const std::vector<std::vector<EpochLog>>& final_epochs);

/// Trains every variant for every seed. With base.write_outputs, runs land
/// in <out_dir>/<variant>/seed_<s>/.
AblationTable run_ablation(const AblationConfig& cfg,
                           const std::function<void(const std::string&)>& progress = nullptr);

}  // namespace mapfusion
