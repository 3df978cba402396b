#include "mapfusion/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

namespace mapfusion {

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v{"baseline",      "mapseg",     "featureagg_simple",
                                          "featureagg_v1", "featureagg", "full"};
  return v;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (v.size() - 1))};
}

const VariantRow* AblationTable::find(const std::string& variant) const {
  for (const auto& r : rows)
    if (r.variant == variant) return &r;
  return nullptr;
}

AblationTable make_table(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                         const std::vector<std::vector<EpochLog>>& final_epochs) {
  if (final_epochs.size() != variants.size()) throw std::invalid_argument("make_table: one result list per variant");
  AblationTable t;
  t.seeds = seeds;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    VariantRow r;
    r.variant = variants[i];
    for (const auto& e : final_epochs[i]) {
      r.mAP.push_back(e.val_mAP);
      r.nds_lite.push_back(e.val_NDS_lite);
    }
    std::tie(r.mean_mAP, r.std_mAP) = mean_std(r.mAP);
    std::tie(r.mean_nds, r.std_nds) = mean_std(r.nds_lite);
    t.rows.push_back(r);
  }
  const std::pair<const char*, const char*> pairs[] = {{"mapseg", "baseline"},
                                                       {"featureagg", "baseline"},
                                                       {"full", "baseline"},
                                                       {"full", "featureagg"},
                                                       {"featureagg_v1", "featureagg_simple"},
                                                       {"featureagg", "featureagg_simple"}};
  for (auto [a, b] : pairs) {
    const VariantRow* ra = t.find(a);
    const VariantRow* rb = t.find(b);
    if (!ra || !rb) continue;
    t.deltas.push_back({std::string(a) + " - " + b, ra->mean_mAP - rb->mean_mAP, ra->mean_nds - rb->mean_nds});
  }
  return t;
}

nlohmann::json AblationTable::to_json() const {
  nlohmann::json rj = nlohmann::json::array();
  for (const auto& r : rows)
    rj.push_back({{"variant", r.variant},
                  {"mAP", r.mAP},
                  {"NDS_lite", r.nds_lite},
                  {"mean_mAP", r.mean_mAP},
                  {"std_mAP", r.std_mAP},
                  {"mean_NDS_lite", r.mean_nds},
                  {"std_NDS_lite", r.std_nds}});
  nlohmann::json dj = nlohmann::json::array();
  for (const auto& d : deltas) dj.push_back({{"delta", d.label}, {"mAP", d.mAP}, {"NDS_lite", d.nds_lite}});
  return {{"seeds", seeds}, {"rows", rj}, {"deltas", dj}};
}

std::string AblationTable::to_markdown() const {
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "| %-18s | %-17s | %-17s |\n", "variant", "mAP", "NDS_lite");
  s += buf;
  s += "|--------------------|-------------------|-------------------|\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "| %-18s | %7.4f +- %-6.4f | %7.4f +- %-6.4f |\n", r.variant.c_str(), r.mean_mAP,
                  r.std_mAP, r.mean_nds, r.std_nds);
    s += buf;
  }
  if (!deltas.empty()) {
    s += "\n";
    std::snprintf(buf, sizeof buf, "| %-34s | %-9s | %-9s |\n", "delta", "mAP", "NDS_lite");
    s += buf;
    s += "|------------------------------------|-----------|-----------|\n";
    for (const auto& d : deltas) {
      std::snprintf(buf, sizeof buf, "| %-34s | %+9.4f | %+9.4f |\n", d.label.c_str(), d.mAP, d.nds_lite);
      s += buf;
    }
  }
  return s;
}

AblationTable run_ablation(const AblationConfig& cfg, const std::function<void(const std::string&)>& progress) {
  if (cfg.seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
  for (const auto& v : cfg.variants) {
    TrainConfig probe;
    apply_variant(probe, v);  // rejects unknown names before any training
  }
  std::vector<std::vector<EpochLog>> finals;
  for (const auto& v : cfg.variants) {
    finals.emplace_back();
    for (std::uint64_t seed : cfg.seeds) {
      TrainConfig c = cfg.base;
      apply_variant(c, v);
      c.seed = seed;
      if (c.write_outputs)
        c.out_dir = (std::filesystem::path(cfg.base.out_dir) / v / ("seed_" + std::to_string(seed))).string();
      const TrainResult r = train(c);
      finals.back().push_back(r.log.back());
      if (progress) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s seed %llu: mAP %.4f NDS_lite %.4f", v.c_str(),
                      static_cast<unsigned long long>(seed), r.log.back().val_mAP, r.log.back().val_NDS_lite);
        progress(buf);
      }
    }
  }
  return make_table(cfg.variants, cfg.seeds, finals);
}

}  // namespace mapfusion
