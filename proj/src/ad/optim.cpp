#include "mapfusion/ad/optim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>

namespace mapfusion::ad {

template <typename T>
void adamw_step(std::vector<Tensor<T>>& params, OptimState<T>& state, double lr) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), T(0));
      state.v.emplace_back(p.size(), T(0));
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adamw_step: optimizer state does not match params");
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * c.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.size()) throw std::invalid_argument("adamw_step: moment shape mismatch");
    auto theta = p.mutable_data();
    const bool has = p.has_grad();
    std::span<T> g = has ? p.mutable_grad() : std::span<T>{};
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = has ? static_cast<double>(g[i]) : 0.0;
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      double t = theta[i] * decay;
      t -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.epsilon);
      theta[i] = static_cast<T>(t);
    }
  }
}

template void adamw_step(std::vector<Tensor<float>>&, OptimState<float>&, double);
template void adamw_step(std::vector<Tensor<double>>&, OptimState<double>&, double);

double one_cycle_lr(std::int64_t step, std::int64_t total_steps, double max_lr) {
  if (total_steps <= 0) throw std::invalid_argument("one_cycle_lr: total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw std::out_of_range("one_cycle_lr: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(total_steps) + "]");
  const double start = max_lr / 10.0, end = max_lr / 1000.0;
  const double warm = 0.4 * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s == warm) return max_lr;
  if (s < warm) return start + (max_lr - start) * (s / warm);
  const double u = (s - warm) / (static_cast<double>(total_steps) - warm);
  if (step == total_steps) return end;
  return end + (max_lr - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

namespace {

constexpr char kMagic[8] = {'M', 'F', 'C', 'K', 'P', 'T', '1', '\n'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

bool has_prefix(const std::string& name, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes)
    if (name.rfind(p, 0) == 0) return true;
  return false;
}

struct Blob {
  nlohmann::json manifest;
  std::vector<float> payload;
};

Blob read_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("'" + path + "' is not a checkpoint (bad magic)");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in || len > (1ull << 30)) throw std::runtime_error("'" + path + "': corrupt manifest length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("'" + path + "': truncated manifest");
  Blob b;
  b.manifest = nlohmann::json::parse(text);
  std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (rest.size() % 4 != 0) throw std::runtime_error("'" + path + "': payload is not float32-aligned");
  std::uint64_t expected = 0;
  for (const auto& t : b.manifest.at("tensors")) {
    std::uint64_t n = 1;
    for (auto d : t.at("shape")) n *= d.get<std::uint64_t>();
    expected = std::max(expected, t.at("offset").get<std::uint64_t>() + 4 * n);
  }
  if (rest.size() != expected)
    throw std::runtime_error("'" + path + "': payload holds " + std::to_string(rest.size()) + " bytes, manifest expects " +
                             std::to_string(expected));
  b.payload.resize(rest.size() / 4);
  std::memcpy(b.payload.data(), rest.data(), rest.size());
  return b;
}

std::vector<float> slice(const Blob& b, const nlohmann::json& entry, const std::string& path) {
  const auto offset = entry.at("offset").get<std::uint64_t>();
  std::int64_t n = 1;
  for (auto d : entry.at("shape")) n *= d.get<std::int64_t>();
  if (offset % 4 != 0 || offset / 4 + n > b.payload.size())
    throw std::runtime_error("'" + path + "': tensor '" + entry.at("name").get<std::string>() +
                             "' lies outside the payload");
  return {b.payload.begin() + offset / 4, b.payload.begin() + offset / 4 + n};
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams<float>& params, const OptimState<float>* optim,
                     const nlohmann::json& meta) {
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<float> payload;
  auto push = [&](const std::string& name, const Shape& shape, std::string_view kind, const std::vector<float>& v) {
    tensors.push_back({{"name", name},
                       {"shape", shape},
                       {"dtype", "float32"},
                       {"offset", payload.size() * 4},
                       {"kind", kind}});
    payload.insert(payload.end(), v.begin(), v.end());
  };
  for (const auto& e : params.entries()) push(e.name, e.tensor.shape(), kind_name(e.kind), e.tensor.values());
  const bool with_opt = optim && !optim->m.empty();
  if (with_opt) {
    const auto names = params.trainable_names();
    const auto shapes = params.trainable();
    if (optim->m.size() != names.size()) throw std::invalid_argument("save_checkpoint: optimizer state mismatch");
    for (std::size_t k = 0; k < names.size(); ++k) push("opt.m/" + names[k], shapes[k].shape(), "moment", optim->m[k]);
    for (std::size_t k = 0; k < names.size(); ++k) push("opt.v/" + names[k], shapes[k].shape(), "moment", optim->v[k]);
  }
  nlohmann::json manifest = {{"tensors", tensors}, {"optimizer_state", with_opt}, {"meta", meta}};
  if (with_opt)
    manifest["optimizer"] = {{"step", optim->step},
                             {"weight_decay", optim->config.weight_decay},
                             {"beta1", optim->config.beta1},
                             {"beta2", optim->config.beta2},
                             {"epsilon", optim->config.epsilon}};
  const std::string text = manifest.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out.write(kMagic, 8);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
    if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot rename onto '" + path + "'");
}

nlohmann::json read_checkpoint_meta(const std::string& path) { return read_blob(path).manifest.value("meta", nlohmann::json::object()); }

nlohmann::json load_checkpoint(const std::string& path, ModelParams<float>& params, OptimState<float>* optim,
                               const std::vector<std::string>& ignored_prefixes) {
  const Blob b = read_blob(path);
  std::map<std::string, const nlohmann::json*> stored;
  for (const auto& e : b.manifest.at("tensors")) {
    const auto name = e.at("name").get<std::string>();
    if (name.rfind("opt.", 0) == 0 || has_prefix(name, ignored_prefixes)) continue;
    stored[name] = &e;
  }
  std::vector<std::string> missing, extra, bad_shape;
  for (const auto& e : params.entries()) {
    if (has_prefix(e.name, ignored_prefixes)) continue;
    auto it = stored.find(e.name);
    if (it == stored.end()) {
      missing.push_back(e.name);
    } else if (it->second->at("shape").get<Shape>() != e.tensor.shape()) {
      bad_shape.push_back(e.name + " " + it->second->at("shape").dump() + " vs " + shape_str(e.tensor.shape()));
    }
  }
  for (const auto& [name, _] : stored)
    if (!params.contains(name)) extra.push_back(name);
  if (!missing.empty() || !extra.empty() || !bad_shape.empty()) {
    std::string msg = "checkpoint '" + path + "' does not match the model:";
    auto list = [&](const char* label, const std::vector<std::string>& v) {
      if (v.empty()) return;
      msg += std::string(" ") + label + " [";
      for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? ", " : "") + v[i];
      msg += "]";
    };
    list("missing", missing);
    list("unexpected", extra);
    list("shape", bad_shape);
    throw std::runtime_error(msg);
  }
  for (const auto& e : params.entries()) {
    if (has_prefix(e.name, ignored_prefixes)) continue;
    const auto v = slice(b, *stored.at(e.name), path);
    auto dst = Tensor<float>(e.tensor).mutable_data();
    std::copy(v.begin(), v.end(), dst.begin());
  }
  if (optim && b.manifest.value("optimizer_state", false)) {
    std::map<std::string, const nlohmann::json*> moments;
    for (const auto& e : b.manifest.at("tensors")) {
      const auto name = e.at("name").get<std::string>();
      if (name.rfind("opt.", 0) == 0) moments[name] = &e;
    }
    const auto names = params.trainable_names();
    optim->m.clear();
    optim->v.clear();
    for (const auto& n : names) {
      auto im = moments.find("opt.m/" + n), iv = moments.find("opt.v/" + n);
      if (im == moments.end() || iv == moments.end())
        throw std::runtime_error("checkpoint '" + path + "': optimizer state lacks moments for '" + n + "'");
      optim->m.push_back(slice(b, *im->second, path));
      optim->v.push_back(slice(b, *iv->second, path));
    }
    const auto& o = b.manifest.at("optimizer");
    optim->step = o.at("step").get<std::int64_t>();
    optim->config.weight_decay = o.at("weight_decay").get<double>();
    optim->config.beta1 = o.at("beta1").get<double>();
    optim->config.beta2 = o.at("beta2").get<double>();
    optim->config.epsilon = o.at("epsilon").get<double>();
  }
  return b.manifest.value("meta", nlohmann::json::object());
}

}  // namespace mapfusion::ad
