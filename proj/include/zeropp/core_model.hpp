/* Copyright 2026 The ZeroPP Sim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace zeropp {

using Bytes = double;
using Time = double;

// Malformed input text (not JSON, wrong field types).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a domain invariant.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class HybridMode { kDpOuter, kZero1Outer };
enum class Recompute { kNone, kFull };

inline constexpr double kDefaultActivationConstant = 34.0;
inline constexpr double kDefaultOptimizerStateMultiplier = 2.0;

inline Bytes DefaultWeightMemPerLayer(int hidden_size, double bytes_per_element) {
  const double h = hidden_size;
  return 12.0 * h * h * bytes_per_element;
}

inline Bytes DefaultActMemPerLayer(int seq_len, int microbatch_samples, int hidden_size,
                                   double bytes_per_element, double activation_constant) {
  return static_cast<double>(seq_len) * microbatch_samples * hidden_size * bytes_per_element *
         activation_constant;
}

// Transformer model description. Per-task times are abstract units per layer
// per micro-batch; memories are bytes per layer.
struct ModelSpec {
  int num_layers = 1;
  int hidden_size = 1;
  int seq_len = 1;
  Bytes weight_mem_per_layer = 0;
  Bytes act_mem_per_layer_per_microbatch = 0;
  Time t_forward = 1;
  Time t_input_grad = 1;
  Time t_weight_grad = 1;
  Time t_optstep = 0;
  double bytes_per_element = 2;
};

struct ParallelConfig {
  int pp_size = 1;
  int dp_size = 1;
  int stages_per_device = 1;
  int microbatches = 1;
  int unit_size = 1;
  int microbatch_samples = 1;
  int inter_node_dp = 1;
  HybridMode hybrid_mode = HybridMode::kDpOuter;
  Recompute recompute = Recompute::kNone;
  double optimizer_state_multiplier = kDefaultOptimizerStateMultiplier;

  int num_units() const { return microbatches / unit_size; }
  int num_stages() const { return pp_size * stages_per_device; }
};

struct CommCostModel {
  double intra_node_bandwidth = 1.0;  // bytes per time unit
  double inter_node_bandwidth = 1.0;
  Time per_collective_latency = 0.0;
  bool overlap_with_compute = true;

  // Collectives complete instantly. Used for formula comparisons.
  static CommCostModel Free() {
    CommCostModel c;
    c.intra_node_bandwidth = std::numeric_limits<double>::infinity();
    c.inter_node_bandwidth = std::numeric_limits<double>::infinity();
    c.per_collective_latency = 0.0;
    return c;
  }
};

struct Config {
  ModelSpec model;
  ParallelConfig parallel;
  CommCostModel costs;
};

inline void Validate(const ModelSpec& m) {
  if (m.num_layers < 1) throw ConfigError("num_layers must be >= 1 (L >= 1)");
  if (m.hidden_size < 1) throw ConfigError("hidden_size must be >= 1 (h >= 1)");
  if (m.seq_len < 1) throw ConfigError("seq_len must be >= 1 (s >= 1)");
  if (m.weight_mem_per_layer < 0 || m.act_mem_per_layer_per_microbatch < 0)
    throw ConfigError("per-layer memories must be >= 0");
  if (m.t_forward < 0 || m.t_input_grad < 0 || m.t_weight_grad < 0 || m.t_optstep < 0)
    throw ConfigError("task times must be >= 0");
  if (m.bytes_per_element <= 0) throw ConfigError("bytes_per_element must be > 0");
}

inline void Validate(const ParallelConfig& c) {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be >= 1");
  };
  positive(c.pp_size, "pp_size (P)");
  positive(c.dp_size, "dp_size (D)");
  positive(c.stages_per_device, "stages_per_device (V)");
  positive(c.microbatches, "microbatches (B)");
  positive(c.unit_size, "unit_size (U)");
  positive(c.microbatch_samples, "microbatch_samples (b)");
  positive(c.inter_node_dp, "inter_node_dp");
  if (c.unit_size > c.microbatches) throw ConfigError("unit_size must not exceed microbatches (U <= B)");
  if (c.microbatches % c.unit_size != 0)
    throw ConfigError("microbatches must be a multiple of unit_size (B mod U ≠ 0)");
  if (!(c.optimizer_state_multiplier >= 0))
    throw ConfigError("optimizer_state_multiplier must be >= 0");
}

inline void Validate(const CommCostModel& c) {
  if (!(c.intra_node_bandwidth > 0) || !(c.inter_node_bandwidth > 0))
    throw ConfigError("bandwidths must be > 0");
  if (!(c.per_collective_latency >= 0)) throw ConfigError("per_collective_latency must be >= 0");
}

inline void Validate(const ModelSpec& m, const ParallelConfig& c) {
  Validate(m);
  Validate(c);
  if (m.num_layers % c.num_stages() != 0)
    throw ConfigError("num_layers must divide evenly into pp_size*stages_per_device stages (L mod (P·V) ≠ 0)");
}

// ---------------------------------------------------------------------------
// Placement

struct LayerRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool operator==(const LayerRange&) const = default;
};

// Looping placement: stage i lives on device i mod P, and stage i covers the
// i-th contiguous block of L/(P*V) layers.
class Placement {
 public:
  Placement(int pp_size, int stages_per_device, int num_layers)
      : pp_size_(pp_size), stages_per_device_(stages_per_device), num_layers_(num_layers) {
    if (pp_size < 1 || stages_per_device < 1 || num_layers < 1 ||
        num_layers % (pp_size * stages_per_device) != 0)
      throw ConfigError("invalid placement (L mod (P·V) ≠ 0)");
  }

  int num_stages() const { return pp_size_ * stages_per_device_; }
  int num_devices() const { return pp_size_; }
  int stages_per_device() const { return stages_per_device_; }
  int num_layers() const { return num_layers_; }
  int layers_per_stage() const { return num_layers_ / num_stages(); }
  int layers_per_device() const { return num_layers_ / pp_size_; }

  int device_of(int stage) const { return stage % pp_size_; }
  // Index of the stage among the stages its device owns (0..V-1).
  int round_of(int stage) const { return stage / pp_size_; }
  int stage_at(int device, int round) const { return round * pp_size_ + device; }
  bool is_last_stage(int stage) const { return stage == num_stages() - 1; }
  bool is_last_round(int stage) const { return round_of(stage) == stages_per_device_ - 1; }

  LayerRange layers_of(int stage) const {
    const int n = layers_per_stage();
    return {stage * n, (stage + 1) * n};
  }

  std::vector<int> stages_on(int device) const {
    std::vector<int> out;
    out.reserve(stages_per_device_);
    for (int r = 0; r < stages_per_device_; ++r) out.push_back(stage_at(device, r));
    return out;
  }

 private:
  int pp_size_;
  int stages_per_device_;
  int num_layers_;
};

inline Placement MakePlacement(const ParallelConfig& cfg, const ModelSpec& model) {
  Validate(model, cfg);
  return Placement(cfg.pp_size, cfg.stages_per_device, model.num_layers);
}

// ---------------------------------------------------------------------------
// Config file (JSON with `model`, `parallel`, `costs` objects)

inline const char* ToString(HybridMode m) {
  return m == HybridMode::kDpOuter ? "DP_OUTER" : "ZERO1_OUTER";
}
inline const char* ToString(Recompute r) { return r == Recompute::kNone ? "NONE" : "FULL"; }

inline HybridMode ParseHybridMode(std::string_view s) {
  if (s == "DP_OUTER" || s == "dp_outer") return HybridMode::kDpOuter;
  if (s == "ZERO1_OUTER" || s == "zero1_outer") return HybridMode::kZero1Outer;
  throw ParseError("unknown hybrid_mode '" + std::string(s) + "'");
}

inline Recompute ParseRecompute(std::string_view s) {
  if (s == "NONE" || s == "none") return Recompute::kNone;
  if (s == "FULL" || s == "full") return Recompute::kFull;
  throw ParseError("unknown recompute '" + std::string(s) + "'");
}

namespace detail {

template <typename T>
void Read(const nlohmann::json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

inline const nlohmann::json& Section(const nlohmann::json& root, const char* name) {
  static const nlohmann::json kEmpty = nlohmann::json::object();
  auto it = root.find(name);
  if (it == root.end()) return kEmpty;
  if (!it->is_object()) throw ParseError(std::string("'") + name + "' must be an object");
  return *it;
}

}  // namespace detail

// Builds and validates a Config from a parsed JSON document. Unset
// weight/activation memories get their defaults.
inline Config ConfigFromJson(const nlohmann::json& root) {
  if (!root.is_object()) throw ParseError("config root must be an object");
  Config cfg;
  const auto& m = detail::Section(root, "model");
  const auto& p = detail::Section(root, "parallel");
  const auto& c = detail::Section(root, "costs");

  ModelSpec& model = cfg.model;
  detail::Read(m, "num_layers", model.num_layers);
  detail::Read(m, "hidden_size", model.hidden_size);
  detail::Read(m, "seq_len", model.seq_len);
  detail::Read(m, "weight_mem_per_layer", model.weight_mem_per_layer);
  detail::Read(m, "act_mem_per_layer_per_microbatch", model.act_mem_per_layer_per_microbatch);
  detail::Read(m, "t_forward", model.t_forward);
  detail::Read(m, "t_input_grad", model.t_input_grad);
  detail::Read(m, "t_weight_grad", model.t_weight_grad);
  detail::Read(m, "t_optstep", model.t_optstep);
  detail::Read(m, "bytes_per_element", model.bytes_per_element);
  double act_constant = kDefaultActivationConstant;
  detail::Read(m, "activation_constant", act_constant);

  ParallelConfig& par = cfg.parallel;
  detail::Read(p, "pp_size", par.pp_size);
  detail::Read(p, "dp_size", par.dp_size);
  detail::Read(p, "stages_per_device", par.stages_per_device);
  detail::Read(p, "microbatches", par.microbatches);
  par.unit_size = par.microbatches;
  detail::Read(p, "unit_size", par.unit_size);
  detail::Read(p, "microbatch_samples", par.microbatch_samples);
  detail::Read(p, "inter_node_dp", par.inter_node_dp);
  std::string mode = ToString(par.hybrid_mode);
  detail::Read(p, "hybrid_mode", mode);
  par.hybrid_mode = ParseHybridMode(mode);
  std::string recompute = ToString(par.recompute);
  detail::Read(p, "recompute", recompute);
  par.recompute = ParseRecompute(recompute);
  detail::Read(p, "optimizer_state_multiplier", par.optimizer_state_multiplier);

  CommCostModel& costs = cfg.costs;
  detail::Read(c, "intra_node_bandwidth", costs.intra_node_bandwidth);
  detail::Read(c, "inter_node_bandwidth", costs.inter_node_bandwidth);
  detail::Read(c, "per_collective_latency", costs.per_collective_latency);
  detail::Read(c, "overlap_with_compute", costs.overlap_with_compute);
  // An explicit null bandwidth means the tier is unconstrained.
  for (auto [key, field] : {std::pair{"intra_node_bandwidth", &costs.intra_node_bandwidth},
                            std::pair{"inter_node_bandwidth", &costs.inter_node_bandwidth}}) {
    if (c.contains(key) && c[key].is_null()) *field = std::numeric_limits<double>::infinity();
  }

  if (!m.contains("weight_mem_per_layer") || m["weight_mem_per_layer"].is_null())
    model.weight_mem_per_layer = DefaultWeightMemPerLayer(model.hidden_size, model.bytes_per_element);
  if (!m.contains("act_mem_per_layer_per_microbatch") || m["act_mem_per_layer_per_microbatch"].is_null())
    model.act_mem_per_layer_per_microbatch = DefaultActMemPerLayer(
        model.seq_len, par.microbatch_samples, model.hidden_size, model.bytes_per_element, act_constant);

  Validate(model, par);
  Validate(costs);
  return cfg;
}

inline Config ParseConfig(std::string_view text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed config: ") + e.what());
  }
  return ConfigFromJson(root);
}

inline Config LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

inline nlohmann::json ToJson(const Config& cfg) {
  const auto& m = cfg.model;
  const auto& p = cfg.parallel;
  const auto& c = cfg.costs;
  nlohmann::json j;
  j["model"] = {{"num_layers", m.num_layers},
                {"hidden_size", m.hidden_size},
                {"seq_len", m.seq_len},
                {"weight_mem_per_layer", m.weight_mem_per_layer},
                {"act_mem_per_layer_per_microbatch", m.act_mem_per_layer_per_microbatch},
                {"t_forward", m.t_forward},
                {"t_input_grad", m.t_input_grad},
                {"t_weight_grad", m.t_weight_grad},
                {"t_optstep", m.t_optstep},
                {"bytes_per_element", m.bytes_per_element}};
  j["parallel"] = {{"pp_size", p.pp_size},
                   {"dp_size", p.dp_size},
                   {"stages_per_device", p.stages_per_device},
                   {"microbatches", p.microbatches},
                   {"unit_size", p.unit_size},
                   {"microbatch_samples", p.microbatch_samples},
                   {"inter_node_dp", p.inter_node_dp},
                   {"hybrid_mode", ToString(p.hybrid_mode)},
                   {"recompute", ToString(p.recompute)},
                   {"optimizer_state_multiplier", p.optimizer_state_multiplier}};
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  j["costs"] = {{"intra_node_bandwidth", finite_or_null(c.intra_node_bandwidth)},
                {"inter_node_bandwidth", finite_or_null(c.inter_node_bandwidth)},
                {"per_collective_latency", c.per_collective_latency},
                {"overlap_with_compute", c.overlap_with_compute}};
  return j;
}

}  // namespace zeropp
