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

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zeropp/core_model.hpp"

namespace zeropp {

enum class Method { kTp3d, kGpipe, kOneFOneB, kInterleaved1F1B, kZeroPP, kZeroPPRecomp, kBfpp };

inline const char* ToString(Method m) {
  switch (m) {
    case Method::kTp3d: return "TP3D";
    case Method::kGpipe: return "GPIPE";
    case Method::kOneFOneB: return "ONE_F_ONE_B";
    case Method::kInterleaved1F1B: return "INTERLEAVED_1F1B";
    case Method::kZeroPP: return "ZEROPP";
    case Method::kZeroPPRecomp: return "ZEROPP_RECOMP";
    case Method::kBfpp: return "BFPP";
  }
  return "?";
}

inline std::optional<Method> ParseMethod(std::string_view s) {
  for (auto m : {Method::kTp3d, Method::kGpipe, Method::kOneFOneB, Method::kInterleaved1F1B, Method::kZeroPP,
                 Method::kZeroPPRecomp, Method::kBfpp}) {
    std::string name = ToString(m), lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == name || s == lower) return m;
  }
  return std::nullopt;
}

// The five rows of the PP-method comparison, in table order.
inline std::vector<Method> ComparisonTableMethods() {
  return {Method::kGpipe, Method::kOneFOneB, Method::kInterleaved1F1B, Method::kZeroPP, Method::kZeroPPRecomp};
}

struct CostReport {
  Method method = Method::kZeroPP;
  double bubble_ratio = 0;
  Bytes weight_mem = 0;
  Bytes activation_mem = 0;
  Bytes comm_volume_per_block = 0;
  bool crossover_satisfied = false;
};

// Tensor-parallel volume per transformer block per iteration: four
// all-reduces over B micro-batches of b*s*h activations, 8Bbsh elements.
inline Bytes TpCommVolume(const ModelSpec& m, const ParallelConfig& c) {
  return 8.0 * c.microbatches * c.microbatch_samples * static_cast<double>(m.seq_len) * m.hidden_size *
         m.bytes_per_element;
}

// ZeroPP intra-node volume per block per iteration: B/U units, each moving
// three copies of the ~12h^2 block parameters (two gathers, one scatter).
inline Bytes ZeroPPCommVolume(const ModelSpec& m, const ParallelConfig& c) {
  const double h = m.hidden_size;
  return 36.0 * c.microbatches * h * h * m.bytes_per_element / c.unit_size;
}

// True iff 2sUb > 9h, i.e. ZeroPP moves fewer bytes per block than TP.
inline bool Crossover(const ModelSpec& m, const ParallelConfig& c) {
  return 2.0 * m.seq_len * c.unit_size * c.microbatch_samples > 9.0 * m.hidden_size;
}

// Bubble slots per iteration: 0 once a unit holds 2P-1 micro-batches,
// B(2P-1-U)/U below that.
inline double BubbleFormula(const ParallelConfig& c) {
  const int active = 2 * c.pp_size - 1;
  if (c.unit_size >= active) return 0.0;
  return static_cast<double>(c.microbatches) * (active - c.unit_size) / c.unit_size;
}

struct MemoryFormula {
  Bytes weight = 0;
  Bytes activation = 0;
};

// Weight: local shard plus one gathered stage. Activation: min(B, U)
// micro-batches across the device's L/P layers.
inline MemoryFormula EvaluateMemoryFormula(const ModelSpec& m, const ParallelConfig& c) {
  const double L = m.num_layers, P = c.pp_size, D = c.dp_size, V = c.stages_per_device;
  MemoryFormula out;
  out.weight = L * m.weight_mem_per_layer / (P * D) + L * m.weight_mem_per_layer / (P * V);
  out.activation = std::min(c.microbatches, c.unit_size) * L * m.act_mem_per_layer_per_microbatch / P;
  return out;
}

// Closed-form row for one method. The ZeroPP activation rows are the
// U = 2P-1 specialisation of the memory formula. Bubble ratios are idle over
// useful compute and are capped at 1.
inline CostReport Table2Row(Method method, const ModelSpec& m, const ParallelConfig& c) {
  const double L = m.num_layers, P = c.pp_size, D = c.dp_size, V = c.stages_per_device, B = c.microbatches;
  const double Mw = m.weight_mem_per_layer, Ma = m.act_mem_per_layer_per_microbatch;
  if ((method == Method::kGpipe || method == Method::kOneFOneB) && c.stages_per_device != 1)
    throw ConfigError(std::string(ToString(method)) + " requires stages_per_device = 1");
  CostReport r;
  r.method = method;
  r.crossover_satisfied = Crossover(m, c);
  const Bytes zero_weight = L * Mw * (1.0 / (P * D) + 1.0 / (P * V));
  switch (method) {
    case Method::kGpipe:
      r.bubble_ratio = (P - 1) / B;
      r.weight_mem = L * Mw / P;
      r.activation_mem = B * L * Ma / P;
      break;
    case Method::kOneFOneB:
      r.bubble_ratio = (P - 1) / B;
      r.weight_mem = L * Mw / P;
      r.activation_mem = L * Ma;
      break;
    case Method::kInterleaved1F1B:
      r.bubble_ratio = (P - 1) / (V * B);
      r.weight_mem = L * Mw / P;
      r.activation_mem = L * Ma * (1.0 + (P - 1) / (V * P));
      break;
    case Method::kZeroPP:
      r.weight_mem = zero_weight;
      r.activation_mem = L * Ma * (2.0 - 1.0 / P);
      r.comm_volume_per_block = ZeroPPCommVolume(m, c);
      break;
    case Method::kZeroPPRecomp:
      r.weight_mem = zero_weight;
      r.activation_mem = L * Ma * (2.0 / V - 1.0 / (V * P));
      r.comm_volume_per_block = ZeroPPCommVolume(m, c);
      break;
    case Method::kTp3d:
      // Interleaved 1F1B pipeline over TP groups of size D.
      r.bubble_ratio = (P - 1) / (V * B);
      r.weight_mem = L * Mw / (P * D);
      r.activation_mem = L * Ma * (1.0 + (P - 1) / (V * P));
      r.comm_volume_per_block = TpCommVolume(m, c);
      break;
    case Method::kBfpp:
      r.bubble_ratio = (P - 1) / (V * B);
      r.weight_mem = zero_weight;
      r.activation_mem = B * L * Ma / P;
      ParallelConfig one_unit = c;
      one_unit.unit_size = c.microbatches;
      r.comm_volume_per_block = ZeroPPCommVolume(m, one_unit);
      break;
  }
  r.bubble_ratio = std::min(1.0, r.bubble_ratio);
  return r;
}

struct Figure1Point {
  long long global_batch = 0;
  Bytes tp_bytes = 0;
  Bytes zero3_bytes = 0;
};

// Per-GPU communication of pure TP versus pure ZeRO-3 over the whole model
// for each global batch. ZeRO-3 is ZeroPP with P = 1 and the whole batch in
// one unit: three parameter-sized collectives per iteration.
inline std::vector<Figure1Point> Figure1Curve(const ModelSpec& m, const std::vector<long long>& global_batches) {
  std::vector<Figure1Point> out;
  for (long long g : global_batches) {
    ParallelConfig c;
    c.microbatches = 1;
    c.unit_size = 1;
    c.microbatch_samples = 1;
    Figure1Point p;
    p.global_batch = g;
    p.tp_bytes = m.num_layers * TpCommVolume(m, c) * static_cast<double>(g);
    p.zero3_bytes = m.num_layers * ZeroPPCommVolume(m, c);
    out.push_back(p);
  }
  return out;
}

// Smallest global batch G (one unit holding the whole batch) with 2sG > 9h.
inline long long Figure1CrossoverBatch(const ModelSpec& m) {
  return static_cast<long long>(9LL * m.hidden_size / (2LL * m.seq_len)) + 1;
}

}  // namespace zeropp
