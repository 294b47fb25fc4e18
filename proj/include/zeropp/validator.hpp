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
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "zeropp/core_model.hpp"
#include "zeropp/schedule.hpp"
#include "zeropp/schedule_gen.hpp"

namespace zeropp {

enum class ViolationKind { kDepOrder, kMissingTask, kDuplicateTask, kUnitLeak, kRecomputeCount, kDeviceMismatch };

inline const char* ToString(ViolationKind k) {
  switch (k) {
    case ViolationKind::kDepOrder: return "DEP_ORDER";
    case ViolationKind::kMissingTask: return "MISSING_TASK";
    case ViolationKind::kDuplicateTask: return "DUPLICATE_TASK";
    case ViolationKind::kUnitLeak: return "UNIT_LEAK";
    case ViolationKind::kRecomputeCount: return "RECOMPUTE_COUNT";
    case ViolationKind::kDeviceMismatch: return "DEVICE_MISMATCH";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::vector<TaskKey> tasks;  // never empty
  std::string message;
};

inline std::string FormatViolation(const Violation& v) {
  std::ostringstream os;
  os << ToString(v.kind) << ": " << v.message << " [";
  for (std::size_t i = 0; i < v.tasks.size(); ++i) os << (i ? ", " : "") << Describe(v.tasks[i]);
  os << "]";
  return os.str();
}

// Checks a schedule against the DAG implied by its variant and `cfg`. The
// schedule's own edge list is ignored; edges are rebuilt from the task lists.
// Timing-free: cross-device order is checked by a virtual-time pass that
// runs each device's program order and reports any stall.
inline std::vector<Violation> ValidateSchedule(const Schedule& s, const Placement& pl,
                                               const ParallelConfig& cfg) {
  std::vector<Violation> out;
  const DagOptions opt = DagOptionsFor(s.variant, cfg);
  const int P = pl.num_devices();

  // (e) placement of every task.
  for (int d = 0; d < s.num_devices(); ++d) {
    for (std::size_t id : s.per_device[d]) {
      const Task& t = s.tasks[id];
      if (t.device != d || d >= P) {
        out.push_back({ViolationKind::kDeviceMismatch, {KeyOf(t)}, "task listed on device " + std::to_string(d)});
      } else if (t.stage >= pl.num_stages()) {
        out.push_back({ViolationKind::kDeviceMismatch, {KeyOf(t)}, "stage out of range"});
      } else if (t.stage >= 0 && pl.device_of(t.stage) != d) {
        out.push_back({ViolationKind::kDeviceMismatch, {KeyOf(t)},
                       "stage " + std::to_string(t.stage) + " belongs on device " +
                           std::to_string(pl.device_of(t.stage))});
      }
    }
  }

  // (b) each F/B/W exactly once; (d) R exactly once on recomputed pairs.
  std::map<TaskKey, int> seen;
  for (int d = 0; d < s.num_devices(); ++d)
    for (std::size_t id : s.per_device[d])
      if (IsStageCompute(s.tasks[id].kind)) ++seen[KeyOf(s.tasks[id])];
  std::set<TaskKey> expected;
  for (const TaskKey& k : detail::ExpectedComputeKeys(pl, cfg, opt))
    if (k.kind != TaskKind::kR) expected.insert(k);
  for (const TaskKey& k : expected) {
    auto it = seen.find(k);
    const int count = it == seen.end() ? 0 : it->second;
    if (count == 0) out.push_back({ViolationKind::kMissingTask, {k}, "required task absent"});
    if (count > 1) out.push_back({ViolationKind::kDuplicateTask, {k}, std::to_string(count) + " copies"});
  }
  for (const auto& [k, count] : seen) {
    if (k.kind == TaskKind::kR) {
      const bool wanted = opt.recompute && !opt.fused_backward && k.stage >= 0 &&
                          k.stage < pl.num_stages() && IsRecomputedStage(pl, k.stage) &&
                          k.microbatch >= 0 && k.microbatch < cfg.microbatches &&
                          k.unit == k.microbatch / opt.unit_size;
      if (!wanted || count != 1)
        out.push_back({ViolationKind::kRecomputeCount, {k},
                       wanted ? std::to_string(count) + " recomputations" : "recomputation not expected"});
    } else if (!expected.count(k)) {
      out.push_back({ViolationKind::kDuplicateTask, {k}, "task not part of this schedule variant"});
    }
  }
  if (opt.recompute && !opt.fused_backward) {
    for (int st = 0; st < pl.num_stages(); ++st) {
      if (!IsRecomputedStage(pl, st)) continue;
      for (int mb = 0; mb < cfg.microbatches; ++mb) {
        const TaskKey k = StageKey(TaskKind::kR, pl, st, mb, opt.unit_size);
        if (!seen.count(k)) out.push_back({ViolationKind::kRecomputeCount, {k}, "recomputation missing"});
      }
    }
  }

  // (c) unit isolation per device: no compute of a later unit before the
  // last memory-releasing task of an earlier unit.
  for (int d = 0; d < s.num_devices(); ++d) {
    std::map<int, std::pair<std::size_t, std::size_t>> last_release;  // unit -> (pos, id)
    std::map<int, std::pair<std::size_t, std::size_t>> first_compute;
    const auto& order = s.per_device[d];
    for (std::size_t p = 0; p < order.size(); ++p) {
      const Task& t = s.tasks[order[p]];
      if (!IsStageCompute(t.kind)) continue;
      first_compute.try_emplace(t.unit, p, order[p]);
      if (t.kind == TaskKind::kB || t.kind == TaskKind::kW) last_release[t.unit] = {p, order[p]};
    }
    for (const auto& [later, fc] : first_compute) {
      for (const auto& [earlier, lr] : last_release) {
        if (earlier >= later || lr.first < fc.first) continue;
        out.push_back({ViolationKind::kUnitLeak,
                       {KeyOf(s.tasks[fc.second]), KeyOf(s.tasks[lr.second])},
                       "unit " + std::to_string(later) + " starts before unit " + std::to_string(earlier) +
                           " released its memory on device " + std::to_string(d)});
      }
    }
  }

  // (a) dependency order.
  const std::vector<Edge> edges = BuildScheduleEdges(s, pl, cfg);
  std::vector<std::size_t> pos(s.tasks.size(), 0);
  for (const auto& order : s.per_device)
    for (std::size_t p = 0; p < order.size(); ++p) pos[order[p]] = p;
  bool direct = false;
  for (const auto& [a, b] : edges) {
    if (s.tasks[a].device == s.tasks[b].device && pos[b] < pos[a]) {
      direct = true;
      out.push_back({ViolationKind::kDepOrder, {KeyOf(s.tasks[a]), KeyOf(s.tasks[b])},
                     "successor scheduled before its dependency"});
    }
  }
  if (!direct) {
    std::vector<std::vector<std::size_t>> preds(s.tasks.size());
    for (const auto& [a, b] : edges) preds[b].push_back(a);
    std::vector<char> done(s.tasks.size(), 0);
    std::vector<std::size_t> head(s.per_device.size(), 0);
    bool progressed = true;
    while (progressed) {
      progressed = false;
      for (std::size_t d = 0; d < s.per_device.size(); ++d) {
        const auto& order = s.per_device[d];
        while (head[d] < order.size()) {
          const std::size_t id = order[head[d]];
          if (!std::all_of(preds[id].begin(), preds[id].end(), [&](std::size_t p) { return done[p] != 0; }))
            break;
          done[id] = 1;
          ++head[d];
          progressed = true;
        }
      }
    }
    for (std::size_t d = 0; d < s.per_device.size(); ++d) {
      if (head[d] >= s.per_device[d].size()) continue;
      const std::size_t id = s.per_device[d][head[d]];
      std::vector<TaskKey> keys{KeyOf(s.tasks[id])};
      for (std::size_t p : preds[id])
        if (!done[p]) keys.push_back(KeyOf(s.tasks[p]));
      out.push_back({ViolationKind::kDepOrder, keys, "cross-device ordering deadlocks on device " + std::to_string(d)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Randomized generator/validator check

struct FuzzSummary {
  std::uint64_t seed = 0;
  int trials = 0;
  int generated_valid = 0;
  int mutations = 0;
  int mutations_rejected = 0;
  std::vector<std::string> failures;  // "trial i: config ... : reason"

  bool ok() const { return failures.empty(); }
};

struct FuzzCase {
  Variant variant = Variant::kZeroPP;
  ModelSpec model;
  ParallelConfig parallel;
};

inline std::string DescribeCase(const FuzzCase& c) {
  std::ostringstream os;
  os << ToString(c.variant) << " L=" << c.model.num_layers << " P=" << c.parallel.pp_size
     << " V=" << c.parallel.stages_per_device << " B=" << c.parallel.microbatches << " U=" << c.parallel.unit_size
     << " D=" << c.parallel.dp_size << " mode=" << ToString(c.parallel.hybrid_mode)
     << " recompute=" << ToString(c.parallel.recompute);
  return os.str();
}

// Random valid configuration with P <= 8, V <= 4, B <= 32.
inline FuzzCase SampleFuzzCase(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  FuzzCase c;
  auto& p = c.parallel;
  p.pp_size = pick(1, 8);
  p.stages_per_device = pick(1, 4);
  p.unit_size = pick(1, 8);
  p.microbatches = p.unit_size * pick(1, 32 / p.unit_size);
  p.dp_size = pick(1, 8);
  p.inter_node_dp = pick(1, 4);
  p.hybrid_mode = pick(0, 1) ? HybridMode::kZero1Outer : HybridMode::kDpOuter;
  p.recompute = pick(0, 1) ? Recompute::kFull : Recompute::kNone;
  c.model.num_layers = p.pp_size * p.stages_per_device * pick(1, 2);
  c.model.hidden_size = 64;
  c.model.weight_mem_per_layer = 1;
  c.model.act_mem_per_layer_per_microbatch = 1;
  c.model.t_forward = pick(1, 3);
  c.model.t_input_grad = pick(1, 3);
  c.model.t_weight_grad = pick(1, 3);
  const int v = pick(0, 4);
  c.variant = static_cast<Variant>(v);
  if ((c.variant == Variant::kGpipe || c.variant == Variant::kOneFOneB) && p.stages_per_device != 1)
    c.variant = Variant::kInterleaved1F1B;
  if (c.variant == Variant::kInterleaved1F1B && p.stages_per_device > 1 && p.microbatches % p.pp_size != 0)
    c.variant = Variant::kZeroPP;
  return c;
}

// Moves `b` to just before `a` on their shared device.
inline Schedule InvertEdge(const Schedule& s, std::size_t a, std::size_t b) {
  Schedule out = s;
  auto& order = out.per_device[s.tasks[a].device];
  order.erase(std::find(order.begin(), order.end(), b));
  order.insert(std::find(order.begin(), order.end(), a), b);
  return out;
}

// Samples `trials` configurations, checks every generated schedule validates
// clean, then inverts one random same-device dependency per trial and checks
// the validator rejects it.
inline FuzzSummary FuzzCheck(std::uint64_t seed, int trials) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  FuzzSummary sum;
  sum.seed = seed;
  sum.trials = trials;
  for (int i = 0; i < trials; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    const FuzzCase c = SampleFuzzCase(rng);
    const std::string tag = "trial " + std::to_string(i) + " (" + DescribeCase(c) + ")";
    try {
      const Placement pl = MakePlacement(c.parallel, c.model);
      const Schedule s = GenerateSchedule(c.variant, c.model, c.parallel, pl);
      const auto violations = ValidateSchedule(s, pl, c.parallel);
      if (violations.empty()) {
        ++sum.generated_valid;
      } else {
        sum.failures.push_back(tag + ": generated schedule invalid: " + FormatViolation(violations.front()));
        continue;
      }
      // Order-independent edges only: data dependencies and gather->user.
      std::vector<Edge> candidates;
      for (const auto& [a, b] : s.edges) {
        const Task& ta = s.tasks[a];
        const Task& tb = s.tasks[b];
        if (ta.device != tb.device || !IsStageCompute(tb.kind)) continue;
        if (IsStageCompute(ta.kind) || ta.kind == TaskKind::kAgParam) candidates.emplace_back(a, b);
      }
      if (candidates.empty()) continue;
      const auto [a, b] = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
      ++sum.mutations;
      const Schedule mutated = InvertEdge(s, a, b);
      if (!ValidateSchedule(mutated, pl, c.parallel).empty()) {
        ++sum.mutations_rejected;
      } else {
        sum.failures.push_back(tag + ": mutation moving " + Describe(s.tasks[b]) + " before " +
                               Describe(s.tasks[a]) + " was accepted");
      }
    } catch (const std::exception& e) {
      sum.failures.push_back(tag + ": " + e.what());
    }
  }
  return sum;
}

}  // namespace zeropp
