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

#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zeropp/core_model.hpp"
#include "zeropp/schedule.hpp"

namespace zeropp {

namespace detail {

inline std::size_t AddStageTask(Schedule& s, const ModelSpec& m, const Placement& pl, TaskKind kind,
                                int stage, int mb, int unit_size) {
  Task t;
  t.kind = kind;
  t.stage = stage;
  t.microbatch = mb;
  t.unit = mb / unit_size;
  t.device = pl.device_of(stage);
  t.cost = StageComputeCost(kind, m, pl.layers_per_stage(), s.fused_backward());
  return s.Add(t);
}

inline Schedule EmptySchedule(Variant v, const Placement& pl) {
  Schedule s;
  s.variant = v;
  s.per_device.resize(pl.num_devices());
  return s;
}

// Event-driven list scheduler that turns the three-process unit plan into a
// per-device program order. Only compute tasks and their data dependencies
// are modeled; collectives are free here.
class UnitListScheduler {
 public:
  UnitListScheduler(Schedule& s, const ModelSpec& m, const ParallelConfig& cfg, const Placement& pl)
      : s_(s), cfg_(cfg), pl_(pl) {
    const int U = cfg.unit_size;
    for (int st = 0; st < pl.num_stages(); ++st) {
      for (int mb = 0; mb < cfg.microbatches; ++mb) {
        f_.emplace(std::pair{st, mb}, AddStageTask(s, m, pl, TaskKind::kF, st, mb, U));
        b_.emplace(std::pair{st, mb}, AddStageTask(s, m, pl, TaskKind::kB, st, mb, U));
        w_.emplace(std::pair{st, mb}, AddStageTask(s, m, pl, TaskKind::kW, st, mb, U));
      }
    }
    preds_.resize(s.tasks.size());
    DagOptions opt;
    opt.unit_size = U;
    for (const auto& [a, b] : BuildDependencyEdges(pl, cfg, opt)) preds_[*s.Find(b)].push_back(*s.Find(a));
    done_.assign(s.tasks.size(), kNever);
    devices_.resize(pl.num_devices());
    for (int d = 0; d < pl.num_devices(); ++d) LoadUnit(d, 0);
  }

  void Run() {
    Time now = 0;
    std::size_t remaining = s_.tasks.size();
    while (remaining > 0) {
      bool progressed = true;
      while (progressed) {
        progressed = false;
        for (int d = 0; d < pl_.num_devices(); ++d) {
          Device& dev = devices_[d];
          if (dev.busy_until > now || dev.finished) continue;
          auto id = Pick(d, now);
          if (!id) continue;
          done_[*id] = now + s_.tasks[*id].cost;
          dev.busy_until = done_[*id];
          s_.per_device[d].push_back(*id);
          --remaining;
          progressed = true;
        }
      }
      if (remaining == 0) break;
      Time next = kNever;
      for (const Device& dev : devices_)
        if (dev.busy_until > now) next = std::min(next, dev.busy_until);
      if (next == kNever) throw std::logic_error("unit list scheduler stalled");
      now = next;
    }
  }

 private:
  static constexpr Time kNever = std::numeric_limits<Time>::infinity();

  struct Device {
    int unit = 0;
    bool finished = false;
    Time busy_until = 0;
    std::vector<std::size_t> forward;               // forward process, strict order
    std::size_t forward_pos = 0;
    std::vector<std::size_t> last_f, last_b, last_w;  // interleaved process pools
    std::vector<std::vector<std::size_t>> backward;  // backward process groups
    std::size_t backward_pos = 0;
    std::vector<std::size_t> group_rest;            // rest of the group in flight
  };

  bool Ready(std::size_t id, Time now) const {
    for (std::size_t p : preds_[id])
      if (done_[p] > now) return false;
    return true;
  }

  void LoadUnit(int d, int unit) {
    Device& dev = devices_[d];
    const int U = cfg_.unit_size;
    const int V = pl_.stages_per_device();
    dev.unit = unit;
    if (unit >= cfg_.num_units()) {
      dev.finished = true;
      return;
    }
    const int mb0 = unit * U;
    dev.forward.clear();
    dev.forward_pos = 0;
    for (int r = 0; r + 1 < V; ++r)
      for (int mb = mb0; mb < mb0 + U; ++mb) dev.forward.push_back(f_.at({pl_.stage_at(d, r), mb}));
    const int last = pl_.stage_at(d, V - 1);
    dev.last_f.clear();
    dev.last_b.clear();
    dev.last_w.clear();
    for (int mb = mb0; mb < mb0 + U; ++mb) {
      dev.last_f.push_back(f_.at({last, mb}));
      dev.last_b.push_back(b_.at({last, mb}));
      dev.last_w.push_back(w_.at({last, mb}));
    }
    dev.backward.clear();
    dev.backward_pos = 0;
    for (int r = V - 2; r >= 0; --r)
      for (int mb = mb0; mb < mb0 + U; ++mb)
        dev.backward.push_back({b_.at({pl_.stage_at(d, r), mb}), w_.at({pl_.stage_at(d, r), mb})});
  }

  // Removes and returns the first ready task of `pool`.
  std::optional<std::size_t> TakeOldestReady(std::vector<std::size_t>& pool, Time now) const {
    for (auto it = pool.begin(); it != pool.end(); ++it) {
      if (Ready(*it, now)) {
        std::size_t id = *it;
        pool.erase(it);
        return id;
      }
    }
    return std::nullopt;
  }

  std::optional<std::size_t> Pick(int d, Time now) {
    Device& dev = devices_[d];
    while (!dev.finished) {
      if (!dev.group_rest.empty()) {
        if (!Ready(dev.group_rest.front(), now)) return std::nullopt;
        std::size_t id = dev.group_rest.front();
        dev.group_rest.erase(dev.group_rest.begin());
        return id;
      }
      // Forward process: breadth-first F over the non-last stages.
      if (dev.forward_pos < dev.forward.size()) {
        if (!Ready(dev.forward[dev.forward_pos], now)) return std::nullopt;
        return dev.forward[dev.forward_pos++];
      }
      // Interleaved process on the last mapped stage: B, then F, then W into
      // otherwise idle slots.
      if (!dev.last_f.empty() || !dev.last_b.empty()) {
        if (auto id = TakeOldestReady(dev.last_b, now)) return id;
        if (auto id = TakeOldestReady(dev.last_f, now)) return id;
        return TakeOldestReady(dev.last_w, now);
      }
      // Backward process: B,W pairs breadth-first in reverse round order,
      // last-stage W fill the gaps, leftovers at the end.
      if (dev.backward_pos < dev.backward.size()) {
        const auto& group = dev.backward[dev.backward_pos];
        if (Ready(group.front(), now)) {
          ++dev.backward_pos;
          dev.group_rest.assign(group.begin() + 1, group.end());
          return group.front();
        }
        return TakeOldestReady(dev.last_w, now);
      }
      if (!dev.last_w.empty()) return TakeOldestReady(dev.last_w, now);
      LoadUnit(d, dev.unit + 1);
    }
    return std::nullopt;
  }

  Schedule& s_;
  const ParallelConfig& cfg_;
  const Placement& pl_;
  std::map<std::pair<int, int>, std::size_t> f_, b_, w_;
  std::vector<std::vector<std::size_t>> preds_;
  std::vector<Time> done_;
  std::vector<Device> devices_;
};

}  // namespace detail

// Inserts one R task right before each B of every non-last mapped stage.
// Returns the schedule unchanged (and a warning) when V = 1.
inline Schedule ApplyRecompute(const Schedule& sched, const ModelSpec& m, const ParallelConfig& cfg,
                               const Placement& pl, std::vector<std::string>* warnings = nullptr) {
  if (sched.variant != Variant::kZeroPP)
    throw ConfigError("recomputation is only defined for the zeropp schedule");
  if (pl.stages_per_device() == 1) {
    if (warnings) warnings->push_back("recompute requested with V=1: every stage is a last mapped stage, no R tasks emitted");
    return sched;
  }
  Schedule s = sched;
  StripToCompute(s);
  for (int d = 0; d < s.num_devices(); ++d) {
    std::vector<std::size_t> order;
    for (std::size_t id : s.per_device[d]) {
      const Task t = s.tasks[id];
      if (t.kind == TaskKind::kB && IsRecomputedStage(pl, t.stage) &&
          !s.Find({TaskKind::kR, t.stage, t.microbatch, t.unit, t.device, 0})) {
        Task r = t;
        r.kind = TaskKind::kR;
        r.cost = StageComputeCost(TaskKind::kR, m, pl.layers_per_stage(), false);
        order.push_back(s.Add(r));
      }
      order.push_back(id);
    }
    s.per_device[d] = std::move(order);
  }
  ParallelConfig with_recompute = cfg;
  with_recompute.recompute = Recompute::kFull;
  FinalizeSchedule(s, m, with_recompute, pl);
  return s;
}

// Unit-scheduled near-zero-bubble schedule. Within each scheduling unit every
// device runs
//   1. a forward process: F breadth-first over its non-last stages,
//   2. an interleaved process on its last mapped stage: B and F first, ready
//      W tasks only when neither is runnable,
//   3. a backward process: B,W pairs breadth-first over the non-last stages
//      in reverse order, with pending last-stage W tasks filling idle time
//      and any leftovers at the end.
inline Schedule GenZeroPP(const ModelSpec& m, const ParallelConfig& cfg, const Placement& pl,
                          std::vector<std::string>* warnings = nullptr) {
  Schedule s = detail::EmptySchedule(Variant::kZeroPP, pl);
  detail::UnitListScheduler(s, m, cfg, pl).Run();
  ParallelConfig plain = cfg;
  plain.recompute = Recompute::kNone;
  FinalizeSchedule(s, m, plain, pl);
  if (cfg.recompute == Recompute::kFull) return ApplyRecompute(s, m, cfg, pl, warnings);
  return s;
}

// Breadth-first looping schedule over the whole batch: all F of stage round
// 0, then round 1, ..., then fused backward rounds in reverse.
inline Schedule GenBfpp(const ModelSpec& m, const ParallelConfig& cfg, const Placement& pl) {
  Schedule s = detail::EmptySchedule(Variant::kBfpp, pl);
  const int V = pl.stages_per_device();
  const int B = cfg.microbatches;
  for (int d = 0; d < pl.num_devices(); ++d) {
    auto& order = s.per_device[d];
    for (int r = 0; r < V; ++r)
      for (int mb = 0; mb < B; ++mb)
        order.push_back(detail::AddStageTask(s, m, pl, TaskKind::kF, pl.stage_at(d, r), mb, B));
    for (int r = V - 1; r >= 0; --r)
      for (int mb = 0; mb < B; ++mb)
        order.push_back(detail::AddStageTask(s, m, pl, TaskKind::kB, pl.stage_at(d, r), mb, B));
  }
  FinalizeSchedule(s, m, cfg, pl);
  return s;
}

// GPipe, 1F1B and interleaved 1F1B with fused backward tasks and no sharded
// collectives.
inline Schedule GenBaseline(Variant v, const ModelSpec& m, const ParallelConfig& cfg,
                            const Placement& pl) {
  const int P = pl.num_devices();
  const int V = pl.stages_per_device();
  const int B = cfg.microbatches;
  if ((v == Variant::kGpipe || v == Variant::kOneFOneB) && V != 1)
    throw ConfigError(std::string(ToString(v)) + " requires stages_per_device = 1");
  if (v == Variant::kInterleaved1F1B && V > 1 && B % P != 0)
    throw ConfigError("interleaved_1f1b with V > 1 requires microbatches to be a multiple of pp_size");
  if (v != Variant::kGpipe && v != Variant::kOneFOneB && v != Variant::kInterleaved1F1B)
    throw ConfigError("not a baseline variant");

  Schedule s = detail::EmptySchedule(v, pl);
  auto fwd = [&](int stage, int mb) { return detail::AddStageTask(s, m, pl, TaskKind::kF, stage, mb, B); };
  auto bwd = [&](int stage, int mb) { return detail::AddStageTask(s, m, pl, TaskKind::kB, stage, mb, B); };

  for (int d = 0; d < P; ++d) {
    auto& order = s.per_device[d];
    if (v == Variant::kGpipe) {
      for (int mb = 0; mb < B; ++mb) order.push_back(fwd(d, mb));
      for (int mb = 0; mb < B; ++mb) order.push_back(bwd(d, mb));
      continue;
    }
    // Virtual micro-batch k of a device maps to (chunk, micro-batch) in
    // groups of P micro-batches per chunk.
    const int total = B * V;
    auto chunk_of = [&](int k, bool forward) {
      const int c = (k % (P * V)) / P;
      return forward ? c : V - 1 - c;
    };
    auto mb_of = [&](int k) { return (k / (P * V)) * P + k % P; };
    auto vfwd = [&](int k) {
      return V == 1 ? fwd(d, k) : fwd(pl.stage_at(d, chunk_of(k, true)), mb_of(k));
    };
    auto vbwd = [&](int k) {
      return V == 1 ? bwd(d, k) : bwd(pl.stage_at(d, chunk_of(k, false)), mb_of(k));
    };
    int warmup = V == 1 ? P - d - 1 : (P - d - 1) * 2 + (V - 1) * P;
    if (V > 1 && B == P) warmup = total;
    warmup = std::min(warmup, total);
    const int steady = total - warmup;
    for (int k = 0; k < warmup; ++k) order.push_back(vfwd(k));
    for (int i = 0; i < steady; ++i) {
      order.push_back(vfwd(warmup + i));
      order.push_back(vbwd(i));
    }
    for (int k = steady; k < total; ++k) order.push_back(vbwd(k));
  }
  FinalizeSchedule(s, m, cfg, pl);
  return s;
}

inline Schedule GenerateSchedule(Variant v, const ModelSpec& m, const ParallelConfig& cfg,
                                 const Placement& pl, std::vector<std::string>* warnings = nullptr) {
  switch (v) {
    case Variant::kZeroPP: return GenZeroPP(m, cfg, pl, warnings);
    case Variant::kBfpp: return GenBfpp(m, cfg, pl);
    default: return GenBaseline(v, m, cfg, pl);
  }
}

}  // namespace zeropp
