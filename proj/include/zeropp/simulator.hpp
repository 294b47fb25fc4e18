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
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeropp/core_model.hpp"
#include "zeropp/schedule.hpp"

namespace zeropp {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MemoryBreakdown {
  Bytes weight = 0;
  Bytes activation = 0;
  Bytes gradient = 0;
  Bytes optimizer = 0;
  Bytes total() const { return weight + activation + gradient + optimizer; }
};

struct MemSample {
  Time time = 0;
  Bytes bytes = 0;
};

struct SimResult {
  std::vector<Time> start;  // by task id
  std::vector<Time> end;
  Time makespan = 0;
  std::vector<Time> busy;  // compute stream, per device
  std::vector<Time> idle;  // makespan - busy
  std::vector<Bytes> peak_mem;
  std::vector<MemoryBreakdown> peak_components;  // each component's own maximum
  std::vector<MemoryBreakdown> persistent;       // shards and optimizer states
  std::vector<std::vector<MemSample>> mem_trace;
  std::vector<Bytes> comm_bytes_intra;
  std::vector<Bytes> comm_bytes_inter;
  bool uniform_task_costs = false;

  int num_devices() const { return static_cast<int>(busy.size()); }
};

namespace detail {

inline Time CollectiveDuration(const Task& t, const ModelSpec& m, const ParallelConfig& cfg,
                               const Placement& pl, const CommCostModel& costs) {
  if (CollectiveGroupSize(t.kind, cfg) <= 1) return 0;
  const Bytes bytes = CollectiveBytes(t.kind, m, cfg, pl);
  const double bw = IsInterNode(t.kind) ? costs.inter_node_bandwidth : costs.intra_node_bandwidth;
  return bytes / bw + costs.per_collective_latency;
}

enum class Component { kWeight, kActivation };

struct MemEvent {
  Time time;
  int order;  // frees (0) before allocations (1) at equal times
  Bytes delta;
  Component component;
};

}  // namespace detail

// Persistent per-device memory: parameter, gradient and optimizer shards.
inline MemoryBreakdown PersistentMemory(Variant v, const ModelSpec& m, const ParallelConfig& cfg,
                                        const Placement& pl) {
  const bool sharded = v == Variant::kZeroPP || v == Variant::kBfpp;
  const Bytes local = pl.layers_per_device() * m.weight_mem_per_layer;
  MemoryBreakdown out;
  out.weight = sharded ? local / cfg.dp_size : local;
  out.gradient = out.weight;
  out.optimizer = cfg.optimizer_state_multiplier * out.weight;
  if (sharded && cfg.hybrid_mode == HybridMode::kZero1Outer) out.optimizer /= cfg.inter_node_dp;
  return out;
}

// Executes each device's program order on a compute stream and a comm stream
// (one shared stream when overlap is disabled). A task starts once its
// stream predecessor and all DAG predecessors have finished.
//
// Memory rules:
//   - F allocates the stage's activations (a one-layer input slab instead on
//     recomputed stages); R allocates the full stage activations;
//     everything held for (stage, micro-batch) is freed when both B and W
//     (or the fused backward) have finished.
//   - An AG_PARAM allocates the gathered stage parameters unless that stage
//     is already resident; the buffer is released when the last task using
//     it finishes.
//   - Shards and optimizer states are resident for the whole run.
inline SimResult Simulate(const Schedule& s, const ModelSpec& m, const ParallelConfig& cfg,
                          const Placement& pl, const CommCostModel& costs) {
  const std::size_t n = s.tasks.size();
  const int P = s.num_devices();
  const bool fused = s.fused_backward();
  SimResult r;
  r.start.assign(n, 0);
  r.end.assign(n, 0);
  r.uniform_task_costs = m.t_forward == m.t_input_grad && m.t_input_grad == m.t_weight_grad;

  std::vector<Time> duration(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Task& t = s.tasks[i];
    duration[i] = IsCollective(t.kind) ? detail::CollectiveDuration(t, m, cfg, pl, costs)
                                       : TaskCost(t, m, pl, fused);
  }

  std::vector<std::vector<std::size_t>> preds(n);
  for (const auto& [a, b] : s.edges) preds[b].push_back(a);

  // Streams in deterministic (device, compute-before-comm) order.
  std::vector<std::vector<std::size_t>> streams;
  for (int d = 0; d < P; ++d) {
    if (costs.overlap_with_compute) {
      std::vector<std::size_t> compute, comm;
      for (std::size_t id : s.per_device[d]) (RunsOnComputeStream(s.tasks[id].kind) ? compute : comm).push_back(id);
      streams.push_back(std::move(compute));
      streams.push_back(std::move(comm));
    } else {
      streams.push_back(s.per_device[d]);
    }
  }

  std::vector<char> finished(n, 0);
  std::vector<std::size_t> head(streams.size(), 0);
  std::vector<Time> stream_free(streams.size(), 0);
  std::size_t remaining = n;
  bool progressed = true;
  while (remaining > 0 && progressed) {
    progressed = false;
    for (std::size_t k = 0; k < streams.size(); ++k) {
      while (head[k] < streams[k].size()) {
        const std::size_t id = streams[k][head[k]];
        Time ready = stream_free[k];
        bool ok = true;
        for (std::size_t p : preds[id]) {
          if (!finished[p]) {
            ok = false;
            break;
          }
          ready = std::max(ready, r.end[p]);
        }
        if (!ok) break;
        r.start[id] = ready;
        r.end[id] = ready + duration[id];
        stream_free[k] = r.end[id];
        finished[id] = 1;
        ++head[k];
        --remaining;
        progressed = true;
      }
    }
  }
  if (remaining > 0) {
    std::ostringstream os;
    os << "deadlock: " << remaining << " tasks cannot run; blocked frontier:";
    for (std::size_t k = 0; k < streams.size(); ++k) {
      if (head[k] < streams[k].size()) {
        const Task& t = s.tasks[streams[k][head[k]]];
        os << " [device " << t.device << ": " << Describe(t) << "]";
      }
    }
    throw SimulationError(os.str());
  }

  r.makespan = 0;
  for (std::size_t i = 0; i < n; ++i) r.makespan = std::max(r.makespan, r.end[i]);
  r.busy.assign(P, 0);
  r.comm_bytes_intra.assign(P, 0);
  r.comm_bytes_inter.assign(P, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Task& t = s.tasks[i];
    if (RunsOnComputeStream(t.kind)) {
      r.busy[t.device] += duration[i];
    } else {
      const Bytes bytes = CollectiveGroupSize(t.kind, cfg) > 1 ? CollectiveBytes(t.kind, m, cfg, pl) : 0;
      (IsInterNode(t.kind) ? r.comm_bytes_inter : r.comm_bytes_intra)[t.device] += bytes;
    }
  }
  r.idle.resize(P);
  for (int d = 0; d < P; ++d) r.idle[d] = r.makespan - r.busy[d];

  // Memory events.
  const Bytes stage_params = pl.layers_per_stage() * m.weight_mem_per_layer;
  const Bytes stage_acts = pl.layers_per_stage() * m.act_mem_per_layer_per_microbatch;
  const Bytes slab = m.act_mem_per_layer_per_microbatch;
  std::vector<std::vector<detail::MemEvent>> events(P);
  using Pair = std::pair<int, int>;
  std::map<Pair, std::size_t> recompute_task;
  std::map<Pair, Bytes> held;
  std::map<Pair, Time> released_at;
  for (std::size_t i = 0; i < n; ++i)
    if (s.tasks[i].kind == TaskKind::kR) recompute_task[{s.tasks[i].stage, s.tasks[i].microbatch}] = i;

  for (std::size_t i = 0; i < n; ++i) {
    const Task& t = s.tasks[i];
    const Pair key{t.stage, t.microbatch};
    switch (t.kind) {
      case TaskKind::kF: {
        const Bytes a = recompute_task.count(key) ? slab : stage_acts;
        events[t.device].push_back({r.start[i], 1, a, detail::Component::kActivation});
        held[key] += a;
        break;
      }
      case TaskKind::kR:
        events[t.device].push_back({r.start[i], 1, stage_acts, detail::Component::kActivation});
        held[key] += stage_acts;
        break;
      case TaskKind::kB:
      case TaskKind::kW:
        released_at[key] = std::max(released_at[key], r.end[i]);
        break;
      default: break;
    }
  }
  for (const auto& [key, bytes] : held) {
    auto it = released_at.find(key);
    if (it == released_at.end()) continue;  // never freed: stays in the trace
    const int device = pl.device_of(key.first);
    events[device].push_back({it->second, 0, -bytes, detail::Component::kActivation});
  }

  // Gathered parameter residency intervals per (device, stage), merged.
  for (int d = 0; d < P; ++d) {
    std::map<int, std::vector<std::pair<Time, Time>>> intervals;
    for (std::size_t g : s.per_device[d]) {
      const Task& t = s.tasks[g];
      if (t.kind != TaskKind::kAgParam) continue;
      Time last_use = r.end[g];
      for (std::size_t u : s.per_device[d]) {
        const Task& x = s.tasks[u];
        if (x.stage != t.stage || x.unit != t.unit) continue;
        const bool user = t.gather == 0 ? x.kind == TaskKind::kF
                                        : (x.kind == TaskKind::kB || x.kind == TaskKind::kR);
        if (user) last_use = std::max(last_use, r.end[u]);
      }
      intervals[t.stage].emplace_back(r.start[g], last_use);
    }
    for (auto& [stage, iv] : intervals) {
      std::sort(iv.begin(), iv.end());
      Time lo = iv.front().first, hi = iv.front().second;
      auto flush = [&] {
        events[d].push_back({lo, 1, stage_params, detail::Component::kWeight});
        events[d].push_back({hi, 0, -stage_params, detail::Component::kWeight});
      };
      for (std::size_t k = 1; k < iv.size(); ++k) {
        if (iv[k].first < hi) {
          hi = std::max(hi, iv[k].second);
        } else {
          flush();
          lo = iv[k].first;
          hi = iv[k].second;
        }
      }
      flush();
    }
  }

  r.persistent.assign(P, PersistentMemory(s.variant, m, cfg, pl));
  r.peak_mem.assign(P, 0);
  r.peak_components.resize(P);
  r.mem_trace.resize(P);
  for (int d = 0; d < P; ++d) {
    auto& ev = events[d];
    std::stable_sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
      return std::tie(a.time, a.order) < std::tie(b.time, b.order);
    });
    MemoryBreakdown cur = r.persistent[d];
    MemoryBreakdown peak = cur;
    auto& trace = r.mem_trace[d];
    trace.push_back({0, cur.total()});
    for (std::size_t k = 0; k < ev.size();) {
      const Time t = ev[k].time;
      for (; k < ev.size() && ev[k].time == t; ++k) {
        (ev[k].component == detail::Component::kWeight ? cur.weight : cur.activation) += ev[k].delta;
      }
      peak.weight = std::max(peak.weight, cur.weight);
      peak.activation = std::max(peak.activation, cur.activation);
      if (trace.back().time == t) trace.back().bytes = cur.total();
      else trace.push_back({t, cur.total()});
    }
    r.peak_components[d] = peak;
    for (const auto& sample : trace) r.peak_mem[d] = std::max(r.peak_mem[d], sample.bytes);
  }
  return r;
}

// Idle time per device in slots of `unit_task_time`; last entry is the max.
inline std::vector<double> BubbleCount(const SimResult& r, Time unit_task_time) {
  if (!r.uniform_task_costs)
    throw std::invalid_argument("bubble slots are only defined for uniform F/B/W costs");
  if (!(unit_task_time > 0)) throw std::invalid_argument("unit_task_time must be > 0");
  std::vector<double> out;
  double worst = 0;
  for (Time idle : r.idle) {
    out.push_back(idle / unit_task_time);
    worst = std::max(worst, out.back());
  }
  out.push_back(worst);
  return out;
}

// Cost of one stage-level F/B/W task under uniform per-layer costs.
inline Time StageSlotTime(const ModelSpec& m, const Placement& pl) {
  return m.t_forward * pl.layers_per_stage();
}

// Idle over busy compute time; the ratio Table-style bubble figures use.
inline double BubbleRatio(const SimResult& r, int device) {
  return r.busy[device] > 0 ? r.idle[device] / r.busy[device] : 0.0;
}

inline double MaxBubbleRatio(const SimResult& r) {
  double worst = 0;
  for (int d = 0; d < r.num_devices(); ++d) worst = std::max(worst, BubbleRatio(r, d));
  return worst;
}

struct PeakMemory {
  std::vector<Bytes> total;
  std::vector<MemoryBreakdown> components;
  MemoryBreakdown max_components;  // component-wise max over devices
};

inline PeakMemory PeakMemoryOf(const SimResult& r) {
  PeakMemory out{r.peak_mem, r.peak_components, {}};
  for (const auto& c : r.peak_components) {
    out.max_components.weight = std::max(out.max_components.weight, c.weight);
    out.max_components.activation = std::max(out.max_components.activation, c.activation);
    out.max_components.gradient = std::max(out.max_components.gradient, c.gradient);
    out.max_components.optimizer = std::max(out.max_components.optimizer, c.optimizer);
  }
  return out;
}

struct CommVolume {
  Bytes intra = 0;
  Bytes inter = 0;
};

inline std::vector<CommVolume> CommVolumeOf(const SimResult& r) {
  std::vector<CommVolume> out(r.num_devices());
  for (int d = 0; d < r.num_devices(); ++d) out[d] = {r.comm_bytes_intra[d], r.comm_bytes_inter[d]};
  return out;
}

inline std::string SimResultCsv(const SimResult& r) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "device,busy,idle,makespan,peak_mem_bytes,intra_bytes,inter_bytes\n";
  for (int d = 0; d < r.num_devices(); ++d) {
    os << d << ',' << r.busy[d] << ',' << r.idle[d] << ',' << r.makespan << ',' << r.peak_mem[d] << ','
       << r.comm_bytes_intra[d] << ',' << r.comm_bytes_inter[d] << '\n';
  }
  return os.str();
}

// Chrome trace-event document: one "X" event per task (tid 0 compute, 1 comm)
// and a memory counter per device.
inline nlohmann::json SimTraceJson(const Schedule& s, const SimResult& r) {
  nlohmann::json events = nlohmann::json::array();
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const Task& t = s.tasks[i];
    events.push_back({{"name", Describe(t)},
                      {"cat", ToString(t.kind)},
                      {"ph", "X"},
                      {"pid", t.device},
                      {"tid", RunsOnComputeStream(t.kind) ? 0 : 1},
                      {"ts", r.start[i]},
                      {"dur", r.end[i] - r.start[i]}});
  }
  for (int d = 0; d < r.num_devices(); ++d) {
    for (const auto& sample : r.mem_trace[d]) {
      events.push_back({{"name", "memory"},
                        {"ph", "C"},
                        {"pid", d},
                        {"ts", sample.time},
                        {"args", {{"bytes", sample.bytes}}}});
    }
  }
  return {{"traceEvents", events}, {"makespan", r.makespan}};
}

}  // namespace zeropp
