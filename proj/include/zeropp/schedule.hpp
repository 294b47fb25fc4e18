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
#include <compare>
#include <cstddef>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeropp/core_model.hpp"

namespace zeropp {

enum class TaskKind : std::uint8_t {
  kF,
  kB,
  kW,
  kR,
  kAgParam,
  kRsGrad,
  kArGrad,
  kAgParamInter,
  kRsGradInter,
  kOpt,
};

inline const char* ToString(TaskKind k) {
  switch (k) {
    case TaskKind::kF: return "F";
    case TaskKind::kB: return "B";
    case TaskKind::kW: return "W";
    case TaskKind::kR: return "R";
    case TaskKind::kAgParam: return "AG_PARAM";
    case TaskKind::kRsGrad: return "RS_GRAD";
    case TaskKind::kArGrad: return "AR_GRAD";
    case TaskKind::kAgParamInter: return "AG_PARAM_INTER";
    case TaskKind::kRsGradInter: return "RS_GRAD_INTER";
    case TaskKind::kOpt: return "OPT";
  }
  return "?";
}

inline std::optional<TaskKind> ParseTaskKind(std::string_view s) {
  for (auto k : {TaskKind::kF, TaskKind::kB, TaskKind::kW, TaskKind::kR, TaskKind::kAgParam,
                 TaskKind::kRsGrad, TaskKind::kArGrad, TaskKind::kAgParamInter,
                 TaskKind::kRsGradInter, TaskKind::kOpt}) {
    if (s == ToString(k)) return k;
  }
  return std::nullopt;
}

// F/B/W/R: per (stage, micro-batch) model computation.
inline bool IsStageCompute(TaskKind k) {
  return k == TaskKind::kF || k == TaskKind::kB || k == TaskKind::kW || k == TaskKind::kR;
}
inline bool IsCollective(TaskKind k) {
  return k == TaskKind::kAgParam || k == TaskKind::kRsGrad || k == TaskKind::kArGrad ||
         k == TaskKind::kAgParamInter || k == TaskKind::kRsGradInter;
}
inline bool RunsOnComputeStream(TaskKind k) { return !IsCollective(k); }
inline bool IsInterNode(TaskKind k) {
  return k == TaskKind::kArGrad || k == TaskKind::kAgParamInter || k == TaskKind::kRsGradInter;
}

enum class Variant { kZeroPP, kBfpp, kGpipe, kOneFOneB, kInterleaved1F1B };

inline const char* ToString(Variant v) {
  switch (v) {
    case Variant::kZeroPP: return "zeropp";
    case Variant::kBfpp: return "bfpp";
    case Variant::kGpipe: return "gpipe";
    case Variant::kOneFOneB: return "1f1b";
    case Variant::kInterleaved1F1B: return "interleaved_1f1b";
  }
  return "?";
}

inline std::optional<Variant> ParseVariant(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "zeropp") return Variant::kZeroPP;
  if (lower == "bfpp" || lower == "bf-pp") return Variant::kBfpp;
  if (lower == "gpipe") return Variant::kGpipe;
  if (lower == "1f1b" || lower == "one_f_one_b") return Variant::kOneFOneB;
  if (lower == "interleaved_1f1b" || lower == "interleaved") return Variant::kInterleaved1F1B;
  return std::nullopt;
}

// Baselines and BF-PP run B and W as one fused backward task.
inline bool FusedBackward(Variant v) { return v != Variant::kZeroPP; }

// Number of micro-batches per scheduling unit actually used by a variant.
inline int EffectiveUnitSize(Variant v, const ParallelConfig& cfg) {
  return v == Variant::kZeroPP ? cfg.unit_size : cfg.microbatches;
}

struct Task {
  TaskKind kind = TaskKind::kF;
  int stage = -1;       // -1 for per-device tasks (OPT, inter-node collectives)
  int microbatch = -1;  // -1 for collectives and OPT
  int unit = -1;
  int device = 0;
  int gather = 0;  // AG_PARAM only: 0 before forward, 1 before backward
  Time cost = 0;
  Bytes bytes = 0;
};

struct TaskKey {
  TaskKind kind = TaskKind::kF;
  int stage = -1;
  int microbatch = -1;
  int unit = -1;
  int device = 0;
  int gather = 0;
  auto operator<=>(const TaskKey&) const = default;
};

inline TaskKey KeyOf(const Task& t) {
  return {t.kind, t.stage, t.microbatch, t.unit, t.device, t.gather};
}

inline std::string Describe(const Task& t) {
  std::ostringstream os;
  os << ToString(t.kind);
  if (t.stage >= 0) os << "(s=" << t.stage;
  else os << "(d=" << t.device;
  if (t.microbatch >= 0) os << ",m=" << t.microbatch;
  if (t.unit >= 0) os << ",u=" << t.unit;
  if (t.kind == TaskKind::kAgParam) os << (t.gather == 0 ? ",fwd" : ",bwd");
  os << ")";
  return os.str();
}

inline std::string Describe(const TaskKey& k) {
  Task t;
  t.kind = k.kind;
  t.stage = k.stage;
  t.microbatch = k.microbatch;
  t.unit = k.unit;
  t.device = k.device;
  t.gather = k.gather;
  return Describe(t);
}

using Edge = std::pair<std::size_t, std::size_t>;  // (predecessor, successor)

// Per-device program order over a flat task table. Each device list holds
// both stream kinds; the simulator splits them into compute and comm streams.
struct Schedule {
  Variant variant = Variant::kZeroPP;
  std::vector<Task> tasks;
  std::vector<std::vector<std::size_t>> per_device;
  std::vector<Edge> edges;

  bool fused_backward() const { return FusedBackward(variant); }
  int num_devices() const { return static_cast<int>(per_device.size()); }

  std::size_t Add(const Task& t) {
    tasks.push_back(t);
    const std::size_t id = tasks.size() - 1;
    index_.emplace(KeyOf(t), id);
    return id;
  }

  std::optional<std::size_t> Find(const TaskKey& k) const {
    auto it = index_.find(k);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  void Reindex() {
    index_.clear();
    for (std::size_t i = 0; i < tasks.size(); ++i) index_.emplace(KeyOf(tasks[i]), i);
  }

  std::size_t CountKind(TaskKind k) const {
    return static_cast<std::size_t>(
        std::count_if(tasks.begin(), tasks.end(), [k](const Task& t) { return t.kind == k; }));
  }

  // Compute-stream tasks of `device` in program order.
  std::vector<std::size_t> ComputeOrder(int device) const {
    std::vector<std::size_t> out;
    for (std::size_t id : per_device[device])
      if (RunsOnComputeStream(tasks[id].kind)) out.push_back(id);
    return out;
  }

 private:
  std::map<TaskKey, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Task costs and collective sizes

inline Time StageComputeCost(TaskKind kind, const ModelSpec& m, int layers, bool fused) {
  switch (kind) {
    case TaskKind::kF:
    case TaskKind::kR: return m.t_forward * layers;
    case TaskKind::kB: return (fused ? m.t_input_grad + m.t_weight_grad : m.t_input_grad) * layers;
    case TaskKind::kW: return m.t_weight_grad * layers;
    default: return 0;
  }
}

inline Time TaskCost(const Task& t, const ModelSpec& m, const Placement& pl, bool fused) {
  if (IsStageCompute(t.kind)) return StageComputeCost(t.kind, m, pl.layers_per_stage(), fused);
  if (t.kind == TaskKind::kOpt) return m.t_optstep * pl.layers_per_device();
  return 0;
}

// Group size a collective runs over.
inline int CollectiveGroupSize(TaskKind k, const ParallelConfig& cfg) {
  if (k == TaskKind::kAgParam || k == TaskKind::kRsGrad) return cfg.dp_size;
  if (IsInterNode(k)) return cfg.inter_node_dp;
  return 1;
}

// Bytes a device sends for one collective under ring accounting:
// all-gather / reduce-scatter of N over n ranks cost (n-1)/n * N, all-reduce
// twice that.
inline Bytes CollectiveBytes(TaskKind k, const ModelSpec& m, const ParallelConfig& cfg,
                             const Placement& pl) {
  const int n = CollectiveGroupSize(k, cfg);
  const double frac = static_cast<double>(n - 1) / n;
  switch (k) {
    case TaskKind::kAgParam:
    case TaskKind::kRsGrad: return frac * pl.layers_per_stage() * m.weight_mem_per_layer;
    case TaskKind::kArGrad:
    case TaskKind::kRsGradInter:
    case TaskKind::kAgParamInter: {
      const double shard = pl.layers_per_device() * m.weight_mem_per_layer / cfg.dp_size;
      return (k == TaskKind::kArGrad ? 2.0 : 1.0) * frac * shard;
    }
    default: return 0;
  }
}

// ---------------------------------------------------------------------------
// Dependency DAG

struct DagOptions {
  bool fused_backward = false;
  bool recompute = false;
  int unit_size = 1;
};

inline DagOptions DagOptionsFor(Variant v, const ParallelConfig& cfg) {
  DagOptions o;
  o.fused_backward = FusedBackward(v);
  o.recompute = v == Variant::kZeroPP && cfg.recompute == Recompute::kFull;
  o.unit_size = EffectiveUnitSize(v, cfg);
  return o;
}

// Stages that carry R tasks: every stage except the device's last mapped one.
inline bool IsRecomputedStage(const Placement& pl, int stage) { return !pl.is_last_round(stage); }

inline TaskKey StageKey(TaskKind k, const Placement& pl, int stage, int mb, int unit_size) {
  return {k, stage, mb, mb / unit_size, pl.device_of(stage), 0};
}

// Data dependencies among F/B/W/R tasks for every (stage, micro-batch).
inline std::vector<std::pair<TaskKey, TaskKey>> BuildDependencyEdges(const Placement& pl,
                                                                     const ParallelConfig& cfg,
                                                                     const DagOptions& opt) {
  std::vector<std::pair<TaskKey, TaskKey>> out;
  const int last = pl.num_stages() - 1;
  auto key = [&](TaskKind k, int s, int m) { return StageKey(k, pl, s, m, opt.unit_size); };
  for (int m = 0; m < cfg.microbatches; ++m) {
    for (int s = 0; s <= last; ++s) {
      if (s > 0) out.emplace_back(key(TaskKind::kF, s - 1, m), key(TaskKind::kF, s, m));
      const TaskKey grad_src =
          s == last ? key(TaskKind::kF, last, m) : key(TaskKind::kB, s + 1, m);
      out.emplace_back(grad_src, key(TaskKind::kB, s, m));
      if (!opt.fused_backward) out.emplace_back(grad_src, key(TaskKind::kW, s, m));
      if (opt.recompute && !opt.fused_backward && IsRecomputedStage(pl, s)) {
        out.emplace_back(key(TaskKind::kF, s, m), key(TaskKind::kR, s, m));
        out.emplace_back(key(TaskKind::kR, s, m), key(TaskKind::kB, s, m));
        out.emplace_back(key(TaskKind::kR, s, m), key(TaskKind::kW, s, m));
      }
    }
  }
  return out;
}

inline std::vector<std::pair<TaskKey, TaskKey>> BuildDependencyEdges(const Placement& pl,
                                                                     const ParallelConfig& cfg) {
  return BuildDependencyEdges(pl, cfg, DagOptionsFor(Variant::kZeroPP, cfg));
}

namespace detail {

// Keys of every stage-compute task a variant must contain.
inline std::vector<TaskKey> ExpectedComputeKeys(const Placement& pl, const ParallelConfig& cfg,
                                                const DagOptions& opt) {
  std::vector<TaskKey> out;
  for (int s = 0; s < pl.num_stages(); ++s) {
    for (int m = 0; m < cfg.microbatches; ++m) {
      out.push_back(StageKey(TaskKind::kF, pl, s, m, opt.unit_size));
      out.push_back(StageKey(TaskKind::kB, pl, s, m, opt.unit_size));
      if (!opt.fused_backward) out.push_back(StageKey(TaskKind::kW, pl, s, m, opt.unit_size));
      if (opt.recompute && !opt.fused_backward && IsRecomputedStage(pl, s))
        out.push_back(StageKey(TaskKind::kR, pl, s, m, opt.unit_size));
    }
  }
  return out;
}

}  // namespace detail

// Edges touching collectives and OPT, derived from each device's program
// order:
//   - an AG_PARAM precedes every F (forward gather) or B/R (backward gather)
//     of its stage and unit;
//   - a gather of a different stage than the previous gather waits until the
//     previous stage's last user finished, so at most one gathered stage is
//     resident per device;
//   - RS_GRAD follows every weight-gradient task of its stage and unit;
//   - inter-node collectives follow all RS_GRAD; OPT follows those; the
//     inter-node parameter all-gather follows OPT.
inline std::vector<Edge> BuildCommEdges(const Schedule& s) {
  std::vector<Edge> out;
  const TaskKind weight_grad = s.fused_backward() ? TaskKind::kB : TaskKind::kW;
  for (int d = 0; d < s.num_devices(); ++d) {
    const auto& order = s.per_device[d];
    std::map<std::size_t, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;

    auto users_of = [&](const Task& g) {
      std::vector<std::size_t> users;
      for (std::size_t id : order) {
        const Task& t = s.tasks[id];
        if (t.stage != g.stage || t.unit != g.unit) continue;
        const bool fwd_user = t.kind == TaskKind::kF;
        const bool bwd_user = t.kind == TaskKind::kB || t.kind == TaskKind::kR;
        if ((g.gather == 0 && fwd_user) || (g.gather == 1 && bwd_user)) users.push_back(id);
      }
      return users;
    };

    std::vector<std::size_t> rs_tasks;
    std::vector<std::size_t> run;  // consecutive gathers of one stage
    std::vector<std::size_t> run_last_users;
    std::optional<std::size_t> opt_task, ar_task, rs_inter_task, ag_inter_task;

    for (std::size_t id : order) {
      const Task& t = s.tasks[id];
      switch (t.kind) {
        case TaskKind::kAgParam: {
          auto users = users_of(t);
          for (std::size_t u : users) out.emplace_back(id, u);
          if (!run.empty() && s.tasks[run.front()].stage != t.stage) {
            for (std::size_t lu : run_last_users) out.emplace_back(lu, id);
            run.clear();
            run_last_users.clear();
          }
          run.push_back(id);
          if (!users.empty()) {
            run_last_users.push_back(*std::max_element(
                users.begin(), users.end(), [&](auto a, auto b) { return pos[a] < pos[b]; }));
          }
          break;
        }
        case TaskKind::kRsGrad: {
          rs_tasks.push_back(id);
          for (std::size_t o : order) {
            const Task& w = s.tasks[o];
            if (w.kind == weight_grad && w.stage == t.stage && w.unit == t.unit) out.emplace_back(o, id);
          }
          break;
        }
        case TaskKind::kArGrad: ar_task = id; break;
        case TaskKind::kRsGradInter: rs_inter_task = id; break;
        case TaskKind::kAgParamInter: ag_inter_task = id; break;
        case TaskKind::kOpt: opt_task = id; break;
        default: break;
      }
    }
    for (auto inter : {ar_task, rs_inter_task}) {
      if (!inter) continue;
      for (std::size_t rs : rs_tasks) out.emplace_back(rs, *inter);
      if (opt_task) out.emplace_back(*inter, *opt_task);
    }
    if (opt_task) {
      for (std::size_t rs : rs_tasks) out.emplace_back(rs, *opt_task);
      if (rs_tasks.empty()) {
        for (std::size_t o : order) {
          const Task& w = s.tasks[o];
          if (w.kind == weight_grad || (s.fused_backward() && w.kind == TaskKind::kW))
            out.emplace_back(o, *opt_task);
        }
      }
      if (ag_inter_task) out.emplace_back(*opt_task, *ag_inter_task);
    }
  }
  return out;
}

// Full edge set of a schedule: compute data dependencies (restricted to tasks
// present in the schedule) plus collective/OPT edges.
inline std::vector<Edge> BuildScheduleEdges(const Schedule& s, const Placement& pl,
                                            const ParallelConfig& cfg) {
  std::vector<Edge> out;
  for (const auto& [a, b] : BuildDependencyEdges(pl, cfg, DagOptionsFor(s.variant, cfg))) {
    auto ia = s.Find(a);
    auto ib = s.Find(b);
    if (ia && ib) out.emplace_back(*ia, *ib);
  }
  auto comm = BuildCommEdges(s);
  out.insert(out.end(), comm.begin(), comm.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Takes per-device lists holding only stage-compute tasks and adds the
// collectives (sharded variants), the per-device tail (inter-node gradient
// synchronization, OPT) and the edge set.
//
// Anchoring: the forward gather of (stage, unit) sits right before the
// stage's first F in that unit, the backward gather right before its first B
// or R, and the reduce-scatter right after its last weight-gradient task.
inline void FinalizeSchedule(Schedule& s, const ModelSpec& m, const ParallelConfig& cfg,
                             const Placement& pl) {
  const bool sharded = s.variant == Variant::kZeroPP || s.variant == Variant::kBfpp;
  const bool fused = s.fused_backward();
  const TaskKind weight_grad = fused ? TaskKind::kB : TaskKind::kW;
  const int last_unit = cfg.microbatches / EffectiveUnitSize(s.variant, cfg) - 1;

  auto make_comm = [&](TaskKind k, int stage, int unit, int device, int gather) {
    Task t;
    t.kind = k;
    t.stage = stage;
    t.unit = unit;
    t.device = device;
    t.gather = gather;
    t.bytes = CollectiveBytes(k, m, cfg, pl);
    return t;
  };

  for (int d = 0; d < s.num_devices(); ++d) {
    const std::vector<std::size_t> compute = s.per_device[d];
    std::vector<std::size_t> merged;
    merged.reserve(compute.size() * 2);
    if (sharded) {
      using SU = std::pair<int, int>;
      std::map<SU, std::size_t> first_f, first_bwd, last_wgrad;
      for (std::size_t i = 0; i < compute.size(); ++i) {
        const Task& t = s.tasks[compute[i]];
        const SU su{t.stage, t.unit};
        if (t.kind == TaskKind::kF) first_f.try_emplace(su, i);
        if (t.kind == TaskKind::kB || t.kind == TaskKind::kR) first_bwd.try_emplace(su, i);
        if (t.kind == weight_grad) last_wgrad[su] = i;
      }
      std::multimap<std::size_t, Task> before, after;
      for (auto [su, i] : first_f) before.emplace(i, make_comm(TaskKind::kAgParam, su.first, su.second, d, 0));
      for (auto [su, i] : first_bwd) before.emplace(i, make_comm(TaskKind::kAgParam, su.first, su.second, d, 1));
      for (auto [su, i] : last_wgrad) after.emplace(i, make_comm(TaskKind::kRsGrad, su.first, su.second, d, 0));
      for (std::size_t i = 0; i < compute.size(); ++i) {
        auto [b0, b1] = before.equal_range(i);
        for (auto it = b0; it != b1; ++it) merged.push_back(s.Add(it->second));
        merged.push_back(compute[i]);
        auto [a0, a1] = after.equal_range(i);
        for (auto it = a0; it != a1; ++it) merged.push_back(s.Add(it->second));
      }
      const TaskKind inter =
          cfg.hybrid_mode == HybridMode::kDpOuter ? TaskKind::kArGrad : TaskKind::kRsGradInter;
      merged.push_back(s.Add(make_comm(inter, -1, last_unit, d, 0)));
    } else {
      merged = compute;
    }
    Task opt;
    opt.kind = TaskKind::kOpt;
    opt.device = d;
    opt.cost = m.t_optstep * pl.layers_per_device();
    merged.push_back(s.Add(opt));
    if (sharded && cfg.hybrid_mode == HybridMode::kZero1Outer)
      merged.push_back(s.Add(make_comm(TaskKind::kAgParamInter, -1, last_unit, d, 0)));
    s.per_device[d] = std::move(merged);
  }
  s.edges = BuildScheduleEdges(s, pl, cfg);
}

// Drops collectives, OPT and edges, leaving per-device stage-compute order.
inline void StripToCompute(Schedule& s) {
  Schedule out;
  out.variant = s.variant;
  out.per_device.resize(s.per_device.size());
  for (int d = 0; d < s.num_devices(); ++d) {
    for (std::size_t id : s.per_device[d]) {
      if (IsStageCompute(s.tasks[id].kind)) out.per_device[d].push_back(out.Add(s.tasks[id]));
    }
  }
  s = std::move(out);
}

// ---------------------------------------------------------------------------
// Text and JSON exchange

// Header values the validator needs to rebuild the DAG of a schedule file.
struct ScheduleHeader {
  Variant variant = Variant::kZeroPP;
  std::optional<ParallelConfig> parallel;
  std::optional<int> num_layers;
};

namespace detail {

inline std::string FieldOrDash(int v) { return v < 0 ? "-" : std::to_string(v); }

inline std::string FormatTime(double t) {
  std::ostringstream os;
  os << std::setprecision(12) << t;
  return os.str();
}

}  // namespace detail

// One task per line: `device kind stage microbatch unit start_slot`, grouped
// by device in program order. Absent fields are '-'. `start` (optional) is
// indexed by task id.
inline std::string ExportScheduleText(const Schedule& s, const ParallelConfig& cfg, int num_layers,
                                      const std::vector<Time>* start = nullptr) {
  std::ostringstream os;
  os << "# zeropp-schedule v1\n";
  os << "# variant " << ToString(s.variant) << "\n";
  os << "# config num_layers=" << num_layers << " pp_size=" << cfg.pp_size
     << " dp_size=" << cfg.dp_size << " stages_per_device=" << cfg.stages_per_device
     << " microbatches=" << cfg.microbatches << " unit_size=" << cfg.unit_size
     << " inter_node_dp=" << cfg.inter_node_dp << " hybrid_mode=" << ToString(cfg.hybrid_mode)
     << " recompute=" << ToString(cfg.recompute) << "\n";
  os << "# device kind stage microbatch unit start_slot\n";
  for (int d = 0; d < s.num_devices(); ++d) {
    for (std::size_t id : s.per_device[d]) {
      const Task& t = s.tasks[id];
      os << d << ' ' << ToString(t.kind) << ' ' << detail::FieldOrDash(t.stage) << ' '
         << detail::FieldOrDash(t.microbatch) << ' ' << detail::FieldOrDash(t.unit) << ' '
         << (start ? detail::FormatTime((*start)[id]) : std::string("-")) << '\n';
    }
  }
  return os.str();
}

struct ParsedSchedule {
  ScheduleHeader header;
  Schedule schedule;
};

// Parses ExportScheduleText output. Edges are not part of the text form; the
// caller rebuilds them. AG_PARAM gather direction is recovered from
// occurrence order (first per stage and unit is the forward gather).
inline ParsedSchedule ParseScheduleText(std::string_view text) {
  ParsedSchedule out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::map<std::tuple<int, int, int>, int> gathers_seen;
  auto to_int = [&](const std::string& f) -> int {
    if (f == "-") return -1;
    try {
      std::size_t used = 0;
      int v = std::stoi(f, &used);
      if (used != f.size()) throw std::invalid_argument(f);
      return v;
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) + ": bad integer field '" + f + "'");
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, tag;
      ls >> hash >> tag;
      if (tag == "variant") {
        std::string v;
        ls >> v;
        auto parsed = ParseVariant(v);
        if (!parsed) throw ParseError("unknown variant '" + v + "'");
        out.header.variant = *parsed;
        out.schedule.variant = *parsed;
      } else if (tag == "config") {
        ParallelConfig p;
        std::string kv;
        while (ls >> kv) {
          auto eq = kv.find('=');
          if (eq == std::string::npos) throw ParseError("bad config token '" + kv + "'");
          const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
          if (k == "num_layers") out.header.num_layers = to_int(v);
          else if (k == "pp_size") p.pp_size = to_int(v);
          else if (k == "dp_size") p.dp_size = to_int(v);
          else if (k == "stages_per_device") p.stages_per_device = to_int(v);
          else if (k == "microbatches") p.microbatches = to_int(v);
          else if (k == "unit_size") p.unit_size = to_int(v);
          else if (k == "inter_node_dp") p.inter_node_dp = to_int(v);
          else if (k == "hybrid_mode") p.hybrid_mode = ParseHybridMode(v);
          else if (k == "recompute") p.recompute = ParseRecompute(v);
        }
        out.header.parallel = p;
      }
      continue;
    }
    std::string f[6];
    for (auto& x : f) {
      if (!(ls >> x)) throw ParseError("line " + std::to_string(line_no) + ": expected 6 fields");
    }
    Task t;
    t.device = to_int(f[0]);
    auto kind = ParseTaskKind(f[1]);
    if (!kind) throw ParseError("line " + std::to_string(line_no) + ": unknown task kind '" + f[1] + "'");
    t.kind = *kind;
    t.stage = to_int(f[2]);
    t.microbatch = to_int(f[3]);
    t.unit = to_int(f[4]);
    if (t.device < 0) throw ParseError("line " + std::to_string(line_no) + ": device must be >= 0");
    if (t.kind == TaskKind::kAgParam) t.gather = gathers_seen[{t.device, t.stage, t.unit}]++ > 0 ? 1 : 0;
    auto& sched = out.schedule;
    if (static_cast<int>(sched.per_device.size()) <= t.device) sched.per_device.resize(t.device + 1);
    // Duplicate keys keep distinct ids; the validator reports them.
    sched.tasks.push_back(t);
    sched.per_device[t.device].push_back(sched.tasks.size() - 1);
  }
  out.schedule.Reindex();
  return out;
}

inline nlohmann::json ScheduleToJson(const Schedule& s) {
  nlohmann::json j;
  j["variant"] = ToString(s.variant);
  auto& tasks = j["tasks"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const Task& t = s.tasks[i];
    tasks.push_back({{"id", i},
                     {"kind", ToString(t.kind)},
                     {"device", t.device},
                     {"stage", t.stage},
                     {"microbatch", t.microbatch},
                     {"unit", t.unit},
                     {"gather", t.gather},
                     {"cost", t.cost},
                     {"bytes", t.bytes}});
  }
  j["per_device"] = s.per_device;
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : s.edges) edges.push_back({a, b});
  return j;
}

}  // namespace zeropp
