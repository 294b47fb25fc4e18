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
#include <future>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "zeropp/core_model.hpp"
#include "zeropp/schedule_gen.hpp"
#include "zeropp/simulator.hpp"
#include "zeropp/validator.hpp"

namespace zeropp {

struct SearchSpace {
  ModelSpec model;
  ParallelConfig base;  // fixes P, D, B, b, inter_node_dp, k
  CommCostModel costs;
  std::vector<int> unit_sizes;
  std::vector<int> stages_per_device;
  std::vector<Recompute> recompute = {Recompute::kNone, Recompute::kFull};
  std::vector<HybridMode> modes = {HybridMode::kDpOuter, HybridMode::kZero1Outer};
  Bytes memory_cap = std::numeric_limits<Bytes>::infinity();
};

inline std::vector<int> Divisors(int n) {
  std::vector<int> out;
  for (int i = 1; i <= n; ++i)
    if (n % i == 0) out.push_back(i);
  return out;
}

// U over the divisors of B, V over the divisors of L/P, both recompute
// settings and both hybrid modes.
inline SearchSpace DefaultSearchSpace(const Config& cfg, Bytes memory_cap) {
  SearchSpace sp;
  sp.model = cfg.model;
  sp.base = cfg.parallel;
  sp.costs = cfg.costs;
  sp.unit_sizes = Divisors(cfg.parallel.microbatches);
  sp.stages_per_device = Divisors(cfg.model.num_layers / cfg.parallel.pp_size);
  sp.memory_cap = memory_cap;
  return sp;
}

struct Candidate {
  int unit_size = 0;
  int stages_per_device = 0;
  Recompute recompute = Recompute::kNone;
  HybridMode mode = HybridMode::kDpOuter;
  Time time = 0;
  Bytes peak_mem = 0;
  bool feasible = false;
};

struct PlanResult {
  std::optional<Candidate> best;        // empty when nothing fits the cap
  std::optional<Candidate> min_memory;  // reported on infeasibility
  std::vector<Candidate> ranked;        // feasible first, then infeasible
  Bytes memory_cap = 0;
};

inline Candidate EvaluateCandidate(const SearchSpace& sp, int u, int v, Recompute rc, HybridMode mode) {
  ParallelConfig cfg = sp.base;
  cfg.unit_size = u;
  cfg.stages_per_device = v;
  cfg.recompute = rc;
  cfg.hybrid_mode = mode;
  const Placement pl = MakePlacement(cfg, sp.model);
  const Schedule s = GenZeroPP(sp.model, cfg, pl);
  const auto violations = ValidateSchedule(s, pl, cfg);
  if (!violations.empty()) throw std::logic_error("generated schedule invalid: " + FormatViolation(violations.front()));
  const SimResult r = Simulate(s, sp.model, cfg, pl, sp.costs);
  Candidate c{u, v, rc, mode, r.makespan, *std::max_element(r.peak_mem.begin(), r.peak_mem.end()), false};
  return c;
}

// Applies a memory cap to evaluated candidates: feasible ones ranked by
// (time, peak memory, U), then the infeasible ones in the same order.
inline PlanResult RankCandidates(std::vector<Candidate> all, Bytes memory_cap) {
  PlanResult out;
  out.memory_cap = memory_cap;
  for (auto& c : all) c.feasible = c.peak_mem <= memory_cap;
  std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    return std::tuple(!a.feasible, a.time, a.peak_mem, a.unit_size) <
           std::tuple(!b.feasible, b.time, b.peak_mem, b.unit_size);
  });
  for (const auto& c : all) {
    if (!out.min_memory || c.peak_mem < out.min_memory->peak_mem) out.min_memory = c;
  }
  if (!all.empty() && all.front().feasible) out.best = all.front();
  out.ranked = std::move(all);
  return out;
}

// Evaluates the full candidate product (in parallel, merged by index).
inline std::vector<Candidate> EvaluateSpace(const SearchSpace& sp) {
  struct Point {
    int u, v;
    Recompute rc;
    HybridMode mode;
  };
  std::vector<Point> points;
  for (int u : sp.unit_sizes)
    for (int v : sp.stages_per_device)
      for (Recompute rc : sp.recompute)
        for (HybridMode mode : sp.modes) points.push_back({u, v, rc, mode});
  if (points.empty()) throw ConfigError("search space has an empty candidate set");

  std::vector<Candidate> out(points.size());
  const std::size_t workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < points.size(); i += workers) {
        const Point& p = points[i];
        out[i] = EvaluateCandidate(sp, p.u, p.v, p.rc, p.mode);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

inline PlanResult Search(const SearchSpace& sp) { return RankCandidates(EvaluateSpace(sp), sp.memory_cap); }

inline std::string PlanCsv(const PlanResult& plan) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "U,V,recompute,mode,time,peak_mem,feasible\n";
  for (const auto& c : plan.ranked) {
    os << c.unit_size << ',' << c.stages_per_device << ',' << ToString(c.recompute) << ',' << ToString(c.mode)
       << ',' << c.time << ',' << c.peak_mem << ',' << (c.feasible ? "true" : "false") << '\n';
  }
  return os.str();
}

inline std::string PlanSummary(const PlanResult& plan) {
  std::ostringstream os;
  os << std::setprecision(6);
  const auto feasible = std::count_if(plan.ranked.begin(), plan.ranked.end(), [](auto& c) { return c.feasible; });
  os << "candidates: " << plan.ranked.size() << ", feasible: " << feasible << " (cap " << plan.memory_cap
     << " bytes)\n";
  if (plan.best) {
    const auto& b = *plan.best;
    os << "winner: U=" << b.unit_size << " V=" << b.stages_per_device << " recompute=" << ToString(b.recompute)
       << " mode=" << ToString(b.mode) << " time=" << b.time << " peak_mem=" << b.peak_mem << "\n";
  } else {
    os << "infeasible: no candidate fits the memory cap";
    if (plan.min_memory) {
      const auto& c = *plan.min_memory;
      os << "; min-memory candidate U=" << c.unit_size << " V=" << c.stages_per_device
         << " recompute=" << ToString(c.recompute) << " mode=" << ToString(c.mode) << " peak_mem=" << c.peak_mem;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace zeropp
