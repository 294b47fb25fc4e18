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

#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace zeropp {
namespace {

using testing::ComputeTrace;
using testing::Par;
using testing::UnitModel;

using KeyEdge = std::pair<TaskKey, TaskKey>;

TaskKey K(TaskKind k, int stage, int mb, const Placement& pl, int unit = 0) {
  return TaskKey{k, stage, mb, unit, pl.device_of(stage), 0};
}

bool HasEdge(const std::vector<KeyEdge>& edges, const TaskKey& from, const TaskKey& to) {
  return std::find(edges.begin(), edges.end(), KeyEdge{from, to}) != edges.end();
}

// Kahn's algorithm over arbitrary node ids.
template <typename Node>
bool IsAcyclic(const std::vector<std::pair<Node, Node>>& edges) {
  std::map<Node, int> indeg;
  std::map<Node, std::vector<Node>> out;
  for (const auto& [a, b] : edges) {
    indeg[a];
    ++indeg[b];
    out[a].push_back(b);
  }
  std::queue<Node> q;
  for (const auto& [n, d] : indeg)
    if (d == 0) q.push(n);
  std::size_t seen = 0;
  while (!q.empty()) {
    Node n = q.front();
    q.pop();
    ++seen;
    for (const Node& m : out[n])
      if (--indeg[m] == 0) q.push(m);
  }
  return seen == indeg.size();
}

TEST(BuildDependencyEdges, TwoStageExample) {
  const Placement pl(2, 1, 2);
  const auto e = BuildDependencyEdges(pl, Par(2, 1, 1, 1));
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kF, 0, 0, pl), K(TaskKind::kF, 1, 0, pl)));
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kB, 1, 0, pl), K(TaskKind::kB, 0, 0, pl)));
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kB, 1, 0, pl), K(TaskKind::kW, 0, 0, pl)));
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kF, 1, 0, pl), K(TaskKind::kB, 1, 0, pl)));
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kF, 1, 0, pl), K(TaskKind::kW, 1, 0, pl)));
  EXPECT_EQ(e.size(), 5u);
}

TEST(BuildDependencyEdges, SingleStageChain) {
  const Placement pl(1, 1, 1);
  const auto e = BuildDependencyEdges(pl, Par(1, 1, 1, 1));
  ASSERT_EQ(e.size(), 2u);
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kF, 0, 0, pl), K(TaskKind::kB, 0, 0, pl)));
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kF, 0, 0, pl), K(TaskKind::kW, 0, 0, pl)));
}

TEST(BuildDependencyEdges, RecomputeEdges) {
  const Placement pl(2, 2, 4);
  ParallelConfig c = Par(2, 2, 2, 2);
  c.recompute = Recompute::kFull;
  const auto e = BuildDependencyEdges(pl, c);
  // Stage 1 is recomputed (round 0); stage 3 is the last round.
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kF, 1, 0, pl), K(TaskKind::kR, 1, 0, pl)));
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kR, 1, 0, pl), K(TaskKind::kB, 1, 0, pl)));
  EXPECT_TRUE(HasEdge(e, K(TaskKind::kR, 1, 0, pl), K(TaskKind::kW, 1, 0, pl)));
  for (const auto& [a, b] : e) {
    EXPECT_FALSE(a.kind == TaskKind::kR && a.stage >= 2);
    EXPECT_FALSE(b.kind == TaskKind::kR && b.stage >= 2);
  }
}

TEST(BuildDependencyEdges, AcyclicAcrossConfigs) {
  for (int p : {1, 2, 4})
    for (int v : {1, 2, 3})
      for (int b : {1, 3, 4})
        for (bool fused : {false, true})
          for (Recompute rc : {Recompute::kNone, Recompute::kFull}) {
            const Placement pl(p, v, p * v);
            ParallelConfig c = Par(p, v, b, b);
            c.recompute = rc;
            DagOptions opt{fused, rc == Recompute::kFull && !fused, b};
            EXPECT_TRUE(IsAcyclic(BuildDependencyEdges(pl, c, opt)));
          }
}

TEST(GenZeroPP, FullScheduleEdgesAcyclic) {
  const ModelSpec m = UnitModel(8);
  for (HybridMode mode : {HybridMode::kDpOuter, HybridMode::kZero1Outer})
    for (Recompute rc : {Recompute::kNone, Recompute::kFull}) {
      ParallelConfig c = Par(2, 2, 4, 2, 4);
      c.hybrid_mode = mode;
      c.recompute = rc;
      c.inter_node_dp = 2;
      const Placement pl = MakePlacement(c, m);
      EXPECT_TRUE(IsAcyclic(GenZeroPP(m, c, pl).edges));
    }
}

TEST(GenZeroPP, OneUnitGathersTwiceScattersOnce) {
  const ModelSpec m = UnitModel(8);
  const ParallelConfig c = Par(4, 2, 8, 8, 8);
  const Placement pl = MakePlacement(c, m);
  const Schedule s = GenZeroPP(m, c, pl);
  std::map<int, int> ag, rs;
  for (const Task& t : s.tasks) {
    if (t.kind == TaskKind::kAgParam) ++ag[t.stage];
    if (t.kind == TaskKind::kRsGrad) ++rs[t.stage];
  }
  for (int st = 0; st < pl.num_stages(); ++st) {
    EXPECT_EQ(ag[st], 2) << "stage " << st;
    EXPECT_EQ(rs[st], 1) << "stage " << st;
  }
}

TEST(GenZeroPP, SingleDeviceOrder) {
  const ModelSpec m = UnitModel(2);
  const ParallelConfig c = Par(1, 1, 1, 1);
  const Schedule s = GenZeroPP(m, c, MakePlacement(c, m));
  std::vector<TaskKind> kinds;
  for (std::size_t id : s.per_device[0]) kinds.push_back(s.tasks[id].kind);
  const std::vector<TaskKind> expected = {TaskKind::kAgParam, TaskKind::kF,      TaskKind::kAgParam,
                                          TaskKind::kB,       TaskKind::kW,      TaskKind::kRsGrad,
                                          TaskKind::kArGrad,  TaskKind::kOpt};
  EXPECT_EQ(kinds, expected);
}

TEST(GenZeroPP, TaskCountsTwoUnits) {
  const ModelSpec m = UnitModel(4);
  const ParallelConfig c = Par(2, 2, 4, 2, 4);
  const Schedule s = GenZeroPP(m, c, MakePlacement(c, m));
  EXPECT_EQ(s.CountKind(TaskKind::kF), 2u * 8);
  EXPECT_EQ(s.CountKind(TaskKind::kB), 2u * 8);
  EXPECT_EQ(s.CountKind(TaskKind::kW), 2u * 8);
  EXPECT_EQ(s.CountKind(TaskKind::kAgParam), 2u * 4 * 2);
  EXPECT_EQ(s.CountKind(TaskKind::kRsGrad), 2u * 4);
  EXPECT_EQ(s.CountKind(TaskKind::kArGrad), 2u);  // one per device
  EXPECT_EQ(s.CountKind(TaskKind::kOpt), 2u);
  EXPECT_EQ(s.CountKind(TaskKind::kR), 0u);
}

TEST(GenZeroPP, IntraCollectivesPerStageScaleWithUnits) {
  const ModelSpec m = UnitModel(8);
  for (int u : {1, 2, 4, 8}) {
    const ParallelConfig c = Par(2, 2, 8, u, 4);
    const Placement pl = MakePlacement(c, m);
    const Schedule s = GenZeroPP(m, c, pl);
    std::map<int, int> per_stage;
    for (const Task& t : s.tasks)
      if (t.kind == TaskKind::kAgParam || t.kind == TaskKind::kRsGrad) ++per_stage[t.stage];
    for (int st = 0; st < pl.num_stages(); ++st) EXPECT_EQ(per_stage[st], 3 * (8 / u));
  }
}

TEST(GenZeroPP, UnitsAreSequentialPerDevice) {
  const ModelSpec m = UnitModel(8);
  const ParallelConfig c = Par(4, 2, 8, 2, 8);
  const Schedule s = GenZeroPP(m, c, MakePlacement(c, m));
  for (int d = 0; d < 4; ++d) {
    int unit = 0;
    for (std::size_t id : s.ComputeOrder(d)) {
      const Task& t = s.tasks[id];
      if (t.kind == TaskKind::kOpt) continue;
      EXPECT_GE(t.unit, unit);
      unit = t.unit;
    }
  }
}

TEST(GenZeroPP, ForwardProcessBreadthFirst) {
  // Before the last round starts, each device runs all U forwards of a round
  // consecutively.
  const ModelSpec m = UnitModel(12);
  const ParallelConfig c = Par(2, 3, 4, 4);
  const Placement pl = MakePlacement(c, m);
  const Schedule s = GenZeroPP(m, c, pl);
  for (int d = 0; d < 2; ++d) {
    const auto order = s.ComputeOrder(d);
    for (int r = 0; r < 2; ++r)
      for (int mb = 0; mb < 4; ++mb) {
        const Task& t = s.tasks[order[r * 4 + mb]];
        EXPECT_EQ(t.kind, TaskKind::kF);
        EXPECT_EQ(t.stage, pl.stage_at(d, r));
        EXPECT_EQ(t.microbatch, mb);
      }
  }
}

TEST(GenZeroPP, ZeroOneOuterTail) {
  const ModelSpec m = UnitModel(4);
  ParallelConfig c = Par(2, 2, 4, 2, 4);
  c.hybrid_mode = HybridMode::kZero1Outer;
  c.inter_node_dp = 2;
  const Schedule s = GenZeroPP(m, c, MakePlacement(c, m));
  EXPECT_EQ(s.CountKind(TaskKind::kArGrad), 0u);
  for (int d = 0; d < 2; ++d) {
    std::vector<TaskKind> tail;
    for (std::size_t id : s.per_device[d]) {
      const TaskKind k = s.tasks[id].kind;
      if (k == TaskKind::kRsGradInter || k == TaskKind::kOpt || k == TaskKind::kAgParamInter) tail.push_back(k);
    }
    EXPECT_EQ(tail, (std::vector<TaskKind>{TaskKind::kRsGradInter, TaskKind::kOpt, TaskKind::kAgParamInter}));
  }
}

TEST(GenBfpp, BreadthFirstForwardOrder) {
  const ModelSpec m = UnitModel(4);
  const ParallelConfig c = Par(2, 2, 3, 3);
  const Schedule s = GenBfpp(m, c, MakePlacement(c, m));
  const auto trace = ComputeTrace(s, 0);
  const std::vector<std::string> head(trace.begin(), trace.begin() + 6);
  EXPECT_EQ(head, (std::vector<std::string>{"F(s=0,m=0,u=0)", "F(s=0,m=1,u=0)", "F(s=0,m=2,u=0)",
                                            "F(s=2,m=0,u=0)", "F(s=2,m=1,u=0)", "F(s=2,m=2,u=0)"}));
  EXPECT_EQ(s.CountKind(TaskKind::kW), 0u);
}

TEST(GenBfpp, UnitIgnoredAndTwoGathersPerStage) {
  const ModelSpec m = UnitModel(2);
  const ParallelConfig c = Par(2, 1, 3, 1);
  const Schedule s = GenBfpp(m, c, MakePlacement(c, m));
  std::map<int, int> ag;
  for (const Task& t : s.tasks) {
    if (t.kind == TaskKind::kAgParam) ++ag[t.stage];
    if (IsStageCompute(t.kind)) EXPECT_EQ(t.unit, 0);
  }
  EXPECT_EQ(ag[0], 2);
  EXPECT_EQ(ag[1], 2);
  EXPECT_EQ(s.CountKind(TaskKind::kRsGrad), 2u);
}

TEST(GenBfpp, SingleMicrobatchMatchesZeroPPWithoutW) {
  const ModelSpec m = UnitModel(8);
  const ParallelConfig c = Par(2, 2, 1, 1, 2);
  const Placement pl = MakePlacement(c, m);
  const Schedule z = GenZeroPP(m, c, pl);
  const Schedule b = GenBfpp(m, c, pl);
  for (int d = 0; d < 2; ++d) {
    std::vector<std::tuple<TaskKind, int, int>> zo, bo;
    for (std::size_t id : z.per_device[d])
      if (z.tasks[id].kind != TaskKind::kW) zo.emplace_back(z.tasks[id].kind, z.tasks[id].stage, z.tasks[id].microbatch);
    for (std::size_t id : b.per_device[d])
      bo.emplace_back(b.tasks[id].kind, b.tasks[id].stage, b.tasks[id].microbatch);
    EXPECT_EQ(zo, bo) << "device " << d;
  }
}

TEST(GenBaseline, RejectsLoopingForGpipeAnd1F1B) {
  const ModelSpec m = UnitModel(8);
  const ParallelConfig c = Par(2, 2, 4, 4);
  const Placement pl = MakePlacement(c, m);
  EXPECT_THROW(GenBaseline(Variant::kGpipe, m, c, pl), ConfigError);
  EXPECT_THROW(GenBaseline(Variant::kOneFOneB, m, c, pl), ConfigError);
  EXPECT_NO_THROW(GenBaseline(Variant::kInterleaved1F1B, m, c, pl));
  EXPECT_THROW(GenBaseline(Variant::kZeroPP, m, c, pl), ConfigError);
}

TEST(GenBaseline, FusedBackwardNoShardedCollectives) {
  const ModelSpec m = UnitModel(4);
  const ParallelConfig c = Par(4, 1, 8, 8, 8);
  const Schedule s = GenBaseline(Variant::kOneFOneB, m, c, MakePlacement(c, m));
  EXPECT_EQ(s.CountKind(TaskKind::kW), 0u);
  EXPECT_EQ(s.CountKind(TaskKind::kAgParam), 0u);
  EXPECT_EQ(s.CountKind(TaskKind::kRsGrad), 0u);
  for (const Task& t : s.tasks)
    if (t.kind == TaskKind::kB) EXPECT_EQ(t.cost, m.t_input_grad + m.t_weight_grad);
}

TEST(GenBaseline, GpipeBackwardWaitsForAllForwards) {
  const ModelSpec m = UnitModel(4);
  const ParallelConfig c = Par(4, 1, 8, 8);
  const auto run = testing::Simulated(Variant::kGpipe, m, c);
  Time last_forward = 0;
  for (std::size_t i = 0; i < run.sched.tasks.size(); ++i)
    if (run.sched.tasks[i].kind == TaskKind::kF && run.sched.tasks[i].stage == 3)
      last_forward = std::max(last_forward, run.sim.end[i]);
  const std::size_t first_bwd = run.sched.ComputeOrder(0)[8];
  ASSERT_EQ(run.sched.tasks[first_bwd].kind, TaskKind::kB);
  EXPECT_GE(run.sim.start[first_bwd], last_forward);
}

TEST(GenBaseline, OneFOneBSingleDeviceAlternates) {
  const ModelSpec m = UnitModel(2);
  const ParallelConfig c = Par(1, 1, 3, 3);
  const Schedule s = GenBaseline(Variant::kOneFOneB, m, c, MakePlacement(c, m));
  EXPECT_EQ(ComputeTrace(s, 0), (std::vector<std::string>{"F(s=0,m=0,u=0)", "B(s=0,m=0,u=0)", "F(s=0,m=1,u=0)",
                                                           "B(s=0,m=1,u=0)", "F(s=0,m=2,u=0)", "B(s=0,m=2,u=0)",
                                                           "OPT(d=0)"}));
}

TEST(GenBaseline, InterleavedBubbleRatio) {
  const ModelSpec m = UnitModel(8);
  const auto run = testing::Simulated(Variant::kInterleaved1F1B, m, Par(4, 2, 8, 8));
  for (int d = 0; d < 4; ++d) EXPECT_DOUBLE_EQ(BubbleRatio(run.sim, d), 3.0 / 16);
}

TEST(GenBaseline, InterleavedNeedsBatchMultipleOfP) {
  const ModelSpec m = UnitModel(8);
  const ParallelConfig c = Par(4, 2, 6, 6);
  EXPECT_THROW(GenBaseline(Variant::kInterleaved1F1B, m, c, MakePlacement(c, m)), ConfigError);
}

TEST(ApplyRecompute, HalfTheStagesWithTwoRounds) {
  const ModelSpec m = UnitModel(8);
  ParallelConfig c = Par(2, 2, 4, 4);
  c.recompute = Recompute::kFull;
  const Placement pl = MakePlacement(c, m);
  const Schedule s = GenZeroPP(m, c, pl);
  std::set<int> stages;
  for (const Task& t : s.tasks)
    if (t.kind == TaskKind::kR) stages.insert(t.stage);
  EXPECT_EQ(stages, (std::set<int>{0, 1}));
  EXPECT_EQ(s.CountKind(TaskKind::kR), 2u * 4);
}

TEST(ApplyRecompute, CountThreeRounds) {
  const ModelSpec m = UnitModel(6);
  ParallelConfig c = Par(2, 3, 6, 6);
  c.recompute = Recompute::kFull;
  const Schedule s = GenZeroPP(m, c, MakePlacement(c, m));
  EXPECT_EQ(s.CountKind(TaskKind::kR), 24u);
}

TEST(ApplyRecompute, PlacedRightBeforeBackwardPair) {
  const ModelSpec m = UnitModel(6);
  ParallelConfig c = Par(2, 3, 6, 3);
  c.recompute = Recompute::kFull;
  const Placement pl = MakePlacement(c, m);
  const Schedule s = GenZeroPP(m, c, pl);
  for (int d = 0; d < 2; ++d) {
    const auto order = s.ComputeOrder(d);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Task& r = s.tasks[order[i]];
      if (r.kind != TaskKind::kR) continue;
      ASSERT_LT(i + 2, order.size());
      const Task& b = s.tasks[order[i + 1]];
      const Task& w = s.tasks[order[i + 2]];
      EXPECT_EQ(b.kind, TaskKind::kB);
      EXPECT_EQ(w.kind, TaskKind::kW);
      EXPECT_EQ(std::tie(b.stage, b.microbatch), std::tie(r.stage, r.microbatch));
      EXPECT_EQ(std::tie(w.stage, w.microbatch), std::tie(r.stage, r.microbatch));
      EXPECT_EQ(r.cost, m.t_forward * pl.layers_per_stage());
    }
  }
}

TEST(ApplyRecompute, NoRoundsToRecomputeWarns) {
  const ModelSpec m = UnitModel(4);
  ParallelConfig c = Par(2, 1, 4, 2);
  const Placement pl = MakePlacement(c, m);
  const Schedule plain = GenZeroPP(m, c, pl);
  c.recompute = Recompute::kFull;
  std::vector<std::string> warnings;
  const Schedule s = GenZeroPP(m, c, pl, &warnings);
  EXPECT_EQ(s.CountKind(TaskKind::kR), 0u);
  EXPECT_EQ(warnings.size(), 1u);
  for (int d = 0; d < 2; ++d) EXPECT_EQ(ComputeTrace(s, d), ComputeTrace(plain, d));
}

TEST(ScheduleText, RoundTrip) {
  const ModelSpec m = UnitModel(8);
  ParallelConfig c = Par(2, 2, 4, 2, 4);
  c.recompute = Recompute::kFull;
  const Placement pl = MakePlacement(c, m);
  const Schedule s = GenZeroPP(m, c, pl);
  const std::string text = ExportScheduleText(s, c, m.num_layers);
  const ParsedSchedule p = ParseScheduleText(text);
  EXPECT_EQ(p.header.variant, Variant::kZeroPP);
  ASSERT_TRUE(p.header.parallel.has_value());
  EXPECT_EQ(p.header.parallel->unit_size, 2);
  EXPECT_EQ(p.header.parallel->recompute, Recompute::kFull);
  EXPECT_EQ(p.header.num_layers, 8);
  ASSERT_EQ(p.schedule.tasks.size(), s.tasks.size());
  for (int d = 0; d < 2; ++d)
    for (std::size_t i = 0; i < s.per_device[d].size(); ++i) {
      EXPECT_EQ(KeyOf(p.schedule.tasks[p.schedule.per_device[d][i]]), KeyOf(s.tasks[s.per_device[d][i]]));
    }
  Schedule rebuilt = p.schedule;
  rebuilt.edges = BuildScheduleEdges(rebuilt, pl, c);
  EXPECT_EQ(rebuilt.edges.size(), s.edges.size());
}

TEST(ScheduleText, RejectsGarbage) {
  EXPECT_THROW(ParseScheduleText("0 F 0 0\n"), ParseError);
  EXPECT_THROW(ParseScheduleText("0 Q 0 0 0 -\n"), ParseError);
  EXPECT_THROW(ParseScheduleText("0 F x 0 0 -\n"), ParseError);
  EXPECT_THROW(ParseScheduleText("# variant pipedream\n"), ParseError);
}

TEST(ScheduleJson, TasksAndEdges) {
  const ModelSpec m = UnitModel(2);
  const ParallelConfig c = Par(2, 1, 1, 1);
  const Schedule s = GenZeroPP(m, c, MakePlacement(c, m));
  const auto j = ScheduleToJson(s);
  EXPECT_EQ(j["tasks"].size(), s.tasks.size());
  EXPECT_EQ(j["edges"].size(), s.edges.size());
  EXPECT_EQ(j["variant"], "zeropp");
}

TEST(Generators, Deterministic) {
  const ModelSpec m = UnitModel(8);
  ParallelConfig c = Par(4, 2, 8, 4, 8);
  c.recompute = Recompute::kFull;
  const Placement pl = MakePlacement(c, m);
  for (Variant v : {Variant::kZeroPP, Variant::kBfpp, Variant::kInterleaved1F1B}) {
    EXPECT_EQ(ScheduleToJson(GenerateSchedule(v, m, c, pl)), ScheduleToJson(GenerateSchedule(v, m, c, pl)));
  }
}

}  // namespace
}  // namespace zeropp
