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

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zeropp/core_model.hpp"
#include "zeropp/cost_model.hpp"
#include "zeropp/planner.hpp"
#include "zeropp/render.hpp"
#include "zeropp/schedule.hpp"
#include "zeropp/schedule_gen.hpp"
#include "zeropp/simulator.hpp"
#include "zeropp/validator.hpp"

namespace zeropp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitUsage = 2;

namespace cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void WriteFile(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << body;
}

inline std::string ReadFile(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline Variant VariantArg(const std::string& name) {
  auto v = ParseVariant(name);
  if (!v) throw UsageError("unknown variant '" + name + "' (zeropp, bfpp, gpipe, 1f1b, interleaved_1f1b)");
  return *v;
}

struct Generated {
  Config cfg;
  Placement pl;
  Schedule sched;
  std::vector<std::string> warnings;
};

inline Generated Generate(const std::string& config_path, const std::string& variant) {
  Config cfg = LoadConfig(config_path);
  const Variant v = VariantArg(variant);
  Validate(cfg.model, cfg.parallel);
  Placement pl = MakePlacement(cfg.parallel, cfg.model);
  std::vector<std::string> warnings;
  Schedule s = GenerateSchedule(v, cfg.model, cfg.parallel, pl, &warnings);
  return {cfg, pl, std::move(s), std::move(warnings)};
}

inline std::vector<Method> MethodsArg(const std::string& spec) {
  if (spec == "all") return ComparisonTableMethods();
  std::vector<Method> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto m = ParseMethod(tok);
    if (!m) throw UsageError("unknown method '" + tok + "'");
    out.push_back(*m);
  }
  if (out.empty()) throw UsageError("--methods is empty");
  return out;
}

inline std::string Table2Csv(const std::vector<CostReport>& rows) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "method,bubble_ratio,weight_mem,activation_mem,comm_volume_per_block,crossover\n";
  for (const auto& r : rows) {
    os << ToString(r.method) << ',' << r.bubble_ratio << ',' << r.weight_mem << ',' << r.activation_mem << ','
       << r.comm_volume_per_block << ',' << (r.crossover_satisfied ? "true" : "false") << '\n';
  }
  return os.str();
}

inline std::vector<long long> DefaultBatches() {
  std::vector<long long> out;
  for (long long g = 8; g <= 1024; g *= 2) out.push_back(g);
  return out;
}

inline std::string Figure1Csv(const std::vector<Figure1Point>& pts) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "global_batch,tp_bytes,zero3_bytes,ratio\n";
  for (const auto& p : pts)
    os << p.global_batch << ',' << p.tp_bytes << ',' << p.zero3_bytes << ',' << p.tp_bytes / p.zero3_bytes << '\n';
  return os.str();
}

}  // namespace cli

// Entry point shared by the executable and the tests. Exit codes: 0 success,
// 1 validation failure, 2 usage or input error.
inline int RunCli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ZeroPP pipeline schedule simulator", "zeropp"};
  app.require_subcommand(1);

  std::string config, variant = "zeropp", csv, trace, out_path, json_path, schedule_path;
  std::string methods = "all", format = "ascii", batches;
  int fuzz = 0;
  std::uint64_t seed = 0;
  double mem_cap_gb = -1;
  bool zero_comm = false;

  auto* plan = app.add_subcommand("plan", "generate a schedule and export it as text");
  plan->add_option("--config", config, "config JSON")->required();
  plan->add_option("--variant", variant, "zeropp|bfpp|gpipe|1f1b|interleaved_1f1b");
  plan->add_option("--out", out_path, "schedule text output (default stdout)");
  plan->add_option("--json", json_path, "tasks and edges as JSON");

  auto* validate = app.add_subcommand("validate", "check a schedule file, or fuzz the generators");
  validate->add_option("--schedule", schedule_path, "schedule text file");
  validate->add_option("--config", config, "config JSON supplying num_layers if the file lacks it");
  validate->add_option("--fuzz", fuzz, "number of fuzz trials")->check(CLI::NonNegativeNumber);
  auto* seed_opt = validate->add_option("--seed", seed, "fuzz seed (default $ZEROPP_SEED or 0)");

  auto* simulate = app.add_subcommand("simulate", "simulate a generated schedule");
  simulate->add_option("--config", config, "config JSON")->required();
  simulate->add_option("--variant", variant, "schedule variant");
  simulate->add_option("--csv", csv, "per-device CSV");
  simulate->add_option("--trace", trace, "Chrome trace JSON");

  auto* analyze = app.add_subcommand("analyze", "closed-form comparison table");
  analyze->add_option("--config", config, "config JSON")->required();
  analyze->add_option("--methods", methods, "all, or a comma list of tp3d,gpipe,1f1b,interleaved_1f1b,zeropp,zeropp_recomp,bfpp");
  analyze->add_option("--csv", csv, "table CSV");

  auto* search = app.add_subcommand("search", "exhaustive configuration search under a memory cap");
  search->add_option("--config", config, "config JSON")->required();
  search->add_option("--mem-cap-gb", mem_cap_gb, "per-device cap in 1e9 bytes (default unbounded)");
  search->add_option("--csv", csv, "ranked candidate CSV");

  auto* render = app.add_subcommand("render", "timeline of a simulated schedule");
  render->add_option("--config", config, "config JSON")->required();
  render->add_option("--variant", variant, "schedule variant");
  render->add_option("--format", format, "ascii|svg")->check(CLI::IsMember({"ascii", "svg"}));
  render->add_option("--out", out_path, "output file (default stdout)");
  render->add_flag("--zero-comm", zero_comm, "collectives take no time");

  auto* fig1 = app.add_subcommand("figure1", "TP versus ZeRO-3 per-GPU volume over global batch");
  fig1->add_option("--config", config, "config JSON")->required();
  fig1->add_option("--batches", batches, "comma list of global batch sizes");
  fig1->add_option("--csv", csv, "series CSV");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (plan->parsed()) {
      auto g = cli::Generate(config, variant);
      for (const auto& w : g.warnings) err << "warning: " << w << "\n";
      const SimResult r = Simulate(g.sched, g.cfg.model, g.cfg.parallel, g.pl, g.cfg.costs);
      const std::string text = ExportScheduleText(g.sched, g.cfg.parallel, g.cfg.model.num_layers, &r.start);
      if (out_path.empty()) out << text;
      else cli::WriteFile(out_path, text);
      if (!json_path.empty()) cli::WriteFile(json_path, ScheduleToJson(g.sched).dump(2) + "\n");
      return kExitOk;
    }

    if (validate->parsed()) {
      if (schedule_path.empty() && fuzz == 0) throw cli::UsageError("validate needs --schedule or --fuzz");
      int code = kExitOk;
      if (!schedule_path.empty()) {
        ParsedSchedule ps = ParseScheduleText(cli::ReadFile(schedule_path));
        std::optional<Config> cfg_file;
        if (!config.empty()) cfg_file = LoadConfig(config);
        ParallelConfig par = ps.header.parallel ? *ps.header.parallel
                             : cfg_file         ? cfg_file->parallel
                                                : throw cli::UsageError("schedule has no '# config' header; pass --config");
        const int layers = ps.header.num_layers ? *ps.header.num_layers
                           : cfg_file           ? cfg_file->model.num_layers
                                                : throw cli::UsageError("num_layers unknown; pass --config");
        Validate(par);
        const Placement pl(par.pp_size, par.stages_per_device, layers);
        Schedule& s = ps.schedule;
        if (s.num_devices() > pl.num_devices())
          throw ParseError("schedule names device " + std::to_string(s.num_devices() - 1) + " but pp_size is " +
                           std::to_string(par.pp_size));
        s.per_device.resize(pl.num_devices());
        s.edges = BuildScheduleEdges(s, pl, par);
        const auto violations = ValidateSchedule(s, pl, par);
        for (const auto& v : violations) out << FormatViolation(v) << "\n";
        if (violations.empty()) out << "valid: " << s.tasks.size() << " tasks\n";
        else code = kExitInvalid;
      }
      if (fuzz > 0) {
        if (seed_opt->count() == 0) {
          if (const char* env = std::getenv("ZEROPP_SEED")) {
            try {
              seed = std::stoull(env);
            } catch (const std::exception&) {
              throw cli::UsageError(std::string("ZEROPP_SEED is not an integer: ") + env);
            }
          }
        }
        const FuzzSummary f = FuzzCheck(seed, fuzz);
        out << "fuzz seed=" << f.seed << " trials=" << f.trials << " valid=" << f.generated_valid
            << " mutations=" << f.mutations << " rejected=" << f.mutations_rejected << "\n";
        for (const auto& x : f.failures) out << x << "\n";
        if (!f.ok()) code = kExitInvalid;
      }
      return code;
    }

    if (simulate->parsed()) {
      auto g = cli::Generate(config, variant);
      for (const auto& w : g.warnings) err << "warning: " << w << "\n";
      const SimResult r = Simulate(g.sched, g.cfg.model, g.cfg.parallel, g.pl, g.cfg.costs);
      const std::string body = SimResultCsv(r);
      if (csv.empty()) out << body;
      else cli::WriteFile(csv, body);
      if (!trace.empty()) cli::WriteFile(trace, SimTraceJson(g.sched, r).dump() + "\n");
      return kExitOk;
    }

    if (analyze->parsed()) {
      const Config cfg = LoadConfig(config);
      std::vector<CostReport> rows;
      for (Method m : cli::MethodsArg(methods)) {
        ParallelConfig c = cfg.parallel;
        if (m == Method::kGpipe || m == Method::kOneFOneB) c.stages_per_device = 1;
        rows.push_back(Table2Row(m, cfg.model, c));
      }
      const std::string body = cli::Table2Csv(rows);
      if (csv.empty()) out << body;
      else cli::WriteFile(csv, body);
      return kExitOk;
    }

    if (search->parsed()) {
      const Config cfg = LoadConfig(config);
      const Bytes cap = mem_cap_gb < 0 ? std::numeric_limits<Bytes>::infinity() : mem_cap_gb * 1e9;
      const PlanResult plan_result = Search(DefaultSearchSpace(cfg, cap));
      if (!csv.empty()) cli::WriteFile(csv, PlanCsv(plan_result));
      else out << PlanCsv(plan_result);
      out << PlanSummary(plan_result);
      return kExitOk;
    }

    if (render->parsed()) {
      auto g = cli::Generate(config, variant);
      for (const auto& w : g.warnings) err << "warning: " << w << "\n";
      const CommCostModel costs = zero_comm ? CommCostModel::Free() : g.cfg.costs;
      const SimResult r = Simulate(g.sched, g.cfg.model, g.cfg.parallel, g.pl, costs);
      RenderOptions opt;
      opt.format = format == "svg" ? RenderFormat::kSvg : RenderFormat::kAscii;
      const Rendered doc = RenderTimeline(r, g.sched, opt);
      for (const auto& w : doc.warnings) err << "warning: " << w << "\n";
      if (out_path.empty()) out << doc.text;
      else cli::WriteFile(out_path, doc.text);
      return kExitOk;
    }

    if (fig1->parsed()) {
      const Config cfg = LoadConfig(config);
      std::vector<long long> gs;
      if (batches.empty()) {
        gs = cli::DefaultBatches();
      } else {
        std::stringstream ss(batches);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          try {
            gs.push_back(std::stoll(tok));
          } catch (const std::exception&) {
            throw cli::UsageError("bad batch size '" + tok + "'");
          }
          if (gs.back() <= 0) throw cli::UsageError("batch sizes must be positive");
        }
      }
      const std::string body = cli::Figure1Csv(Figure1Curve(cfg.model, gs));
      if (csv.empty()) out << body;
      else cli::WriteFile(csv, body);
      out << "crossover global batch (2sG > 9h): " << Figure1CrossoverBatch(cfg.model) << "\n";
      return kExitOk;
    }
  } catch (const cli::UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SimulationError& e) {
    err << "simulation error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitUsage;
}

inline int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return RunCli(std::move(args), out, err);
}

}  // namespace zeropp
