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
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "zeropp/schedule.hpp"
#include "zeropp/simulator.hpp"

namespace zeropp {

enum class RenderFormat { kAscii, kSvg };

struct RenderOptions {
  RenderFormat format = RenderFormat::kAscii;
  int max_columns = 240;  // proportional fallback only
};

struct Rendered {
  std::string text;
  std::vector<std::string> warnings;
};

inline char GlyphOf(TaskKind k) {
  switch (k) {
    case TaskKind::kF: return 'F';
    case TaskKind::kB: return 'B';
    case TaskKind::kW: return 'W';
    case TaskKind::kR: return 'r';
    case TaskKind::kOpt: return 'O';
    default: return '~';
  }
}

namespace detail {

struct Cell {
  std::size_t task;
  Time start;
  Time end;
};

struct Lanes {
  std::vector<std::vector<Cell>> compute;  // per device
  std::vector<std::vector<Cell>> comm;
};

inline Lanes CollectLanes(const SimResult& r, const Schedule& s) {
  Lanes l;
  const int p = r.num_devices();
  l.compute.resize(p);
  l.comm.resize(p);
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const Task& t = s.tasks[i];
    if (!(r.end[i] > r.start[i])) continue;
    auto& lane = RunsOnComputeStream(t.kind) ? l.compute[t.device] : l.comm[t.device];
    lane.push_back({i, r.start[i], r.end[i]});
  }
  auto by_start = [](const Cell& a, const Cell& b) {
    return a.start != b.start ? a.start < b.start : a.task < b.task;
  };
  for (auto& v : l.compute) std::sort(v.begin(), v.end(), by_start);
  for (auto& v : l.comm) std::sort(v.begin(), v.end(), by_start);
  return l;
}

inline bool IsMultiple(Time x, Time unit) {
  const double q = x / unit;
  return std::abs(q - std::round(q)) < 1e-9 * std::max(1.0, q);
}

// Smallest compute duration, if every boundary lands on a multiple of it.
inline Time UniformSlot(const Lanes& l) {
  Time slot = 0;
  for (const auto& lane : l.compute)
    for (const Cell& c : lane) {
      const Time d = c.end - c.start;
      if (slot == 0 || d < slot) slot = d;
    }
  if (slot <= 0) return 0;
  for (const auto* group : {&l.compute, &l.comm})
    for (const auto& lane : *group)
      for (const Cell& c : lane)
        if (!IsMultiple(c.start, slot) || !IsMultiple(c.end, slot)) return 0;
  return slot;
}

inline std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline const char* ColorOf(TaskKind k) {
  switch (k) {
    case TaskKind::kF: return "#4e79a7";
    case TaskKind::kB: return "#e15759";
    case TaskKind::kW: return "#59a14f";
    case TaskKind::kR: return "#f28e2b";
    case TaskKind::kOpt: return "#b07aa1";
    default: return "#bab0ac";
  }
}

}  // namespace detail

inline Rendered RenderAscii(const SimResult& r, const Schedule& s, const RenderOptions& opt = {}) {
  Rendered out;
  const detail::Lanes lanes = detail::CollectLanes(r, s);
  Time slot = detail::UniformSlot(lanes);
  int columns = 0;
  if (slot > 0) {
    columns = static_cast<int>(std::llround(r.makespan / slot));
  } else {
    out.warnings.push_back("non-uniform task costs: ASCII columns are proportional, not slots");
    columns = std::max(1, opt.max_columns);
    slot = r.makespan > 0 ? r.makespan / columns : 1;
  }
  auto col = [&](Time t) {
    return std::clamp(static_cast<int>(std::llround(t / slot)), 0, columns);
  };
  auto paint = [&](const std::vector<detail::Cell>& cells) {
    std::string row(columns, '.');
    for (const auto& c : cells) {
      int a = col(c.start), b = col(c.end);
      if (b == a && a < columns) b = a + 1;
      for (int k = a; k < b; ++k) row[k] = GlyphOf(s.tasks[c.task].kind);
    }
    return row;
  };
  bool any_comm = false;
  for (const auto& lane : lanes.comm) any_comm = any_comm || !lane.empty();

  std::ostringstream os;
  const int p = r.num_devices();
  const int label = static_cast<int>(std::to_string(std::max(0, p - 1)).size()) + 3;
  for (int d = 0; d < p; ++d) {
    std::string name = "d" + std::to_string(d);
    os << name << std::string(label - name.size(), ' ') << '|' << paint(lanes.compute[d]) << "|\n";
    if (any_comm) os << std::string(label, ' ') << '|' << paint(lanes.comm[d]) << "|\n";
  }
  os << "legend: F=forward B=input-grad W=weight-grad r=recompute O=optimizer ~=comm .=idle\n";
  out.text = os.str();
  return out;
}

inline Rendered RenderSvg(const SimResult& r, const Schedule& s) {
  using detail::Num;
  const detail::Lanes lanes = detail::CollectLanes(r, s);
  const double width = 1000, lane_h = 24, comm_h = 10, left = 40, top = 10;
  const double scale = r.makespan > 0 ? width / r.makespan : 1;
  const int p = r.num_devices();
  const double row_h = lane_h + comm_h + 6;
  const double height = top * 2 + p * row_h + 20;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(left + width + 10)
     << "\" height=\"" << Num(height) << "\" font-family=\"monospace\" font-size=\"10\">\n";
  for (int d = 0; d < p; ++d) {
    const double y = top + d * row_h;
    os << "<text x=\"2\" y=\"" << Num(y + lane_h * 0.7) << "\">d" << d << "</text>\n";
    os << "<rect x=\"" << Num(left) << "\" y=\"" << Num(y) << "\" width=\"" << Num(width)
       << "\" height=\"" << Num(lane_h) << "\" fill=\"#f4f4f4\"/>\n";
    auto emit = [&](const detail::Cell& c, double yy, double hh, bool text) {
      const Task& t = s.tasks[c.task];
      const double x = left + c.start * scale, w = (c.end - c.start) * scale;
      os << "<rect x=\"" << Num(x) << "\" y=\"" << Num(yy) << "\" width=\"" << Num(w)
         << "\" height=\"" << Num(hh) << "\" fill=\"" << detail::ColorOf(t.kind)
         << "\" stroke=\"#ffffff\" stroke-width=\"0.5\"><title>" << Describe(t)
         << "</title></rect>\n";
      if (text && w >= 12) {
        os << "<text x=\"" << Num(x + w / 2) << "\" y=\"" << Num(yy + hh * 0.7)
           << "\" text-anchor=\"middle\" fill=\"#ffffff\">" << GlyphOf(t.kind);
        if (t.microbatch >= 0) os << t.microbatch;
        os << "</text>\n";
      }
    };
    for (const auto& c : lanes.compute[d]) emit(c, y, lane_h, true);
    for (const auto& c : lanes.comm[d]) emit(c, y + lane_h + 2, comm_h, false);
  }
  const double ly = top + p * row_h + 12;
  double lx = left;
  for (TaskKind k : {TaskKind::kF, TaskKind::kB, TaskKind::kW, TaskKind::kR, TaskKind::kOpt,
                     TaskKind::kAgParam}) {
    os << "<rect x=\"" << Num(lx) << "\" y=\"" << Num(ly - 8) << "\" width=\"10\" height=\"10\" fill=\""
       << detail::ColorOf(k) << "\"/><text x=\"" << Num(lx + 14) << "\" y=\"" << Num(ly) << "\">"
       << (IsCollective(k) ? "comm" : ToString(k)) << "</text>\n";
    lx += 80;
  }
  os << "</svg>\n";
  return {os.str(), {}};
}

inline Rendered RenderTimeline(const SimResult& r, const Schedule& s, const RenderOptions& opt = {}) {
  return opt.format == RenderFormat::kSvg ? RenderSvg(r, s) : RenderAscii(r, s, opt);
}

}  // namespace zeropp
