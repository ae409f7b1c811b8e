// Copyright 2026 The DVPF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// CSV, SVG and aligned-text renderings of curves, sweeps and attacks.
#ifndef DVPF_REPORT_HPP_
#define DVPF_REPORT_HPP_

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dvpf/eval_harness.hpp"
#include "dvpf/pf_oracle.hpp"

namespace dvpf {

// Shortest round-trip decimal form.
std::string FormatNumber(double v);

// budget_bits,utility_bits,alpha
void WriteCurveCsv(const PFCurve& curve, std::ostream& out);

// alpha,utility_bits,leakage_bits,attack_acc,tmr_at_fmr,status. Failed points
// leave the numeric columns empty and carry "failed: <reason>" as status.
void WriteTradeoffCsv(const std::vector<TradeoffPoint>& points, std::ostream& out);
// Throws ParseError.
std::vector<TradeoffPoint> ReadTradeoffCsv(std::istream& in);

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool connect = true;  // polyline, else markers only
};

// Static SVG line plot.
std::string RenderSvgPlot(const std::vector<PlotSeries>& series,
                          const std::string& x_label, const std::string& y_label);

// Left-aligned header row, right-aligned numeric cells, two-space gutters.
std::string RenderTable(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows);

// Columns: alpha, TMR@FMR, I(Z;S) [bits], Acc on S, utility [bits].
std::string RenderTradeoffTable(const std::vector<TradeoffPoint>& points);

std::string AttackReportJson(const AttackReport& report);

}  // namespace dvpf

#endif  // DVPF_REPORT_HPP_
