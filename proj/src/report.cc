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
#include "dvpf/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "dvpf/errors.hpp"
#include "json.hpp"

namespace dvpf {
namespace {

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseCell(const std::string& cell, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError("bad number '" + cell + "'", line);
  }
  return v;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string EscapeXml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kTradeoffHeader =
    "alpha,utility_bits,leakage_bits,attack_acc,tmr_at_fmr,status";

}  // namespace

std::string FormatNumber(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void WriteCurveCsv(const PFCurve& curve, std::ostream& out) {
  out << "budget_bits,utility_bits,alpha\n";
  for (const PFPoint& p : curve.points) {
    out << FormatNumber(p.leakage_budget.value) << ',' << FormatNumber(p.utility.value)
        << ',' << FormatNumber(p.alpha) << '\n';
  }
}

void WriteTradeoffCsv(const std::vector<TradeoffPoint>& points, std::ostream& out) {
  out << kTradeoffHeader << '\n';
  for (const TradeoffPoint& p : points) {
    out << FormatNumber(p.alpha) << ',';
    if (p.failed) {
      std::string reason = p.error;
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      out << ",,,,failed: " << reason << '\n';
      continue;
    }
    out << FormatNumber(p.utility_bits) << ',' << FormatNumber(p.leakage_bits) << ','
        << FormatNumber(p.attack_accuracy) << ','
        << (p.tmr_at_fmr ? FormatNumber(*p.tmr_at_fmr) : "") << ",ok\n";
  }
}

std::vector<TradeoffPoint> ReadTradeoffCsv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kTradeoffHeader) {
    throw ParseError(std::string("expected header '") + kTradeoffHeader + "'", line_no);
  }
  std::vector<TradeoffPoint> points;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != 6) throw ParseError("expected 6 columns", line_no);
    TradeoffPoint p;
    p.alpha = ParseCell(cells[0], line_no);
    if (cells[5].rfind("failed", 0) == 0) {
      p.failed = true;
      const auto colon = cells[5].find(": ");
      p.error = colon == std::string::npos ? "" : cells[5].substr(colon + 2);
    } else if (cells[5] == "ok") {
      p.utility_bits = ParseCell(cells[1], line_no);
      p.leakage_bits = ParseCell(cells[2], line_no);
      p.attack_accuracy = ParseCell(cells[3], line_no);
      if (!cells[4].empty()) p.tmr_at_fmr = ParseCell(cells[4], line_no);
    } else {
      throw ParseError("unknown status '" + cells[5] + "'", line_no);
    }
    points.push_back(p);
  }
  return points;
}

std::string RenderSvgPlot(const std::vector<PlotSeries>& series,
                          const std::string& x_label, const std::string& y_label) {
  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 150, kTop = 20, kBottom = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x); x1 = std::max(x1, x);
      y0 = std::min(y0, y); y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) { x0 = 0; x1 = 1; y0 = 0; y1 = 1; }
  if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
    << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 16
      << "\" text-anchor=\"middle\">" << Fixed(xv, 3) << "</text>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4
      << "\" text-anchor=\"end\">" << Fixed(yv, 3) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10
    << "\" text-anchor=\"middle\">" << EscapeXml(x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << kTop + ph / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << EscapeXml(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % 5];
    if (s.connect && s.points.size() > 1) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (const auto& [x, y] : s.points) {
        if (std::isfinite(x) && std::isfinite(y)) o << px(x) << ',' << py(y) << ' ';
      }
      o << "\"/>\n";
    }
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    }
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    o << "<rect x=\"" << kLeft + pw + 12 << "\" y=\"" << ly - 9
      << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    o << "<text x=\"" << kLeft + pw + 28 << "\" y=\"" << ly << "\">" << EscapeXml(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string RenderTable(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw ValidationError("table row width mismatch");
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream o;
  auto emit = [&](const std::vector<std::string>& cells, bool left) {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) line += "  ";
      const std::string pad(width[c] - cells[c].size(), ' ');
      line += left ? cells[c] + pad : pad + cells[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    o << line << '\n';
  };
  emit(header, true);
  std::size_t total = 0;
  for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
  o << std::string(total, '-') << '\n';
  for (const auto& r : rows) emit(r, false);
  return o.str();
}

std::string RenderTradeoffTable(const std::vector<TradeoffPoint>& points) {
  std::vector<std::vector<std::string>> rows;
  for (const TradeoffPoint& p : points) {
    if (p.failed) {
      rows.push_back({FormatNumber(p.alpha), "failed", "-", "-", "-"});
      continue;
    }
    rows.push_back({FormatNumber(p.alpha),
                    p.tmr_at_fmr ? Fixed(100.0 * *p.tmr_at_fmr, 2) : "-",
                    Fixed(p.leakage_bits, 3), Fixed(p.attack_accuracy, 3),
                    Fixed(p.utility_bits, 3)});
  }
  return RenderTable({"alpha", "TMR@FMR [%]", "I(Z;S) [bits]", "Acc on S", "utility [bits]"},
                     rows);
}

std::string AttackReportJson(const AttackReport& r) {
  return nlohmann::json{{"attacker", std::string(AttackerName(r.attacker))},
                        {"accuracy", r.accuracy},
                        {"leakage_bits", r.leakage_bits.value},
                        {"cross_entropy_bits", r.cross_entropy_bits},
                        {"n_train", r.n_train},
                        {"n_test", r.n_test}}
      .dump(2);
}

}  // namespace dvpf
