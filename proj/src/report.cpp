/* Copyright 2026 The Forge Authors. All Rights Reserved.

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

#include "forge/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "forge/error.hpp"

namespace forge {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(10);
  return out;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(10);
  s << *v;
  return s.str();
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << 100.0 * *v;
  return s.str();
}

// Minimal SVG line chart. Series share the axes; y is fixed to [0,1].
struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

void write_svg_chart(const fs::path& path, const std::string& title, const std::string& x_label,
                     const std::vector<Series>& series) {
  constexpr double W = 480, H = 320, L = 50, R = 110, T = 30, B = 40;
  double x_min = 0.0, x_max = 1.0;
  bool first = true;
  for (const auto& s : series) {
    for (double v : s.x) {
      x_min = first ? v : std::min(x_min, v);
      x_max = first ? v : std::max(x_max, v);
      first = false;
    }
  }
  if (x_max <= x_min) x_max = x_min + 1.0;
  auto px = [&](double v) { return L + (v - x_min) / (x_max - x_min) * (W - L - R); };
  auto py = [&](double v) { return H - B - std::clamp(v, 0.0, 1.0) * (H - T - B); };

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    const double xv = x_min + v * (x_max - x_min);
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 14 << "\" text-anchor=\"middle\">" << xv << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) out << px(s.x[k]) << "," << py(s.y[k]) << " ";
    out << "\"/>\n";
    const double ly = T + 14.0 * static_cast<double>(i);
    out << "<line x1=\"" << W - R + 8 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 24 << "\" y2=\"" << ly
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 28 << "\" y=\"" << ly + 4 << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

}  // namespace

ReportBundle export_report(const RunRecord& record, const fs::path& dir, bool plots) {
  fs::create_directories(dir);
  ReportBundle bundle;
  if (!record.complete()) {
    bundle.warnings.push_back(record.failed_stage.empty()
                                  ? "record is incomplete; the report is partial"
                                  : "run failed in stage '" + record.failed_stage + "'; the report is partial");
  }

  const fs::path json_path = dir / "report.json";
  open_out(json_path) << record.to_json().dump(2) << "\n";
  bundle.files.push_back(json_path);

  const fs::path timeline = dir / "timeline.csv";
  {
    auto out = open_out(timeline);
    out << "t,extra_size,acc,asr,ap,extra_clean_fraction\n";
    for (const auto& r : record.timeline) {
      out << r.iteration << "," << r.extra_size << "," << cell(r.acc) << "," << cell(r.asr) << "," << cell(r.ap) << ","
          << cell(r.extra_clean_fraction) << "\n";
    }
  }
  bundle.files.push_back(timeline);

  const fs::path pr = dir / "pr_curves.csv";
  {
    auto out = open_out(pr);
    out << "t,threshold,precision,recall\n";
    for (std::size_t t = 0; t < record.pr_curves.size(); ++t) {
      const auto& c = record.pr_curves[t];
      for (std::size_t k = 0; k < c.thresholds.size(); ++k) {
        out << t + 1 << "," << c.thresholds[k] << "," << c.precision[k] << "," << c.recall[k] << "\n";
      }
    }
  }
  bundle.files.push_back(pr);

  const fs::path stages = dir / "stages.csv";
  {
    auto out = open_out(stages);
    out << "stage,seconds,cached\n";
    for (const auto& s : record.stages) out << s.name << "," << s.seconds << "," << (s.cached ? 1 : 0) << "\n";
  }
  bundle.files.push_back(stages);

  if (plots) {
    Series acc{"ACC", kPalette[0], {}, {}}, asr{"ASR", kPalette[1], {}, {}};
    if (record.before_acc && record.before_asr) {
      acc.x.push_back(0);
      acc.y.push_back(*record.before_acc);
      asr.x.push_back(0);
      asr.y.push_back(*record.before_asr);
    }
    for (const auto& r : record.timeline) {
      if (r.acc) {
        acc.x.push_back(r.iteration);
        acc.y.push_back(*r.acc);
      }
      if (r.asr) {
        asr.x.push_back(r.iteration);
        asr.y.push_back(*r.asr);
      }
    }
    const fs::path tl_svg = dir / "timeline.svg";
    write_svg_chart(tl_svg, "ACC / ASR per iteration", "iteration", {acc, asr});
    bundle.files.push_back(tl_svg);

    std::vector<Series> curves;
    for (std::size_t t = 0; t < record.pr_curves.size(); ++t) {
      const auto& c = record.pr_curves[t];
      std::ostringstream label;
      label.precision(3);
      label << "t=" << t + 1 << " AP " << c.average_precision;
      curves.push_back({label.str(), kPalette[t % std::size(kPalette)], c.recall, c.precision});
    }
    const fs::path pr_svg = dir / "pr.svg";
    write_svg_chart(pr_svg, "Clean-sample ranking", "recall", curves);
    bundle.files.push_back(pr_svg);
  }
  return bundle;
}

void write_grid_table(const GridResult& grid, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<std::string> attacks;
  std::map<std::string, const RunRecord*> first;
  std::map<std::pair<std::string, DefenseKind>, const RunRecord*> cells;
  for (const auto& c : grid.cells) {
    if (!first.count(c.attack)) {
      attacks.push_back(c.attack);
      first[c.attack] = &c.record;
    }
    cells[{c.attack, c.defense}] = &c.record;
  }
  auto out = open_out(path);
  out << "attack,before_acc,before_asr";
  for (DefenseKind d : kGridDefenses) out << "," << to_string(d) << "_acc," << to_string(d) << "_asr";
  out << "\n";
  for (const auto& a : attacks) {
    out << a << "," << percent(first[a]->before_acc) << "," << percent(first[a]->before_asr);
    for (DefenseKind d : kGridDefenses) {
      const auto it = cells.find({a, d});
      if (it == cells.end()) {
        out << ",,";
      } else {
        out << "," << percent(it->second->after_acc) << "," << percent(it->second->after_asr);
      }
    }
    out << "\n";
  }
}

void write_histogram_csv(const LabelHistogram& hist, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto out = open_out(path);
  out << "target_row,predicted,count,frequency\n";
  for (int r = 0; r < hist.classes; ++r) {
    if (hist.row_total(r) == 0) continue;
    for (int c = 0; c < hist.classes; ++c) {
      out << r << "," << c << "," << hist.count(r, c) << "," << hist.frequency(r, c) << "\n";
    }
  }
}

}  // namespace forge
