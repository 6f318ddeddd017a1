// Copyright 2026 castts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "castts/svg_plot.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace castts {

namespace {

constexpr double kWidth = 860, kHeight = 420;
constexpr double kLeft = 70, kRight = 30, kTop = 40, kBottom = 50;

struct Range {
  double lo = std::numeric_limits<double>::max();
  double hi = std::numeric_limits<double>::lowest();
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span() const { return hi > lo ? hi - lo : 1.0; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label,
                      const std::vector<PlotSeries>& series) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write plot: " + path.string());
  Range xr, yr;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.include(s.x[i]);
      yr.include(s.y[i]);
    }
  if (series.empty() || xr.lo > xr.hi) {
    xr = {0, 1};
    yr = {0, 1};
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / xr.span() * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / yr.span() * ph; };

  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth
     << "' height='" << kHeight << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << kWidth / 2 << "' y='22' text-anchor='middle' "
     << "font-size='15' font-family='sans-serif'>" << title << "</text>\n";
  os << "<rect x='" << kLeft << "' y='" << kTop << "' width='" << pw
     << "' height='" << ph << "' fill='none' stroke='black'/>\n";
  for (int g = 0; g <= 4; ++g) {
    const double yv = yr.lo + yr.span() * g / 4.0;
    const double xv = xr.lo + xr.span() * g / 4.0;
    os << "<text x='" << kLeft - 6 << "' y='" << py(yv) + 4
       << "' text-anchor='end' font-size='11' font-family='sans-serif'>"
       << fmt(yv) << "</text>\n";
    os << "<text x='" << px(xv) << "' y='" << kTop + ph + 16
       << "' text-anchor='middle' font-size='11' font-family='sans-serif'>"
       << fmt(xv) << "</text>\n";
  }
  os << "<text x='" << kWidth / 2 << "' y='" << kHeight - 10
     << "' text-anchor='middle' font-size='12' font-family='sans-serif'>"
     << x_label << "</text>\n";
  os << "<text x='16' y='" << kTop + ph / 2
     << "' text-anchor='middle' font-size='12' font-family='sans-serif' "
     << "transform='rotate(-90 16 " << kTop + ph / 2 << ")'>" << y_label
     << "</text>\n";
  double legend_y = kTop + 14;
  for (const auto& s : series) {
    os << "<polyline fill='none' stroke='" << s.color
       << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    os << "'/>\n";
    os << "<text x='" << kLeft + pw - 150 << "' y='" << legend_y
       << "' font-size='12' font-family='sans-serif' fill='" << s.color << "'>"
       << s.label << "</text>\n";
    legend_y += 16;
  }
  os << "</svg>\n";
}

void write_mel_pitch_chart(const std::filesystem::path& path,
                           const std::string& title, const Mat& mel,
                           const std::vector<PlotSeries>& pitch_series,
                           const std::vector<double>& boundaries) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write plot: " + path.string());
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const Eigen::Index frames = mel.rows(), bins = mel.cols();
  Range vr;
  for (Eigen::Index i = 0; i < frames; ++i)
    for (Eigen::Index j = 0; j < bins; ++j) vr.include(mel(i, j));
  Range fr;
  fr.include(0.0);
  for (const auto& s : pitch_series)
    for (double v : s.y) fr.include(v);

  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth
     << "' height='" << kHeight << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << kWidth / 2 << "' y='22' text-anchor='middle' "
     << "font-size='15' font-family='sans-serif'>" << title << "</text>\n";
  const double cw = pw / static_cast<double>(std::max<Eigen::Index>(frames, 1));
  const double chh = ph / static_cast<double>(std::max<Eigen::Index>(bins, 1));
  for (Eigen::Index i = 0; i < frames; ++i)
    for (Eigen::Index j = 0; j < bins; ++j) {
      const int shade = static_cast<int>(
          255.0 * (1.0 - (mel(i, j) - vr.lo) / vr.span()));
      os << "<rect x='" << kLeft + i * cw << "' y='"
         << kTop + ph - (j + 1) * chh << "' width='" << cw + 0.5
         << "' height='" << chh + 0.5 << "' fill='rgb(" << shade << ","
         << shade << "," << shade << ")'/>\n";
    }
  double legend_y = kTop + 14;
  for (const auto& s : pitch_series) {
    os << "<polyline fill='none' stroke='" << s.color
       << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.y[i] <= 0) continue;  // unvoiced gaps
      os << kLeft + s.x[i] * cw + cw / 2 << ","
         << kTop + ph - (s.y[i] - fr.lo) / fr.span() * ph << " ";
    }
    os << "'/>\n";
    os << "<text x='" << kLeft + pw - 170 << "' y='" << legend_y
       << "' font-size='12' font-family='sans-serif' fill='" << s.color << "'>"
       << s.label << "</text>\n";
    legend_y += 16;
  }
  for (double b : boundaries)
    os << "<line x1='" << kLeft + b * cw << "' y1='" << kTop << "' x2='"
       << kLeft + b * cw << "' y2='" << kTop + ph
       << "' stroke='red' stroke-dasharray='5,4'/>\n";
  os << "<text x='" << kWidth / 2 << "' y='" << kHeight - 10
     << "' text-anchor='middle' font-size='12' font-family='sans-serif'>"
     << "frames</text>\n";
  os << "</svg>\n";
}

}  // namespace castts
