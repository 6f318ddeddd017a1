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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "castts/common.hpp"

namespace castts {

struct PlotSeries {
  std::string label;
  std::string color;  // SVG color
  std::vector<double> x;
  std::vector<double> y;
};

/// Simple polyline chart with axes and a legend.
void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label,
                      const std::vector<PlotSeries>& series);

/// Mel-spectrogram heat map with pitch contours overlaid (frame-aligned).
/// Optional vertical markers flag sentence boundaries.
void write_mel_pitch_chart(const std::filesystem::path& path,
                           const std::string& title, const Mat& mel,
                           const std::vector<PlotSeries>& pitch_series,
                           const std::vector<double>& boundaries = {});

}  // namespace castts
