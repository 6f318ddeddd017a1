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

namespace castts::metrics {

using DtwPath = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

/// Monotone, contiguous alignment from (0,0) to (|A|-1,|B|-1) minimising
/// cumulative Euclidean frame distance, steps {(1,0),(0,1),(1,1)}, ties
/// preferring the diagonal step.
DtwPath dtw_align(const Mat& a, const Mat& b);
double dtw_cost(const Mat& a, const Mat& b);

/// F0 RMSE in Hz: mels are DTW-aligned, the synthesized F0 is mapped to
/// ground-truth frames along the path (averaging multiply-mapped frames),
/// and the RMSE is taken over frames voiced (> 0) on both sides.
double f0_rmse(const Vec& f0_syn, const Vec& f0_gt, const Mat& mel_syn,
               const Mat& mel_gt);

/// Cepstra of the log-mel rows: orthonormal DCT-II, coefficients 1..12
/// (0th excluded). Requires at least 13 mel bins.
Mat mel_cepstra(const Mat& mel);

/// MCD in dB: DTW over the cepstra, mean over the path of
/// (10/ln10)*sqrt(2*sum_d (c_d - c'_d)^2).
double mcd(const Mat& mel_syn, const Mat& mel_gt);

/// MSE over phonemes in the duration predictor's native log(1+frames)
/// domain.
double duration_mse(const std::vector<int>& pred, const std::vector<int>& gt);

/// Mean squared difference over embedding dimensions. This is the single
/// definition the stage-2 distillation loss also uses.
double style_mse(const Vec& pred, const Vec& target);

struct EvalRecord {
  std::string utterance_id;
  std::string metric;
  double value;
};

/// One JSON record per line, then a summary line with per-metric means.
void write_eval_report(const std::filesystem::path& path,
                       const std::vector<EvalRecord>& records);

/// Simple autocorrelation pitch tracker for real audio (per-frame Hz,
/// 0 where unvoiced). Provided for completeness; the desk-scale corpus
/// carries F0 tracks as inputs.
Vec estimate_f0_autocorr(const Vec& samples, int sample_rate_hz,
                         int frame_size = 1024, int hop = 256,
                         double f_min_hz = 60.0, double f_max_hz = 400.0,
                         double voicing_threshold = 0.3);

}  // namespace castts::metrics
