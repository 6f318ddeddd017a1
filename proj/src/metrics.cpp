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

#include "castts/metrics.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace castts::metrics {

namespace {

Mat pairwise_euclidean(const Mat& a, const Mat& b) {
  Mat d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      d(i, j) = (a.row(i) - b.row(j)).norm();
  return d;
}

struct DtwTable {
  Mat cost;
  // 0 = diagonal, 1 = from (i-1, j), 2 = from (i, j-1)
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> step;
};

DtwTable dtw_table(const Mat& a, const Mat& b) {
  if (a.rows() == 0 || b.rows() == 0)
    throw InvariantError("dtw: empty input sequence");
  if (a.cols() != b.cols())
    throw InvariantError("dtw: feature dimensions differ");
  const Mat d = pairwise_euclidean(a, b);
  DtwTable t;
  t.cost.resize(a.rows(), b.rows());
  t.step.resize(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      if (i == 0 && j == 0) {
        t.cost(i, j) = d(i, j);
        t.step(i, j) = 0;
      } else if (i == 0) {
        t.cost(i, j) = t.cost(i, j - 1) + d(i, j);
        t.step(i, j) = 2;
      } else if (j == 0) {
        t.cost(i, j) = t.cost(i - 1, j) + d(i, j);
        t.step(i, j) = 1;
      } else {
        const double diag = t.cost(i - 1, j - 1);
        const double up = t.cost(i - 1, j);
        const double left = t.cost(i, j - 1);
        double best = diag;
        int step = 0;
        if (up < best) {
          best = up;
          step = 1;
        }
        if (left < best) {
          best = left;
          step = 2;
        }
        t.cost(i, j) = best + d(i, j);
        t.step(i, j) = step;
      }
    }
  return t;
}

}  // namespace

DtwPath dtw_align(const Mat& a, const Mat& b) {
  const DtwTable t = dtw_table(a, b);
  DtwPath path;
  Eigen::Index i = a.rows() - 1, j = b.rows() - 1;
  path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    switch (t.step(i, j)) {
      case 0:
        --i;
        --j;
        break;
      case 1:
        --i;
        break;
      default:
        --j;
        break;
    }
    path.emplace_back(i, j);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double dtw_cost(const Mat& a, const Mat& b) {
  return dtw_table(a, b).cost(a.rows() - 1, b.rows() - 1);
}

double f0_rmse(const Vec& f0_syn, const Vec& f0_gt, const Mat& mel_syn,
               const Mat& mel_gt) {
  if (f0_syn.size() != mel_syn.rows())
    throw InvariantError("f0_rmse: synthesized F0 length != mel frames");
  if (f0_gt.size() != mel_gt.rows())
    throw InvariantError("f0_rmse: ground-truth F0 length != mel frames");
  const DtwPath path = dtw_align(mel_syn, mel_gt);

  Vec mapped = Vec::Zero(f0_gt.size());
  Vec hits = Vec::Zero(f0_gt.size());
  for (const auto& [s, g] : path) {
    mapped(g) += f0_syn(s);
    hits(g) += 1.0;
  }
  double sum_sq = 0.0;
  Eigen::Index voiced = 0;
  for (Eigen::Index g = 0; g < f0_gt.size(); ++g) {
    const double syn = mapped(g) / hits(g);  // contiguity: every frame hit
    if (f0_gt(g) > 0.0 && syn > 0.0) {
      const double diff = syn - f0_gt(g);
      sum_sq += diff * diff;
      ++voiced;
    }
  }
  if (voiced == 0) throw InvariantError("f0_rmse: zero voiced frames");
  return std::sqrt(sum_sq / static_cast<double>(voiced));
}

Mat mel_cepstra(const Mat& mel) {
  constexpr Eigen::Index kCoeffs = 12;  // 1..12, 0th excluded
  const Eigen::Index m = mel.cols();
  if (m < kCoeffs + 1)
    throw InvariantError("mel_cepstra: need at least 13 mel bins, got " +
                         std::to_string(m));
  // Orthonormal DCT-II basis, rows k = 1..12.
  Mat basis(kCoeffs, m);
  const double pi = std::acos(-1.0);
  for (Eigen::Index k = 1; k <= kCoeffs; ++k) {
    const double s = std::sqrt(2.0 / static_cast<double>(m));
    for (Eigen::Index n = 0; n < m; ++n)
      basis(k - 1, n) =
          s * std::cos(pi * static_cast<double>(k) * (2.0 * n + 1.0) /
                       (2.0 * static_cast<double>(m)));
  }
  return mel * basis.transpose();
}

double mcd(const Mat& mel_syn, const Mat& mel_gt) {
  if (mel_syn.rows() == 0 || mel_gt.rows() == 0)
    throw InvariantError("mcd: empty input");
  if (mel_syn.cols() != mel_gt.cols())
    throw InvariantError("mcd: mel dimensions differ");
  const Mat c_syn = mel_cepstra(mel_syn);
  const Mat c_gt = mel_cepstra(mel_gt);
  const DtwPath path = dtw_align(c_syn, c_gt);
  const double k = 10.0 / std::log(10.0);
  double acc = 0.0;
  for (const auto& [s, g] : path)
    acc += k * std::sqrt(2.0 * (c_syn.row(s) - c_gt.row(g)).squaredNorm());
  return acc / static_cast<double>(path.size());
}

double duration_mse(const std::vector<int>& pred, const std::vector<int>& gt) {
  if (pred.size() != gt.size())
    throw InvariantError("duration_mse: length mismatch");
  if (pred.empty()) throw InvariantError("duration_mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = std::log1p(static_cast<double>(pred[i])) -
                        std::log1p(static_cast<double>(gt[i]));
    acc += diff * diff;
  }
  return acc / static_cast<double>(pred.size());
}

double style_mse(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size())
    throw InvariantError("style_mse: length mismatch");
  if (pred.size() == 0) throw InvariantError("style_mse: empty embedding");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

void write_eval_report(const std::filesystem::path& path,
                       const std::vector<EvalRecord>& records) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write report: " + path.string());
  std::map<std::string, std::pair<double, int>> agg;
  for (const EvalRecord& r : records) {
    os << nlohmann::json{{"utterance_id", r.utterance_id},
                         {"metric", r.metric},
                         {"value", r.value}}
              .dump()
       << "\n";
    auto& [sum, count] = agg[r.metric];
    sum += r.value;
    ++count;
  }
  nlohmann::json summary;
  for (const auto& [metric, sc] : agg) summary[metric] = sc.first / sc.second;
  os << nlohmann::json{{"summary", summary}}.dump() << "\n";
}

Vec estimate_f0_autocorr(const Vec& samples, int sample_rate_hz, int frame_size,
                         int hop, double f_min_hz, double f_max_hz,
                         double voicing_threshold) {
  if (samples.size() < frame_size)
    throw InvariantError("estimate_f0: signal shorter than one frame");
  const auto lag_min = static_cast<Eigen::Index>(sample_rate_hz / f_max_hz);
  const auto lag_max = static_cast<Eigen::Index>(sample_rate_hz / f_min_hz);
  const Eigen::Index n_frames = (samples.size() - frame_size) / hop + 1;
  Vec f0(n_frames);
  for (Eigen::Index f = 0; f < n_frames; ++f) {
    const auto frame = samples.segment(f * hop, frame_size);
    const double energy = frame.squaredNorm();
    double best = 0.0;
    Eigen::Index best_lag = 0;
    for (Eigen::Index lag = lag_min; lag <= lag_max && lag < frame_size; ++lag) {
      const double r =
          frame.head(frame_size - lag).dot(frame.tail(frame_size - lag));
      if (r > best) {
        best = r;
        best_lag = lag;
      }
    }
    const bool voiced =
        energy > 0 && best_lag > 0 && best / energy > voicing_threshold;
    f0(f) = voiced ? static_cast<double>(sample_rate_hz) / best_lag : 0.0;
  }
  return f0;
}

}  // namespace castts::metrics
