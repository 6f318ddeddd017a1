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

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "castts/metrics.hpp"
#include "test_util.hpp"

using namespace castts;
using namespace castts::metrics;
using testutil::random_mat;

namespace {

/// Exhaustive enumeration of all monotone paths over the step set
/// {(1,0),(0,1),(1,1)}; returns the minimum cumulative Euclidean cost.
double brute_force_dtw(const Mat& a, const Mat& b, Eigen::Index i,
                       Eigen::Index j) {
  const double d = (a.row(i) - b.row(j)).norm();
  if (i == 0 && j == 0) return d;
  double best = std::numeric_limits<double>::infinity();
  if (i > 0 && j > 0) best = std::min(best, brute_force_dtw(a, b, i - 1, j - 1));
  if (i > 0) best = std::min(best, brute_force_dtw(a, b, i - 1, j));
  if (j > 0) best = std::min(best, brute_force_dtw(a, b, i, j - 1));
  return d + best;
}

}  // namespace

TEST_CASE("dtw: identical sequences align on the pure diagonal at cost 0") {
  Rng rng(3);
  const Mat a = random_mat(6, 4, rng);
  const DtwPath path = dtw_align(a, a);
  REQUIRE(path.size() == 6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(path[i].first == i);
    CHECK(path[i].second == i);
  }
  CHECK(dtw_cost(a, a) == 0.0);
}

TEST_CASE("dtw: one frame against three is forced") {
  Rng rng(5);
  const Mat a = random_mat(1, 4, rng);
  const Mat b = random_mat(3, 4, rng);
  const DtwPath path = dtw_align(a, b);
  REQUIRE(path.size() == 3);
  CHECK(path[0] == std::pair<Eigen::Index, Eigen::Index>{0, 0});
  CHECK(path[1] == std::pair<Eigen::Index, Eigen::Index>{0, 1});
  CHECK(path[2] == std::pair<Eigen::Index, Eigen::Index>{0, 2});
}

TEST_CASE("dtw: path cost matches exhaustive enumeration, cost is symmetric") {
  Rng rng(7);
  std::uniform_int_distribution<int> len(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat a = random_mat(len(rng), 3, rng);
    const Mat b = random_mat(len(rng), 3, rng);
    const double got = dtw_cost(a, b);
    const double want = brute_force_dtw(a, b, a.rows() - 1, b.rows() - 1);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(dtw_cost(b, a) == doctest::Approx(got).epsilon(1e-12));
    // Path endpoints and monotonicity.
    const DtwPath path = dtw_align(a, b);
    CHECK(path.front() == std::pair<Eigen::Index, Eigen::Index>{0, 0});
    CHECK(path.back() ==
          std::pair<Eigen::Index, Eigen::Index>{a.rows() - 1, b.rows() - 1});
    for (std::size_t k = 1; k < path.size(); ++k) {
      const auto di = path[k].first - path[k - 1].first;
      const auto dj = path[k].second - path[k - 1].second;
      CHECK(di >= 0);
      CHECK(dj >= 0);
      CHECK(di + dj >= 1);
      CHECK(di <= 1);
      CHECK(dj <= 1);
    }
  }
  CHECK_THROWS_AS(dtw_align(Mat(0, 3), Mat::Zero(2, 3)), InvariantError);
}

TEST_CASE("f0 rmse: identity, constant shift, voiced-only accounting") {
  Rng rng(11);
  const Mat mel = random_mat(12, 16, rng);
  Vec f0(12);
  for (int i = 0; i < 12; ++i) f0(i) = (i % 4 == 0) ? 0.0 : 150.0 + 5.0 * i;

  CHECK(f0_rmse(f0, f0, mel, mel) == 0.0);

  Vec shifted = f0;
  for (int i = 0; i < 12; ++i)
    if (f0(i) > 0) shifted(i) = f0(i) + 50.0;
  CHECK(std::abs(f0_rmse(shifted, f0, mel, mel) - 50.0) < 1e-9);

  SUBCASE("zero voiced frames is an error") {
    const Vec silent = Vec::Zero(12);
    CHECK_THROWS_AS(f0_rmse(silent, silent, mel, mel), InvariantError);
  }
  SUBCASE("length mismatches are errors") {
    CHECK_THROWS_AS(f0_rmse(f0.head(5), f0, mel, mel), InvariantError);
    CHECK_THROWS_AS(f0_rmse(f0, f0.head(5), mel, mel), InvariantError);
  }
}

TEST_CASE("mcd: identity and the single-frame analytic value") {
  Rng rng(13);
  const Mat mel = random_mat(9, 16, rng);
  CHECK(mcd(mel, mel) == 0.0);

  const Mat a = random_mat(1, 16, rng);
  const Mat b = random_mat(1, 16, rng);
  const Mat ca = mel_cepstra(a);
  const Mat cb = mel_cepstra(b);
  const double r = (ca - cb).norm();
  const double want = 10.0 / std::log(10.0) * std::sqrt(2.0) * r;
  CHECK(std::abs(mcd(a, b) - want) < 1e-9);

  SUBCASE("cepstra exclude the 0th coefficient: constant offsets vanish") {
    Mat c = a;
    c.array() += 3.0;
    CHECK((mel_cepstra(c) - mel_cepstra(a)).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("too few mel bins is an error") {
    CHECK_THROWS_AS(mel_cepstra(Mat::Zero(2, 12)), InvariantError);
  }
}

TEST_CASE("duration mse: identity and log-domain definition") {
  CHECK(duration_mse({3, 5, 2}, {3, 5, 2}) == 0.0);
  // One phoneme off: pred 4 vs gt 2 over 3 phonemes.
  const double e = std::log1p(4.0) - std::log1p(2.0);
  CHECK(duration_mse({4, 5, 2}, {2, 5, 2}) ==
        doctest::Approx(e * e / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(duration_mse({1, 2}, {1}), InvariantError);
}

TEST_CASE("style mse: identity and unit difference") {
  Vec a = Vec::Zero(8), b = Vec::Zero(8);
  CHECK(style_mse(a, b) == 0.0);
  b(3) = 1.0;
  CHECK(style_mse(a, b) == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  CHECK_THROWS_AS(style_mse(Vec::Zero(3), Vec::Zero(4)), InvariantError);
}

TEST_CASE("metrics are non-negative on random inputs") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat a = random_mat(5 + trial % 3, 16, rng);
    const Mat b = random_mat(4 + trial % 4, 16, rng);
    CHECK(dtw_cost(a, b) >= 0.0);
    CHECK(mcd(a, b) >= 0.0);
  }
}

TEST_CASE("evaluation report: one record per line plus a summary") {
  const auto dir = testutil::temp_dir("report");
  write_eval_report(dir / "report.jsonl",
                    {{"u1", "mcd", 4.0}, {"u2", "mcd", 6.0},
                     {"u1", "style_mse", 0.5}});
  std::ifstream is(dir / "report.jsonl");
  std::string line;
  int lines = 0;
  std::string last;
  while (std::getline(is, line))
    if (!line.empty()) {
      last = line;
      ++lines;
    }
  CHECK(lines == 4);
  CHECK(last.find("summary") != std::string::npos);
  CHECK(last.find("\"mcd\":5.0") != std::string::npos);
}

TEST_CASE("autocorrelation pitch tracker finds a sine's frequency") {
  const int sr = 24000;
  Vec sine(8192);
  for (Eigen::Index i = 0; i < sine.size(); ++i)
    sine(i) = std::sin(2.0 * std::acos(-1.0) * 150.0 * i / sr);
  const Vec f0 = estimate_f0_autocorr(sine, sr);
  REQUIRE(f0.size() > 0);
  for (Eigen::Index i = 0; i < f0.size(); ++i)
    CHECK(std::abs(f0(i) - 150.0) < 5.0);

  // Noise-free silence is unvoiced.
  const Vec silence = Vec::Zero(4096);
  const Vec none = estimate_f0_autocorr(silence, sr);
  for (Eigen::Index i = 0; i < none.size(); ++i) CHECK(none(i) == 0.0);
}
