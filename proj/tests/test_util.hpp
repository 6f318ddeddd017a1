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

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "castts/nn/modules.hpp"

namespace castts::testutil {

inline Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                      double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

/// Central-difference check of already-computed analytic gradients.
/// `loss` re-evaluates the scalar objective at the current parameter
/// values. Gradients below `zero_floor` on both sides count as matching.
inline void check_gradients_fd(const std::vector<nn::Parameter*>& params,
                               const std::function<double()>& loss,
                               int samples, Rng& rng, double tol = 1e-4,
                               double zero_floor = 1e-7) {
  std::vector<std::tuple<nn::Parameter*, Eigen::Index, Eigen::Index>> cells;
  for (nn::Parameter* p : params)
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j)
        cells.emplace_back(p, i, j);
  std::shuffle(cells.begin(), cells.end(), rng);
  const int n = std::min<int>(samples, static_cast<int>(cells.size()));
  int checked = 0;
  for (int c = 0; c < n; ++c) {
    auto [p, i, j] = cells[c];
    const double orig = p->value(i, j);
    const double h = 1e-5 * std::max(0.1, std::abs(orig));
    p->value(i, j) = orig + h;
    const double fp = loss();
    p->value(i, j) = orig - h;
    const double fm = loss();
    p->value(i, j) = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double an = p->grad(i, j);
    const double mag = std::max(std::abs(fd), std::abs(an));
    if (mag < zero_floor) {
      ++checked;
      continue;
    }
    const double rel = std::abs(fd - an) / mag;
    INFO("param " << p->name << "(" << i << "," << j << "): analytic " << an
                  << " vs fd " << fd);
    REQUIRE(rel < tol);
    ++checked;
  }
  REQUIRE(checked == n);
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("castts_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace castts::testutil
