// Copyright 2026 The simtrack Authors.
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

// Exact linear assignment (Kuhn-Munkres with potentials, O(n^3)).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <vector>

namespace simtrack {

/// Minimum-cost perfect assignment on a square cost matrix.
/// Returns the column assigned to each row.
template <typename Derived>
std::vector<int> solve_square_assignment(const Eigen::MatrixBase<Derived>& cost) {
  using Scalar = typename Derived::Scalar;
  const int n = static_cast<int>(cost.rows());
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  // 1-based potentials; p[j] is the row matched to column j.
  std::vector<Scalar> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      Scalar delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

/// Maximum-weight bipartite matching on a rectangular weight matrix.
/// Pairs with weight <= 0 are treated as forbidden and never returned.
/// Result has one entry per row: the matched column, or -1.
template <typename Derived>
std::vector<int> max_weight_matching(const Eigen::MatrixBase<Derived>& weight) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index rows = weight.rows();
  const Eigen::Index cols = weight.cols();
  std::vector<int> result(static_cast<std::size_t>(rows), -1);
  if (rows == 0 || cols == 0) return result;

  const Eigen::Index n = std::max(rows, cols);
  const Scalar top = std::max(weight.maxCoeff(), Scalar(0));
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cost =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, top);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (weight(i, j) > Scalar(0)) cost(i, j) = top - weight(i, j);
    }
  }

  const std::vector<int> assigned = solve_square_assignment(cost);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int j = assigned[static_cast<std::size_t>(i)];
    if (j >= 0 && j < cols && weight(i, j) > Scalar(0)) result[static_cast<std::size_t>(i)] = j;
  }
  return result;
}

}  // namespace simtrack
