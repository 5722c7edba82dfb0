#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "subdisc/error.hpp"

namespace subdisc {

/// Minimum-cost assignment on a rows x cols cost matrix (row-major) with
/// rows <= cols: every row gets a distinct column. Returns the column of each
/// row. Shortest augmenting path with dual potentials, O(rows^2 * cols).
///
/// T must be a signed arithmetic type; integral T gives exact results.
template <typename T>
std::vector<std::size_t> min_cost_assignment(std::span<const T> cost, std::size_t rows, std::size_t cols) {
  if (rows > cols) throw Error(ErrorCode::InvalidArgument, "assignment needs rows <= cols");
  if (cost.size() != rows * cols) throw Error(ErrorCode::DimensionMismatch, "cost matrix size");
  if (rows == 0) return {};

  constexpr T inf = std::numeric_limits<T>::has_infinity ? std::numeric_limits<T>::infinity()
                                                         : std::numeric_limits<T>::max() / 4;
  // 1-based; column 0 is the virtual source.
  std::vector<T> u(rows + 1, T{}), v(cols + 1, T{});
  std::vector<std::size_t> match(cols + 1, 0), way(cols + 1, 0);
  std::vector<T> min_slack(cols + 1);
  std::vector<char> used(cols + 1);

  for (std::size_t row = 1; row <= rows; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), char{0});
    do {
      used[col0] = 1;
      const std::size_t r0 = match[col0];
      T delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= cols; ++c) {
        if (used[c]) continue;
        const T slack = cost[(r0 - 1) * cols + (c - 1)] - u[r0] - v[c];
        if (slack < min_slack[c]) {
          min_slack[c] = slack;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= cols; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<std::size_t> assignment(rows);
  for (std::size_t c = 1; c <= cols; ++c) {
    if (match[c] != 0) assignment[match[c] - 1] = c - 1;
  }
  return assignment;
}

}  // namespace subdisc
