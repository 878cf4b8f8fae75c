#pragma once

// Linear assignment (Kuhn-Munkres with potentials, O(n^3)).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hyfem/errors.hpp"

namespace hyfem::matching {

struct Assignment {
  std::vector<Eigen::Index> row_to_col;
  double total_cost = 0;
};

namespace detail {

// Re-routes an optimal matching to the lexicographically smallest optimal one
// (lowest row first, each row taking the lowest feasible column). Every
// optimal matching lives on the tight edges of an optimal dual, so it is
// enough to search perfect matchings on that subgraph.
class TightGraphRefiner {
 public:
  TightGraphRefiner(std::vector<std::vector<char>> tight, std::vector<Eigen::Index> col_of)
      : tight_(std::move(tight)), col_of_(std::move(col_of)), row_of_(col_of_.size()) {
    for (std::size_t i = 0; i < col_of_.size(); ++i) row_of_[static_cast<std::size_t>(col_of_[i])] = Eigen::Index(i);
  }

  std::vector<Eigen::Index> run() {
    const auto n = col_of_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto current = static_cast<std::size_t>(col_of_[i]);
      for (std::size_t j = 0; j < current; ++j) {
        if (!tight_[i][j] || row_of_[j] < Eigen::Index(i)) continue;
        if (try_reassign(i, j)) break;
      }
    }
    return col_of_;
  }

 private:
  bool try_reassign(std::size_t i, std::size_t j) {
    const auto saved_col = col_of_;
    const auto saved_row = row_of_;
    const auto displaced = static_cast<std::size_t>(row_of_[j]);
    const auto freed = static_cast<std::size_t>(col_of_[i]);
    col_of_[i] = Eigen::Index(j);
    row_of_[j] = Eigen::Index(i);
    row_of_[freed] = -1;
    col_of_[displaced] = -1;
    fixed_upto_ = i;
    visited_.assign(col_of_.size(), 0);
    if (augment(displaced)) return true;
    col_of_ = saved_col;
    row_of_ = saved_row;
    return false;
  }

  // Kuhn augmenting path over columns not owned by rows <= fixed_upto_.
  bool augment(std::size_t row) {
    for (std::size_t k = 0; k < col_of_.size(); ++k) {
      if (!tight_[row][k] || visited_[k]) continue;
      const Eigen::Index owner = row_of_[k];
      if (owner >= 0 && owner <= Eigen::Index(fixed_upto_)) continue;
      visited_[k] = 1;
      if (owner < 0 || augment(static_cast<std::size_t>(owner))) {
        row_of_[k] = Eigen::Index(row);
        col_of_[row] = Eigen::Index(k);
        return true;
      }
    }
    return false;
  }

  std::vector<std::vector<char>> tight_;
  std::vector<Eigen::Index> col_of_;
  std::vector<Eigen::Index> row_of_;
  std::vector<char> visited_;
  std::size_t fixed_upto_ = 0;
};

}  // namespace detail

// Minimum-cost perfect matching of a square cost matrix. Among optimal
// matchings the one with the lowest column for row 0, then row 1, ... is
// returned. total_cost is summed in row order.
template <typename Derived>
Assignment hungarian(const Eigen::MatrixBase<Derived>& cost_expr) {
  const Eigen::MatrixXd cost = cost_expr.template cast<double>();
  if (cost.rows() != cost.cols()) throw InputError("hungarian: cost matrix must be square");
  if (!cost.allFinite()) throw InputError("hungarian: cost matrix has non-finite entries");
  const auto n = static_cast<std::size_t>(cost.rows());
  Assignment out;
  if (n == 0) return out;

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual start column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(Eigen::Index(i0 - 1), Eigen::Index(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Eigen::Index> col_of(n);
  for (std::size_t j = 1; j <= n; ++j) col_of[p[j] - 1] = Eigen::Index(j - 1);

  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale * static_cast<double>(n);
  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      tight[i][j] = cost(Eigen::Index(i), Eigen::Index(j)) - u[i + 1] - v[j + 1] <= tol;
  for (std::size_t i = 0; i < n; ++i) tight[i][static_cast<std::size_t>(col_of[i])] = 1;

  out.row_to_col = detail::TightGraphRefiner(std::move(tight), std::move(col_of)).run();
  for (std::size_t i = 0; i < n; ++i) out.total_cost += cost(Eigen::Index(i), out.row_to_col[i]);
  return out;
}

}  // namespace hyfem::matching
