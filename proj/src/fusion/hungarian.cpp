#include "coopsim/fusion/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coopsim::fusion {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Try to give unmatched row `r` a column, moving other non-fixed rows along
// tight edges. Rows < first_free are fixed and never moved.
bool augment(int r, int first_free, const std::vector<std::vector<int>>& tight_cols, std::vector<int>& row_to_col,
             std::vector<int>& col_to_row, std::vector<char>& visited) {
  for (int c : tight_cols[r]) {
    if (visited[c]) continue;
    visited[c] = 1;
    const int owner = col_to_row[c];
    if (owner >= 0 && owner < first_free) continue;
    if (owner < 0 || augment(owner, first_free, tight_cols, row_to_col, col_to_row, visited)) {
      row_to_col[r] = c;
      col_to_row[c] = r;
      return true;
    }
  }
  return false;
}

}  // namespace

AssignmentPairs hungarian(const CostMatrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n == 0 || m == 0) return {};
  const int N = std::max(n, m);

  double max_abs = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double c = cost(i, j);
      if (std::isnan(c) || c == -kInf) throw std::invalid_argument("hungarian: NaN or -inf cost");
      if (c != kInf) max_abs = std::max(max_abs, std::abs(c));
    }
  }
  const double forbidden = 2.0 * (max_abs + 1.0) * (N + 1);

  std::vector<std::vector<double>> a(N, std::vector<double>(N, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) a[i][j] = cost(i, j) == kInf ? forbidden : cost(i, j);

  // 1-based potentials formulation; p[j] is the row matched to column j.
  std::vector<double> u(N + 1, 0.0), v(N + 1, 0.0);
  std::vector<int> p(N + 1, 0), way(N + 1, 0);
  for (int i = 1; i <= N; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(N + 1, kInf);
    std::vector<char> used(N + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= N; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= N; ++j) {
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

  std::vector<int> row_to_col(N, -1), col_to_row(N, -1);
  for (int j = 1; j <= N; ++j) {
    row_to_col[p[j] - 1] = j - 1;
    col_to_row[j - 1] = p[j] - 1;
  }

  // Every optimal assignment uses only edges with zero reduced cost.
  const double eps = 1e-12 * forbidden * N;
  std::vector<std::vector<int>> tight_cols(N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      if (a[i][j] - u[i + 1] - v[j + 1] <= eps || row_to_col[i] == j) tight_cols[i].push_back(j);
    }
  }

  // Fix rows in order, each to the smallest column that still admits a
  // perfect tight matching for the remaining rows.
  for (int i = 0; i < N; ++i) {
    for (int c : tight_cols[i]) {
      if (c == row_to_col[i]) break;
      const int owner = col_to_row[c];
      if (owner < i) continue;
      auto r2c = row_to_col;
      auto c2r = col_to_row;
      c2r[r2c[i]] = -1;
      r2c[i] = c;
      c2r[c] = i;
      r2c[owner] = -1;
      std::vector<char> visited(N, 0);
      visited[c] = 1;
      if (augment(owner, i + 1, tight_cols, r2c, c2r, visited)) {
        row_to_col = std::move(r2c);
        col_to_row = std::move(c2r);
        break;
      }
    }
  }

  AssignmentPairs out;
  for (int i = 0; i < n; ++i) {
    const int j = row_to_col[i];
    if (j < m && cost(i, j) != kInf) out.emplace_back(i, j);
  }
  return out;
}

double assignment_cost(const CostMatrix& cost, const AssignmentPairs& pairs) {
  double total = 0.0;
  for (const auto& [i, j] : pairs) total += cost(i, j);
  return total;
}

}  // namespace coopsim::fusion
