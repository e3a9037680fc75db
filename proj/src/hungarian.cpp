#include "mtmc/hungarian.hpp"

#include <cmath>
#include <limits>

namespace mtmc {

namespace {

// Classic potentials algorithm (minimization). Requires 1 <= rows <= cols.
// Returns the matched column of every row.
std::vector<Index> min_assign_rows(const MatX& cost) {
  const Index n = cost.rows();
  const Index m = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<Index> p(static_cast<std::size_t>(m) + 1, 0);
  std::vector<Index> way(static_cast<std::size_t>(m) + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      Index j1 = 0;
      double delta = inf;
      for (Index j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) -
                           u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> col_of(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= m; ++j) {
    const Index i = p[static_cast<std::size_t>(j)];
    if (i != 0) col_of[static_cast<std::size_t>(i) - 1] = j - 1;
  }
  return col_of;
}

// Optimal (minimum) total over the submatrix picked out by `rows` × `cols`,
// all rows matched. Summed in ascending row order.
double sub_optimum(const MatX& cost, const std::vector<Index>& rows,
                   const std::vector<Index>& cols) {
  if (rows.empty()) return 0.0;
  MatX sub(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      sub(static_cast<Index>(r), static_cast<Index>(c)) =
          cost(rows[r], cols[c]);
  const auto col_of = min_assign_rows(sub);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r)
    total += sub(static_cast<Index>(r), col_of[r]);
  return total;
}

}  // namespace

Assignment solve_assignment_max(const MatX& scores) {
  const Index n = scores.rows();
  const Index m = scores.cols();
  Assignment out;
  out.col_of.assign(static_cast<std::size_t>(n), -1);
  if (n == 0) return out;
  if (!scores.allFinite()) throw DataError("assignment scores must be finite");

  // Pad with zero-scoring dummy columns so every matching is perfect on the
  // row side; dummies sit after the real columns, so the ascending-column
  // tie-break prefers real matches.
  const Index mp = std::max(n, m);
  MatX cost = MatX::Zero(n, mp);
  cost.leftCols(m) = -scores;

  const double tol =
      1e-9 * std::max(1.0, m > 0 ? scores.cwiseAbs().maxCoeff() : 0.0);

  std::vector<Index> free_cols(static_cast<std::size_t>(mp));
  for (Index c = 0; c < mp; ++c) free_cols[static_cast<std::size_t>(c)] = c;
  std::vector<Index> all_rows(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) all_rows[static_cast<std::size_t>(r)] = r;

  // Optimum of the subproblem on rows r.. and the remaining columns; rows are
  // fixed in ascending order to the lowest column that preserves it.
  double remaining = sub_optimum(cost, all_rows, free_cols);
  for (Index r = 0; r < n; ++r) {
    const std::vector<Index> tail_rows(all_rows.begin() + (r + 1),
                                       all_rows.end());
    for (std::size_t ci = 0; ci < free_cols.size(); ++ci) {
      const Index c = free_cols[ci];
      std::vector<Index> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(ci));
      const double sub = sub_optimum(cost, tail_rows, rest_cols);
      if (cost(r, c) + sub <= remaining + tol) {
        out.col_of[static_cast<std::size_t>(r)] = c < m ? c : -1;
        free_cols = std::move(rest_cols);
        remaining = sub;
        break;
      }
    }
  }

  out.total = 0.0;
  for (Index r = 0; r < n; ++r) {
    const Index c = out.col_of[static_cast<std::size_t>(r)];
    if (c >= 0) out.total += scores(r, c);
  }
  return out;
}

Assignment solve_assignment_min(const MatX& costs) {
  Assignment out = solve_assignment_max(-costs);
  out.total = 0.0;
  for (Index r = 0; r < costs.rows(); ++r) {
    const Index c = out.col_of[static_cast<std::size_t>(r)];
    if (c >= 0) out.total += costs(r, c);
  }
  return out;
}

}  // namespace mtmc
