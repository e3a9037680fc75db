#pragma once

#include "mtmc/types.hpp"

namespace mtmc {

/// Result of a rectangular assignment: `col_of[r]` is the column matched to
/// row r, or -1 when the row stays unmatched (possible when rows > cols).
struct Assignment {
  std::vector<Index> col_of;
  double total = 0.0;
};

/// Maximum-score one-to-one assignment on a dense rectangular score matrix.
/// Every row of the shorter side is matched. Among equal-total optima the
/// lexicographically smallest column sequence (row 0 first) is returned.
/// The reported total sums matched scores in ascending row order.
Assignment solve_assignment_max(const MatX& scores);

/// Minimum-cost counterpart; same shape rules and tie-break.
Assignment solve_assignment_min(const MatX& costs);

}  // namespace mtmc
