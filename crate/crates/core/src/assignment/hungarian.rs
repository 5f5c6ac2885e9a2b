//! Exact minimum-cost assignment (Kuhn–Munkres with potentials) and
//! deterministic tie-breaking over the set of optimal assignments.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A one-to-one assignment between rows and columns of a cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the assigned costs, accumulated in row order.
    pub total_cost: f64,
}

impl Assignment {
    /// Column assigned to each row, `None` for unassigned rows.
    pub fn col_for_rows(&self, n_rows: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_rows];
        for &(r, c) in &self.pairs {
            out[r] = Some(c);
        }
        out
    }
}

/// Solves the rectangular assignment problem, returning `min(rows, cols)` pairs of
/// minimal total cost. Among optimal assignments the lexicographically smallest
/// pair list (by row, then column) is returned.
pub fn hungarian(cost: &Matrix) -> Result<Assignment> {
    let (n_rows, n_cols) = cost.shape();
    for r in 0..n_rows {
        for c in 0..n_cols {
            if !cost.get(r, c).is_finite() {
                return Err(Error::NonFiniteCost { row: r, col: c });
            }
        }
    }
    if n_rows == 0 || n_cols == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            total_cost: 0.0,
        });
    }

    let n = n_rows.max(n_cols);
    let padded = |r: usize, c: usize| -> f64 {
        if r < n_rows && c < n_cols {
            cost.get(r, c)
        } else {
            0.0
        }
    };

    // Shortest augmenting path formulation, 1-based with a virtual column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = padded(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    let mut row_at_col = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of_col[j] - 1] = j - 1;
        row_at_col[j - 1] = row_of_col[j] - 1;
    }

    // Every optimal assignment is a perfect matching on the zero-reduced-cost
    // edges of the dual solution; pick the lexicographically smallest one.
    let scale = (0..n_rows)
        .flat_map(|r| cost.row(r).iter().map(|x| x.abs()))
        .fold(0.0f64, f64::max);
    let eps = 1e-9 * (1.0 + scale);
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| padded(r, c) - u[r + 1] - v[c + 1] <= eps)
                .collect()
        })
        .collect();

    let mut matching = TightMatching {
        tight: &tight,
        col_of_row,
        row_at_col,
        fixed_rows: 0,
    };
    for r in 0..n_rows {
        matching.fix_smallest(r);
    }

    let mut pairs = Vec::with_capacity(n_rows.min(n_cols));
    let mut total_cost = 0.0;
    for r in 0..n_rows {
        let c = matching.col_of_row[r];
        if c < n_cols {
            pairs.push((r, c));
            total_cost += cost.get(r, c);
        }
    }
    Ok(Assignment { pairs, total_cost })
}

struct TightMatching<'a> {
    tight: &'a [Vec<bool>],
    col_of_row: Vec<usize>,
    row_at_col: Vec<usize>,
    /// Rows `0..fixed_rows` keep their columns.
    fixed_rows: usize,
}

impl TightMatching<'_> {
    fn fix_smallest(&mut self, row: usize) {
        debug_assert_eq!(row, self.fixed_rows);
        let n = self.col_of_row.len();
        for c in 0..n {
            if !self.tight[row][c] {
                continue;
            }
            if self.col_of_row[row] == c {
                break;
            }
            let holder = self.row_at_col[c];
            if holder < self.fixed_rows {
                continue;
            }
            // Move `holder` off column `c` along tight edges, ending at the
            // column `row` currently occupies.
            let target = self.col_of_row[row];
            let mut visited = vec![false; n];
            visited[c] = true;
            let mut path = Vec::new();
            if self.augment(holder, target, &mut visited, &mut path) {
                // path holds (row, new_col) moves, applied in reverse.
                for &(r, nc) in path.iter().rev() {
                    self.col_of_row[r] = nc;
                    self.row_at_col[nc] = r;
                }
                self.col_of_row[row] = c;
                self.row_at_col[c] = row;
                break;
            }
        }
        self.fixed_rows = row + 1;
    }

    fn augment(
        &self,
        r: usize,
        target: usize,
        visited: &mut [bool],
        path: &mut Vec<(usize, usize)>,
    ) -> bool {
        let n = visited.len();
        for c in 0..n {
            if visited[c] || !self.tight[r][c] {
                continue;
            }
            visited[c] = true;
            if c == target {
                path.push((r, c));
                return true;
            }
            let next = self.row_at_col[c];
            if next <= self.fixed_rows {
                continue;
            }
            if self.augment(next, target, visited, path) {
                path.push((r, c));
                return true;
            }
        }
        false
    }
}
