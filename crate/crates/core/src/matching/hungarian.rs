//! Kuhn-Munkres assignment on dense cost matrices.
//!
//! The shortest-augmenting-path form with row/column potentials runs in
//! O(n^3). Among equally cheap assignments the lexicographically smallest
//! (by row, then column) is returned: any optimal assignment only uses edges
//! that are tight under the final potentials, so the smallest one is found
//! by fixing rows in order to their lowest feasible tight column.

use super::MatchError;

/// Cost of a padded (dummy) row or column. Matches the worst `1 - IoU`.
pub const PAD_COST: f64 = 1.0;

const TIGHT_EPS: f64 = 1e-12;

/// Minimum-cost assignment for a `rows x cols` matrix given as rows.
///
/// Rectangular inputs are padded to square with [`PAD_COST`]; only pairs of
/// real rows and columns are returned, sorted by row.
pub fn kuhn_munkres(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>, MatchError> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != cols) {
        return Err(MatchError::RaggedCost);
    }
    if let Some((i, j)) = cost
        .iter()
        .enumerate()
        .find_map(|(i, r)| r.iter().position(|v| !v.is_finite()).map(|j| (i, j)))
    {
        return Err(MatchError::NonFiniteCost { row: i, col: j });
    }
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let n = rows.max(cols);
    let at = |i: usize, j: usize| if i < rows && j < cols { cost[i][j] } else { PAD_COST };
    let square: Vec<f64> = (0..n * n).map(|k| at(k / n, k % n)).collect();

    let (row_to_col, u, v) = solve(&square, n);
    let assignment = lexicographic_optimum(&square, n, &u, &v, &row_to_col)
        .filter(|lex| total(&square, n, lex) <= total(&square, n, &row_to_col))
        .unwrap_or(row_to_col);

    Ok(assignment
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| i < rows && j < cols)
        .collect())
}

fn total(square: &[f64], n: usize, assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &j)| square[i * n + j]).sum()
}

/// Returns (row -> col, row potentials, column potentials).
fn solve(a: &[f64], n: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based with index 0 as the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[owner[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Lexicographically smallest perfect matching over tight edges, starting
/// from the optimal matching `start`. `None` if the tight graph turns out
/// not to contain `start` (numerical trouble).
fn lexicographic_optimum(a: &[f64], n: usize, u: &[f64], v: &[f64], start: &[usize]) -> Option<Vec<usize>> {
    let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| a[i * n + j] - u[i] - v[j] <= TIGHT_EPS * scale * n as f64).collect())
        .collect();
    if (0..n).any(|i| !tight[i].contains(&start[i])) {
        return None;
    }
    let mut row_to_col = start.to_vec();
    let mut col_to_row = vec![0; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    let mut fixed_col = vec![false; n];
    for i in 0..n {
        for &j in &tight[i] {
            if fixed_col[j] {
                continue;
            }
            if row_to_col[i] == j {
                break;
            }
            // Try to give column j to row i: its current owner must move to
            // another column via an alternating path that ends at row i's
            // current column.
            let displaced = col_to_row[j];
            let target = row_to_col[i];
            let mut visited = vec![false; n];
            visited[j] = true;
            if let Some(path) = reroute(displaced, target, i, &tight, &col_to_row, &fixed_col, &mut visited) {
                // path: (row, new col) pairs along the alternating path
                for (r, c) in path {
                    row_to_col[r] = c;
                    col_to_row[c] = r;
                }
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
        fixed_col[row_to_col[i]] = true;
    }
    Some(row_to_col)
}

/// Depth-first alternating path moving `row` off its column, ending at the
/// freed column `target`.
fn reroute(
    row: usize,
    target: usize,
    skip_row: usize,
    tight: &[Vec<usize>],
    col_to_row: &[usize],
    fixed_col: &[bool],
    visited: &mut [bool],
) -> Option<Vec<(usize, usize)>> {
    for &c in &tight[row] {
        if fixed_col[c] || visited[c] {
            continue;
        }
        visited[c] = true;
        if c == target {
            return Some(vec![(row, c)]);
        }
        let next = col_to_row[c];
        if next == skip_row {
            continue;
        }
        if let Some(mut path) = reroute(next, target, skip_row, tight, col_to_row, fixed_col, visited) {
            path.push((row, c));
            return Some(path);
        }
    }
    None
}
