use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Minimum-cost assignment of every row to a distinct column (`rows <= cols`).
///
/// Shortest-augmenting-path Hungarian method with row/column potentials,
/// O(rows² · cols). Returns the column chosen for each row and the total cost;
/// `cols - rows` columns stay unassigned.
pub fn hungarian_match(cost: &Matrix) -> Result<(Vec<usize>, f64)> {
    let n = cost.rows();
    let m = cost.cols();
    if n > m {
        return Err(Error::RowsExceedColumns { rows: n, cols: m });
    }
    if cost.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cost matrix", "entries must be finite"));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }

    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut col_owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if col_owner[j] != 0 {
            row_to_col[col_owner[j] - 1] = j - 1;
        }
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.get(i, j))
        .sum();
    Ok((row_to_col, total))
}
