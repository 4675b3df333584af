//! Bipartite assignment of tracklets (rows) to detections (columns).

use serde::{Deserialize, Serialize};

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Sum of the costs of `pairs`, accumulated in the given order.
    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignStrategy {
    #[default]
    Hungarian,
    Greedy,
}

impl std::str::FromStr for AssignStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hungarian" => Ok(Self::Hungarian),
            "greedy" => Ok(Self::Greedy),
            other => Err(format!("unknown assignment strategy `{other}`")),
        }
    }
}

impl std::fmt::Display for AssignStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Hungarian => "hungarian",
            Self::Greedy => "greedy",
        })
    }
}

#[inline]
fn admissible(cost: f64, gate: f64) -> bool {
    cost.is_finite() && cost <= gate
}

/// Matches rows to columns using only pairs with `cost <= gate`.
///
/// Result pairs are sorted by row. Non-finite costs are never admissible.
pub fn assign(costs: &CostMatrix, gate: f64, strategy: AssignStrategy) -> Vec<(usize, usize)> {
    match strategy {
        AssignStrategy::Hungarian => hungarian(costs, gate),
        AssignStrategy::Greedy => greedy(costs, gate),
    }
}

/// Repeatedly takes the lowest remaining admissible cost. Ties break by
/// lower row, then lower column.
pub fn greedy(costs: &CostMatrix, gate: f64) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for r in 0..costs.rows {
        for (c, &v) in costs.row(r).iter().enumerate() {
            if admissible(v, gate) {
                candidates.push((v, r, c));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut row_used = vec![false; costs.rows];
    let mut col_used = vec![false; costs.cols];
    let mut out = Vec::new();
    for (_, r, c) in candidates {
        if !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            out.push((r, c));
        }
    }
    out.sort_unstable();
    out
}

/// Optimal assignment restricted to admissible pairs.
///
/// Among all matchings that use only admissible pairs, returns one with the
/// largest number of pairs and, among those, the smallest total cost.
/// Inadmissible entries are replaced by a penalty larger than any possible
/// sum of admissible costs, and the padded problem is solved with the
/// shortest augmenting path method (O(n^2 m)).
pub fn hungarian(costs: &CostMatrix, gate: f64) -> Vec<(usize, usize)> {
    if costs.is_empty() {
        return Vec::new();
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &costs.data {
        if admissible(v, gate) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        return Vec::new();
    }

    let transpose = costs.rows > costs.cols;
    let (n, m) = if transpose {
        (costs.cols, costs.rows)
    } else {
        (costs.rows, costs.cols)
    };
    let penalty = (hi - lo) * n as f64 + 1.0;
    let shifted = |i: usize, j: usize| {
        let v = if transpose { costs.get(j, i) } else { costs.get(i, j) };
        if admissible(v, gate) {
            v - lo
        } else {
            penalty
        }
    };

    let row_of_col = solve_rectangular(n, m, shifted);

    let mut out = Vec::with_capacity(n);
    for (j, &i) in row_of_col.iter().enumerate() {
        let Some(i) = i else { continue };
        let (r, c) = if transpose { (j, i) } else { (i, j) };
        if admissible(costs.get(r, c), gate) {
            out.push((r, c));
        }
    }
    out.sort_unstable();
    out
}

/// Minimum-cost assignment of all `n` rows to distinct columns (`n <= m`).
/// Returns, for each column, the row assigned to it.
fn solve_rectangular(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    debug_assert!(n <= m);
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut min_to = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        min_to.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
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

    (1..=m)
        .map(|j| (owner[j] != 0).then(|| owner[j] - 1))
        .collect()
}
