//! Linear sum assignment on dense square cost matrices.
//!
//! [`hungarian`] is the classical potentials-based O(n³) method;
//! [`lapjv`] is the Jonker–Volgenant algorithm (column reduction, augmenting
//! row reduction, then shortest augmenting paths).

use super::GedError;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, GedError> {
        if data.len() != n * n {
            return Err(GedError::Assignment(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(GedError::Assignment("cost matrix entries must be finite".into()));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, GedError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(GedError::Assignment("cost matrix must be square".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub row_to_col: Vec<usize>,
    pub cost: f64,
}

fn finish(m: &CostMatrix, row_to_col: Vec<usize>) -> Assignment {
    let cost = row_to_col.iter().enumerate().map(|(i, &j)| m.get(i, j)).sum();
    Assignment { row_to_col, cost }
}

/// Hungarian method with row/column potentials.
pub fn hungarian(m: &CostMatrix) -> Assignment {
    let n = m.n;
    // 1-based columns; column 0 is a virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let row = m.row(i0 - 1);
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    finish(m, row_to_col)
}

const NONE: usize = usize::MAX;

/// Jonker–Volgenant shortest augmenting path solver.
pub fn lapjv(m: &CostMatrix) -> Assignment {
    let n = m.n;
    if n == 0 {
        return finish(m, Vec::new());
    }
    if n == 1 {
        return finish(m, vec![0]);
    }
    let mut x = vec![NONE; n]; // row -> col
    let mut y = vec![NONE; n]; // col -> row
    let mut v = vec![0.0; n];
    let mut free_rows = Vec::with_capacity(n);

    column_reduction(m, &mut x, &mut y, &mut v, &mut free_rows);
    for _ in 0..2 {
        if free_rows.is_empty() {
            break;
        }
        free_rows = augmenting_row_reduction(m, &free_rows, &mut x, &mut y, &mut v);
    }
    if !free_rows.is_empty() {
        augment(m, &free_rows, &mut x, &mut y, &mut v);
    }
    finish(m, x)
}

/// Column reduction plus reduction transfer; fills `free_rows`.
fn column_reduction(m: &CostMatrix, x: &mut [usize], y: &mut [usize], v: &mut [f64], free_rows: &mut Vec<usize>) {
    let n = m.n;
    v.fill(f64::INFINITY);
    for i in 0..n {
        for (j, &c) in m.row(i).iter().enumerate() {
            if c < v[j] {
                v[j] = c;
                y[j] = i;
            }
        }
    }
    let mut unique = vec![true; n];
    for j in (0..n).rev() {
        let i = y[j];
        if x[i] == NONE {
            x[i] = j;
        } else {
            unique[i] = false;
            y[j] = NONE;
        }
    }
    for i in 0..n {
        if x[i] == NONE {
            free_rows.push(i);
        } else if unique[i] {
            let j = x[i];
            let min = m
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j2, _)| j2 != j)
                .map(|(j2, &c)| c - v[j2])
                .fold(f64::INFINITY, f64::min);
            v[j] -= min;
        }
    }
}

fn augmenting_row_reduction(
    m: &CostMatrix,
    free_rows: &[usize],
    x: &mut [usize],
    y: &mut [usize],
    v: &mut [f64],
) -> Vec<usize> {
    let n = m.n;
    let mut queue = free_rows.to_vec();
    let mut new_free = Vec::new();
    let mut current = 0;
    let mut rr_cnt = 0;
    while current < queue.len() {
        rr_cnt += 1;
        let free_i = queue[current];
        current += 1;
        let row = m.row(free_i);
        let (mut j1, mut v1) = (0, row[0] - v[0]);
        let (mut j2, mut v2) = (NONE, f64::INFINITY);
        for j in 1..n {
            let c = row[j] - v[j];
            if c < v2 {
                if c >= v1 {
                    v2 = c;
                    j2 = j;
                } else {
                    v2 = v1;
                    v1 = c;
                    j2 = j1;
                    j1 = j;
                }
            }
        }
        let mut i0 = y[j1];
        let v1_new = v[j1] - (v2 - v1);
        let v1_lowers = v1_new < v[j1];
        if rr_cnt < current * n {
            if v1_lowers {
                v[j1] = v1_new;
            } else if i0 != NONE && j2 != NONE {
                j1 = j2;
                i0 = y[j2];
            }
            if i0 != NONE {
                if v1_lowers {
                    // re-examine the displaced row immediately
                    current -= 1;
                    queue[current] = i0;
                } else {
                    new_free.push(i0);
                }
            }
        } else if i0 != NONE {
            new_free.push(i0);
        }
        x[free_i] = j1;
        y[j1] = free_i;
        if i0 != NONE {
            x[i0] = NONE;
        }
    }
    new_free
}

fn augment(m: &CostMatrix, free_rows: &[usize], x: &mut [usize], y: &mut [usize], v: &mut [f64]) {
    let n = m.n;
    let mut pred = vec![0usize; n];
    let mut cols = vec![0usize; n];
    let mut d = vec![0.0; n];
    for &free_i in free_rows {
        let mut j = shortest_path(m, free_i, y, v, &mut pred, &mut cols, &mut d);
        loop {
            let i = pred[j];
            y[j] = i;
            let next = x[i];
            x[i] = j;
            if i == free_i {
                break;
            }
            j = next;
        }
    }
}

/// Dijkstra-like search from `start_i` to an unassigned column; updates `v`.
fn shortest_path(
    m: &CostMatrix,
    start_i: usize,
    y: &[usize],
    v: &mut [f64],
    pred: &mut [usize],
    cols: &mut [usize],
    d: &mut [f64],
) -> usize {
    let n = m.n;
    let row = m.row(start_i);
    for j in 0..n {
        cols[j] = j;
        pred[j] = start_i;
        d[j] = row[j] - v[j];
    }
    // cols[..ready] are settled, cols[lo..hi] are at the current minimum
    let (mut lo, mut hi, mut ready) = (0, 0, 0);
    let final_j = 'search: loop {
        if lo == hi {
            ready = lo;
            hi = lo + 1;
            let mut mind = d[cols[lo]];
            // the scan range is fixed at entry; hi moves within it
            let first = hi;
            for k in first..n {
                let j = cols[k];
                if d[j] <= mind {
                    if d[j] < mind {
                        hi = lo;
                        mind = d[j];
                    }
                    cols[k] = cols[hi];
                    cols[hi] = j;
                    hi += 1;
                }
            }
            for &j in &cols[lo..hi] {
                if y[j] == NONE {
                    break 'search j;
                }
            }
        }
        // scan
        while lo != hi {
            let j = cols[lo];
            lo += 1;
            let i = y[j];
            let mind = d[j];
            let ri = m.row(i);
            let h = ri[j] - v[j] - mind;
            let mut k = hi;
            while k < n {
                let j = cols[k];
                let cred = ri[j] - v[j] - h;
                if cred < d[j] {
                    d[j] = cred;
                    pred[j] = i;
                    if cred == mind {
                        if y[j] == NONE {
                            break 'search j;
                        }
                        cols[k] = cols[hi];
                        cols[hi] = j;
                        hi += 1;
                    }
                }
                k += 1;
            }
        }
    };
    let mind = d[cols[lo.min(n - 1)]];
    for &j in &cols[..ready] {
        v[j] += d[j] - mind;
    }
    final_j
}
