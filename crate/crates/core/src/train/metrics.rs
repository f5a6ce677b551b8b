//! Regression and ranking metrics.
//!
//! Ranks are 1-based with ties sharing the average rank. Kendall's tau is
//! the tau-b variant, computed in `O(n log n)` by sorting and counting merge
//! inversions. Top-k sets break score ties by graph id.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("k = {k} exceeds the {len} ranked items")]
    KTooLarge { k: usize, len: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

type Result<T> = std::result::Result<T, MetricError>;

fn check(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(i) = pred.iter().chain(truth).position(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite(i % pred.len()));
    }
    Ok(())
}

/// Mean squared error.
pub fn mse_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(total / pred.len() as f64)
}

/// `(mse, mae)`.
pub fn regression_metrics(pred: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    let mse = mse_loss(pred, truth)?;
    let mae = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64;
    Ok((mse, mae))
}

/// 1-based ranks in ascending value order, ties averaged.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j share ranks i+1..=j+1
        let r = (i + j + 2) as f64 / 2.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman's rho as the Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check(x, y)?;
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Number of tied pairs among consecutive equal runs of a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Sorts `v` by `total_cmp`, returning the number of inversions removed.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], &mut buf[..mid]) + count_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..].copy_from_slice(&v[j..]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b; `None` when either side is constant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check(x, y)?;
    let n = x.len() as u64;
    let n0 = n * (n - 1) / 2;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let n1 = tied_pairs(order.iter().map(|&i| x[i]));
    let n3 = tied_pairs(order.iter().map(|&i| (x[i], y[i])));
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = count_inversions(&mut ys, &mut buf);
    let n2 = tied_pairs(ys.iter().copied());
    if n0 == n1 || n0 == n2 {
        return Ok(None);
    }
    // concordant minus discordant
    let s = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Ok(Some(s as f64 / ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt()))
}

/// Indices of the `k` highest scores; ties by ascending id.
pub fn top_k<S: AsRef<str>>(scores: &[f64], ids: &[S], k: usize) -> Result<Vec<usize>> {
    if scores.len() != ids.len() {
        return Err(MetricError::LengthMismatch(scores.len(), ids.len()));
    }
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if k > scores.len() {
        return Err(MetricError::KTooLarge { k, len: scores.len() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].as_ref().cmp(ids[b].as_ref())));
    order.truncate(k);
    Ok(order)
}

/// `|predicted top-k ∩ true top-k| / k`.
pub fn precision_at_k<S: AsRef<str>>(pred: &[f64], truth: &[f64], ids: &[S], k: usize) -> Result<f64> {
    check(pred, truth)?;
    let mut a = top_k(pred, ids, k)?;
    let mut b = top_k(truth, ids, k)?;
    a.sort_unstable();
    b.sort_unstable();
    let hits = a.iter().filter(|i| b.binary_search(i).is_ok()).count();
    Ok(hits as f64 / k as f64)
}

/// Ranking quality of one query against its database.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QueryMetrics {
    pub query: String,
    pub rho: Option<f64>,
    pub tau: Option<f64>,
    pub p_at_k: Vec<(usize, f64)>,
}

pub fn ranking_metrics<S: AsRef<str>>(
    query: &str,
    database: &[S],
    pred: &[f64],
    truth: &[f64],
    ks: &[usize],
) -> Result<QueryMetrics> {
    check(pred, truth)?;
    if database.len() != pred.len() {
        return Err(MetricError::LengthMismatch(database.len(), pred.len()));
    }
    let p_at_k = ks
        .iter()
        .map(|&k| Ok((k, precision_at_k(pred, truth, database, k)?)))
        .collect::<Result<_>>()?;
    Ok(QueryMetrics {
        query: query.to_string(),
        rho: spearman_rho(pred, truth)?,
        tau: kendall_tau(pred, truth)?,
        p_at_k,
    })
}

/// Mean of the defined values, with the count used.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (mut sum, mut n) = (0.0, 0);
    for v in values.into_iter().flatten() {
        sum += v;
        n += 1;
    }
    ((n > 0).then(|| sum / n as f64), n)
}
