//! Test-set evaluation reports and scoring-time benchmarks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{mean_defined, ranking_metrics, regression_metrics, QueryMetrics};
use super::{PreparedSet, Result, TrainError};
use crate::dataset::DatasetManifest;
use crate::model::{ModelConfig, PSimGnn, PreparedGraph};

/// Default cutoffs for precision at k.
pub const DEFAULT_KS: [usize; 2] = [10, 20];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub pairs: usize,
    pub queries: usize,
    pub mse: f64,
    pub mae: f64,
    /// Per-query Spearman rho, averaged over queries where it is defined.
    pub rho: Option<f64>,
    pub tau: Option<f64>,
    pub p_at_k: BTreeMap<usize, f64>,
    /// Mean single-pair scoring latency.
    pub timing_ms_per_pair: f64,
    pub ranking_average: &'static str,
    pub per_query: Vec<QueryMetrics>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl EvalReport {
    /// `metric,value,units` rows; errors are scaled by 100 and flagged `x1e-2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,units\n");
        let mut row = |m: &str, v: String, u: &str| writeln!(out, "{m},{v},{u}").expect("write to string");
        row("mse", (self.mse * 100.0).to_string(), "x1e-2");
        row("mae", (self.mae * 100.0).to_string(), "x1e-2");
        row("rho", fmt_opt(self.rho), "");
        row("tau", fmt_opt(self.tau), "");
        for (k, p) in &self.p_at_k {
            row(&format!("p@{k}"), p.to_string(), "");
        }
        row("ms_per_pair", self.timing_ms_per_pair.to_string(), "ms");
        row("pairs", self.pairs.to_string(), "count");
        row("queries", self.queries.to_string(), "count");
        out
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("report serializes")
    }
}

/// Scores every test query against the train and validation graphs.
pub fn evaluate(model: &PSimGnn, set: &PreparedSet, manifest: &DatasetManifest, ks: &[usize]) -> Result<EvalReport> {
    let splits = manifest.splits()?;
    let database = splits.database();
    let db_len = database.len();
    let records = manifest.pairs_between(&splits.test, &database)?;
    let pairs = set.pairs(&records)?;
    let scored: Vec<(f64, Duration)> = pairs
        .par_iter()
        .map(|p| {
            let start = Instant::now();
            let s = model.predict(&set.graphs[p.a], &set.graphs[p.b])?;
            Ok((s, start.elapsed()))
        })
        .collect::<Result<_>>()?;
    let pred: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let truth: Vec<f64> = pairs.iter().map(|p| p.target).collect();
    let (mse, mae) = regression_metrics(&pred, &truth)?;
    let per_query = splits
        .test
        .iter()
        .enumerate()
        .map(|(q, query)| {
            let range = q * db_len..(q + 1) * db_len;
            Ok(ranking_metrics(query, &database, &pred[range.clone()], &truth[range], ks)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let (rho, _) = mean_defined(per_query.iter().map(|q| q.rho));
    let (tau, _) = mean_defined(per_query.iter().map(|q| q.tau));
    let p_at_k = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, per_query.iter().map(|q| q.p_at_k[i].1).sum::<f64>() / per_query.len() as f64))
        .collect();
    let total: Duration = scored.iter().map(|s| s.1).sum();
    Ok(EvalReport {
        pairs: pairs.len(),
        queries: per_query.len(),
        mse,
        mae,
        rho,
        tau,
        p_at_k,
        timing_ms_per_pair: total.as_secs_f64() * 1e3 / pairs.len().max(1) as f64,
        ranking_average: "per-query",
        per_query,
    })
}

/// Mean wall-clock milliseconds per call of `scorer` over `items` calls,
/// repeated `repetitions` times after one untimed warmup pass. Runs on the
/// calling thread.
pub fn bench_timing<T>(
    items: usize,
    repetitions: usize,
    mut scorer: impl FnMut(usize) -> Result<T>,
) -> Result<f64> {
    if items == 0 || repetitions == 0 {
        return Err(TrainError::Config("benchmark needs at least one item and repetition".into()));
    }
    for i in 0..items {
        std::hint::black_box(scorer(i)?);
    }
    let start = Instant::now();
    for _ in 0..repetitions {
        for i in 0..items {
            std::hint::black_box(scorer(i)?);
        }
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / (items * repetitions) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantTiming {
    pub m: usize,
    pub ms_per_pair: f64,
    /// Propagation steps per pair.
    pub propagation_steps: usize,
}

/// Scoring time for `m` in `{0, k, k^2}` on the same prepared pairs.
pub fn bench_variants(
    base: &ModelConfig,
    pairs: &[(PreparedGraph, PreparedGraph)],
    repetitions: usize,
) -> Result<Vec<VariantTiming>> {
    let k = base.k;
    let mut ms: Vec<usize> = vec![0, k, k * k];
    ms.dedup();
    ms.into_iter()
        .map(|m| {
            let model = PSimGnn::new(ModelConfig { m, ..base.clone() })?;
            let mut steps = 0;
            let ms_per_pair = bench_timing(pairs.len(), repetitions, |i| {
                let (s, stats) = model.predict_with_stats(&pairs[i].0, &pairs[i].1)?;
                steps = stats.propagation_steps;
                Ok(s)
            })?;
            Ok(VariantTiming {
                m,
                ms_per_pair,
                propagation_steps: steps,
            })
        })
        .collect()
}
