use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use psimgnn::train::metrics::{kendall_tau, mean_defined, precision_at_k, spearman_rho};

fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&u| u < v).count();
            let equal = x.iter().filter(|&&u| u == v).count();
            less as f64 + (equal as f64 + 1.0) / 2.0
        })
        .collect()
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

fn pair_count_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut s, mut tx, mut ty) = (0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).signum() as i64 * (x[i] != x[j]) as i64;
            let dy = (y[i] - y[j]).signum() as i64 * (y[i] != y[j]) as i64;
            tx += (dx == 0) as u64;
            ty += (dy == 0) as u64;
            s += dx * dy;
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    s as f64 / ((n0 - tx) as f64 * (n0 - ty) as f64).sqrt()
}

/// Integer-valued scores with plenty of ties.
fn tied_scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            proptest::collection::vec((0u8..8).prop_map(f64::from), n),
            proptest::collection::vec((0u8..8).prop_map(f64::from), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tau_matches_pair_counting_with_ties((x, y) in tied_scores()) {
        let tau = kendall_tau(&x, &y).unwrap();
        let constant = x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]);
        match tau {
            None => prop_assert!(constant),
            Some(t) => {
                prop_assert_eq!(t, pair_count_tau(&x, &y));
                prop_assert!((-1.0..=1.0).contains(&t));
            }
        }
    }

    #[test]
    fn rho_is_correlation_of_average_ranks((x, y) in tied_scores()) {
        if let Some(rho) = spearman_rho(&x, &y).unwrap() {
            prop_assert_eq!(rho, correlation(&ranks(&x), &ranks(&y)));
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        }
    }

    #[test]
    fn precision_is_a_fraction_of_k((x, y) in tied_scores(), k in 1usize..60) {
        let ids: Vec<String> = (0..x.len()).map(|i| format!("g{i:02}")).collect();
        let k = k.min(x.len());
        let p = precision_at_k(&x, &y, &ids, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert_eq!((p * k as f64).round() / k as f64, p);
        prop_assert_eq!(precision_at_k(&x, &x, &ids, k).unwrap(), 1.0);
    }

    #[test]
    fn query_averaging_is_order_independent(values in proptest::collection::vec(proptest::option::of((-100i32..100).prop_map(|v| v as f64 / 100.0)), 1..30), seed in any::<u64>()) {
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (a, na) = mean_defined(values);
        let (b, nb) = mean_defined(shuffled);
        prop_assert_eq!(na, nb);
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }
}
