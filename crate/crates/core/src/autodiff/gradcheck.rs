use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::AutodiffError;

/// Magnitude below which gradient differences are measured absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

/// `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Compares reverse-mode gradients of `f` against central differences with
/// step `step`, over every coordinate of every parameter in `store`.
pub fn grad_check<E, F>(store: &mut ParamStore, mut f: F, step: f64) -> Result<GradCheckReport, E>
where
    E: From<AutodiffError>,
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var, E>,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let grads = tape.backward(out)?;
    let mut analytic: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
    for (id, g) in grads.param_grads() {
        analytic[id.index()].copy_from_slice(g);
    }

    let mut eval = |store: &ParamStore| -> Result<f64, E> {
        let mut t = Tape::new();
        let v = f(&mut t, store)?;
        Ok(t.scalar(v))
    };

    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for id in ids {
        for (i, &exact) in analytic[id.index()].iter().enumerate() {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + step;
            let plus = eval(store);
            store.value_mut(id).data_mut()[i] = orig - step;
            let minus = eval(store);
            store.value_mut(id).data_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * step);
            let err = relative_error(exact, numeric);
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.get(id).name.clone(), i));
            }
        }
    }
    Ok(report)
}
