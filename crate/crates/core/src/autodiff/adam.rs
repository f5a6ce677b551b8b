use super::params::ParamStore;
use super::tensor::Tensor;
use super::AutodiffError;

/// Bias-corrected Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    moments: Vec<Option<(Tensor, Tensor)>>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(0.001)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments: Vec::new(),
        }
    }
}

/// Applies one Adam update using the accumulated gradients, then clears them.
///
/// Parameters that received no gradient are left untouched. Fails if no
/// parameter has a gradient at all.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState) -> Result<(), AutodiffError> {
    if store.iter().all(|(_, p)| p.grad.is_none()) {
        return Err(AutodiffError::MissingGradients);
    }
    state.moments.resize(store.len(), None);
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (p, slot) in store.iter_mut().zip(state.moments.iter_mut()) {
        let Some(grad) = p.grad.take() else { continue };
        let [r, c] = p.value.shape();
        let (m, v) = slot.get_or_insert_with(|| (Tensor::zeros(r, c), Tensor::zeros(r, c)));
        let values = p.value.data_mut();
        for (i, &g) in grad.data().iter().enumerate() {
            let mi = &mut m.data_mut()[i];
            *mi = state.beta1 * *mi + (1.0 - state.beta1) * g;
            let m_hat = *mi / bc1;
            let vi = &mut v.data_mut()[i];
            *vi = state.beta2 * *vi + (1.0 - state.beta2) * g * g;
            let v_hat = *vi / bc2;
            values[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with_grad(value: f64, grad: f64) -> ParamStore {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::full(2, 2, value)).unwrap();
        s.accumulate_grad(id, &[grad; 4]);
        s
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = store_with_grad(0.5, 1.0);
        let mut st = AdamState::default();
        adam_step(&mut s, &mut st).unwrap();
        // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
        let expected = 0.5 - 0.001 / (1.0 + 1e-8);
        for &v in s.get(s.id("w").unwrap()).value.data() {
            assert!((v - expected).abs() < 1e-15);
        }
        assert_eq!(st.t, 1);
        assert!(s.iter().all(|(_, p)| p.grad.is_none()));
    }

    #[test]
    fn zero_gradients_leave_values() {
        let mut s = store_with_grad(0.5, 0.0);
        let mut st = AdamState::default();
        adam_step(&mut s, &mut st).unwrap();
        assert!(s.value(s.id("w").unwrap()).data().iter().all(|&v| v == 0.5));
        assert_eq!(st.t, 1);
    }

    #[test]
    fn missing_gradients_error() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(1, 1)).unwrap();
        assert!(matches!(
            adam_step(&mut s, &mut AdamState::default()),
            Err(AutodiffError::MissingGradients)
        ));
    }

    #[test]
    fn trajectories_are_deterministic() {
        let run = || {
            let mut s = ParamStore::new();
            let id = s.add("w", Tensor::row(&[1.0, -2.0, 3.0])).unwrap();
            let mut st = AdamState::default();
            for _ in 0..20 {
                let g: Vec<f64> = s.value(id).data().iter().map(|x| 2.0 * x).collect();
                s.accumulate_grad(id, &g);
                adam_step(&mut s, &mut st).unwrap();
            }
            s.value(id).clone()
        };
        assert_eq!(run(), run());
    }
}
