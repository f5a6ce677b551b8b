use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::AutodiffError;

/// Format tag written into every checkpoint.
pub const CHECKPOINT_FORMAT: &str = "psimgnn-params/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    /// `None` until a backward pass reaches this parameter.
    pub grad: Option<Tensor>,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, AutodiffError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(AutodiffError::DuplicateParameter(name));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            value,
            grad: None,
        });
        Ok(id)
    }

    /// Glorot-uniform `rows x cols` weight.
    pub fn add_glorot(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut impl Rng) -> Result<ParamId, AutodiffError> {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, Tensor::new(rows, cols, data))
    }

    /// Uniform values in `[-bound, bound)`.
    pub fn add_uniform(&mut self, name: impl Into<String>, rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Result<ParamId, AutodiffError> {
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, Tensor::new(rows, cols, data))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    pub fn accumulate_grad(&mut self, id: ParamId, g: &[f64]) {
        let p = &mut self.params[id.0];
        let [r, c] = p.value.shape();
        let slot = p.grad.get_or_insert_with(|| Tensor::zeros(r, c));
        for (d, s) in slot.data_mut().iter_mut().zip(g) {
            *d += s;
        }
    }

    /// Multiplies every populated gradient by `k`.
    pub fn scale_grads(&mut self, k: f64) {
        for p in &mut self.params {
            if let Some(g) = &mut p.grad {
                g.data_mut().iter_mut().for_each(|v| *v *= k);
            }
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            params: self
                .params
                .iter()
                .map(|p| CheckpointEntry {
                    name: p.name.clone(),
                    shape: p.value.shape(),
                    values: p.value.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Overwrites values from a checkpoint. Every parameter must be present
    /// with a matching shape; extra entries are rejected.
    pub fn restore(&mut self, ckpt: &Checkpoint) -> Result<(), AutodiffError> {
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(AutodiffError::Checkpoint(format!("unsupported format tag {:?}", ckpt.format)));
        }
        if ckpt.params.len() != self.params.len() {
            return Err(AutodiffError::Checkpoint(format!(
                "checkpoint has {} parameters, model has {}",
                ckpt.params.len(),
                self.params.len()
            )));
        }
        for entry in &ckpt.params {
            let id = self
                .id(&entry.name)
                .ok_or_else(|| AutodiffError::UnknownParameter(entry.name.clone()))?;
            let p = &mut self.params[id.0];
            if p.value.shape() != entry.shape || entry.values.len() != entry.shape[0] * entry.shape[1] {
                return Err(AutodiffError::Checkpoint(format!(
                    "shape mismatch for {}: expected {:?}, found {:?}",
                    entry.name,
                    p.value.shape(),
                    entry.shape
                )));
            }
            p.value = Tensor::new(entry.shape[0], entry.shape[1], entry.values.clone());
        }
        Ok(())
    }
}

/// Serializable snapshot of parameter values, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub params: Vec<CheckpointEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("checkpoint serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, AutodiffError> {
        serde_json::from_slice(bytes).map_err(|e| AutodiffError::Checkpoint(e.to_string()))
    }
}
