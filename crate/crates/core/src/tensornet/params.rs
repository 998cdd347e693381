use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Gradients, Result, TensorError};

pub const PARAMS_VERSION: u32 = 1;

/// A parameter value with an optional accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub value: Array2<f64>,
    pub grad: Option<Array2<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named parameters in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Array2<f64>) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(TensorError::Format(format!("duplicate parameter '{name}'")));
        }
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.tensors.push(Tensor { value, grad: None });
        Ok(ParamId(self.names.len() - 1))
    }

    /// Add a Glorot-uniform weight `fan_in x fan_out` and a zero bias `1 x fan_out`.
    pub fn add_linear(
        &mut self,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        seed: u64,
    ) -> Result<(ParamId, ParamId)> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut rng = SplitMix64::new(seed ^ fnv1a(name));
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || {
            limit * (2.0 * rng.next_f64() - 1.0)
        });
        let w = self.add(&format!("{name}.w"), w)?;
        let b = self.add(&format!("{name}.b"), Array2::zeros((1, fan_out)))?;
        Ok((w, b))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    /// Add the parameter gradients of a backward pass to the stored buffers.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (t, g) in self.tensors.iter_mut().zip(grads.params()) {
            if let Some(g) = g {
                match &mut t.grad {
                    Some(acc) => *acc += g,
                    None => t.grad = Some(g.clone()),
                }
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.grad = None;
        }
    }

    /// All values flattened in store order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.value.iter().copied())
            .collect()
    }

    pub fn to_file(&self) -> ParamsFile {
        ParamsFile {
            version: PARAMS_VERSION,
            param_count: self.param_count(),
            params: self
                .iter()
                .map(|(_, name, t)| ParamRecord {
                    name: name.to_string(),
                    shape: [t.value.nrows(), t.value.ncols()],
                    data: t.value.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: ParamsFile) -> Result<Self> {
        if file.version != PARAMS_VERSION {
            return Err(TensorError::Format(format!(
                "unsupported parameter version {} (expected {PARAMS_VERSION})",
                file.version
            )));
        }
        let mut store = ParamStore::new();
        for rec in file.params {
            let value = Array2::from_shape_vec((rec.shape[0], rec.shape[1]), rec.data)
                .map_err(|e| TensorError::Format(format!("{}: {e}", rec.name)))?;
            if value.iter().any(|v| !v.is_finite()) {
                return Err(TensorError::Format(format!("{}: non-finite value", rec.name)));
            }
            store.add(&rec.name, value)?;
        }
        if store.param_count() != file.param_count {
            return Err(TensorError::Format(format!(
                "param_count {} does not match shapes ({})",
                file.param_count,
                store.param_count()
            )));
        }
        Ok(store)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Serialized form of a [`ParamStore`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub version: u32,
    pub param_count: usize,
    pub params: Vec<ParamRecord>,
}

/// Counter-based generator used for weight initialization.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}
