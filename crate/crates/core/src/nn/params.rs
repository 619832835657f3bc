use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Index of a tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// Named trainable tensors, kept in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Tensor<f32>>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<f32>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f32).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.add(name, Tensor::new(shape, data).expect("consistent shape"))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<f32> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<f32> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<f32>)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn values(&self) -> &[Tensor<f32>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor<f32>] {
        &mut self.values
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Records every parameter as a trainable leaf.
    pub fn bind<E: Scalar>(&self, tape: &mut Tape<E>) -> Bound {
        Bound(self.values.iter().map(|v| tape.leaf(v.cast())).collect())
    }

    pub fn to_checkpoint(&self, checkpoint: &mut Checkpoint) {
        checkpoint.tensors = self
            .names
            .iter()
            .cloned()
            .zip(self.values.iter().cloned())
            .collect();
    }

    /// Overwrites values from a checkpoint that must hold exactly these names and shapes.
    pub fn load_checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        if checkpoint.tensors.len() != self.values.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} tensors, model expects {}",
                checkpoint.tensors.len(),
                self.values.len()
            )));
        }
        for (i, (name, t)) in checkpoint.tensors.iter().enumerate() {
            if *name != self.names[i] || t.shape() != self.values[i].shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {i}: found `{name}` {:?}, expected `{}` {:?}",
                    t.shape(),
                    self.names[i],
                    self.values[i].shape()
                )));
            }
        }
        for (slot, (_, t)) in self.values.iter_mut().zip(&checkpoint.tensors) {
            *slot = t.clone();
        }
        Ok(())
    }
}

/// Tape handles for a [`ParamSet`], in the same order.
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}
