use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Updated by the optimizer; has a gradient slot.
    Trainable,
    /// State carried by the model but not optimized (batch-norm running stats).
    Buffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub tensor: Tensor<T>,
}

/// Ordered, uniquely named model tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    entries: Vec<Param<T>>,
}

impl<T: Scalar> ModelParameters<T> {
    pub fn new(entries: Vec<Param<T>>) -> Result<Self> {
        let mut names: Vec<&str> = entries.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Spec(format!("duplicate parameter name {:?}", w[0])));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[Param<T>] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [Param<T>] {
        &mut self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|p| p.name == name).map(|p| &p.tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.iter_mut().find(|p| p.name == name).map(|p| &mut p.tensor)
    }

    pub fn trainable(&self) -> impl Iterator<Item = &Param<T>> {
        self.entries.iter().filter(|p| p.kind == ParamKind::Trainable)
    }

    pub fn trainable_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.entries.iter_mut().filter(|p| p.kind == ParamKind::Trainable)
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable().map(|p| p.tensor.len()).sum()
    }

    /// Zero-filled gradient slots for every trainable tensor.
    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients { tensors: self.trainable().map(|p| p.tensor.zeros_like()).collect() }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParameters<U> {
        ModelParameters {
            entries: self
                .entries
                .iter()
                .map(|p| Param { name: p.name.clone(), kind: p.kind, tensor: p.tensor.cast() })
                .collect(),
        }
    }
}

/// Gradients of the trainable tensors, in [`ModelParameters::trainable`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.data()).map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt()
    }
}
