use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Handle to one tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Ordered, named collection of trainable tensors.
///
/// Gradients use the same type: [`ParamSet::zeros_like`] yields a set whose
/// ids line up with the original, so layers index both with the same
/// [`ParamId`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(self.position(&name).is_none(), "duplicate param {name}");
        self.names.push(name);
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.position(name)
            .map(ParamId)
            .ok_or_else(|| Error::format("checkpoint", format!("missing tensor {name}")))
    }

    /// Looks up `name` and checks its shape.
    pub fn id_with_shape(&self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        let id = self.id(name)?;
        let t = &self.tensors[id.0];
        if t.rows() != rows || t.cols() != cols {
            return Err(Error::Shape(format!(
                "{name}: expected {rows}x{cols}, found {}x{}",
                t.rows(),
                t.cols()
            )));
        }
        Ok(id)
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.fill(0.0));
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.names == other.names
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.same_shape(b))
    }

    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(s));
    }
}

impl Index<ParamId> for ParamSet {
    type Output = Tensor;

    fn index(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }
}

impl IndexMut<ParamId> for ParamSet {
    fn index_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }
}
