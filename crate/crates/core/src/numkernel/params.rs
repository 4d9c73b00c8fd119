//! Named parameter storage and matching gradient buffers.

use std::collections::HashMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
}

/// Ordered set of named parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on a duplicate name; layer construction is programmer-controlled.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.by_name.contains_key(&name), "duplicate parameter `{name}`");
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter { name, tensor });
        ParamId(id)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].tensor
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    /// Replaces every tensor with the same-named one from `other`.
    pub fn copy_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Shape(format!("{} parameters vs {}", other.len(), self.len())));
        }
        for p in &mut self.params {
            let src = other
                .find(&p.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{}`", p.name)))?;
            let src = other.get(src);
            p.tensor.expect_shape(src.shape())?;
            p.tensor = src.clone();
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            tensors: self.params.iter().map(|p| Tensor::zeros(p.tensor.shape())).collect(),
        }
    }
}

/// One gradient tensor per parameter, same order and shapes as the store.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    /// Two distinct gradient tensors borrowed mutably at once.
    pub fn pair_mut(&mut self, a: ParamId, b: ParamId) -> (&mut Tensor, &mut Tensor) {
        assert_ne!(a, b, "pair_mut needs two distinct parameters");
        if a.0 < b.0 {
            let (lo, hi) = self.tensors.split_at_mut(b.0);
            (&mut lo[a.0], &mut hi[0])
        } else {
            let (lo, hi) = self.tensors.split_at_mut(a.0);
            (&mut hi[0], &mut lo[b.0])
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Shape("gradient sets differ in length".into()));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(factor));
    }

    /// Euclidean norm over every gradient element.
    pub fn norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_mirror_shapes() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::zeros(&[2, 3]));
        let b = s.add("b", Tensor::zeros(&[4]));
        let g = s.zero_grads();
        assert_eq!(g.get(a).shape(), &[2, 3]);
        assert_eq!(g.get(b).shape(), &[4]);
        assert_eq!(s.num_scalars(), 10);
        assert_eq!(s.find("b"), Some(b));
    }

    #[test]
    #[should_panic]
    fn duplicate_names_panic() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(&[1]));
        s.add("w", Tensor::zeros(&[1]));
    }
}
