use super::error::AutodiffError;
use super::numel;
use super::tape::{Tape, Var};
use crate::Real;

/// A named parameter array.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Ordered collection of parameters; the order is the checkpoint order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    pub params: Vec<Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<T>) -> usize {
        debug_assert_eq!(numel(shape), data.len());
        self.params.push(Param {
            name: name.into(),
            shape: shape.to_vec(),
            data,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_values(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    /// Registers every parameter as a differentiable leaf.
    pub fn attach(&self, tape: &mut Tape<T>) -> Result<Vec<Var>, AutodiffError> {
        self.params
            .iter()
            .map(|p| tape.param(&p.shape, p.data.clone()))
            .collect()
    }

    /// Copies current values into previously attached leaves.
    pub fn sync(&self, tape: &mut Tape<T>, vars: &[Var]) -> Result<(), AutodiffError> {
        for (p, v) in self.params.iter().zip(vars) {
            tape.set_leaf(*v, &p.data)?;
        }
        Ok(())
    }

    /// Gradients of the attached leaves (zeros where none flowed).
    pub fn grads(&self, tape: &Tape<T>, vars: &[Var]) -> Vec<Vec<T>> {
        self.params
            .iter()
            .zip(vars)
            .map(|(p, v)| {
                tape.grad(*v)
                    .map(|g| g.to_vec())
                    .unwrap_or_else(|| vec![T::zero(); p.data.len()])
            })
            .collect()
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                })
                .collect(),
        }
    }
}
