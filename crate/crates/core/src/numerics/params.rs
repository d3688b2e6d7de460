use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Ordered collection of named trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a parameter and returns its index. Names must be unique.
    pub fn push(&mut self, name: impl Into<String>, mut tensor: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(Error::invalid(format!("duplicate parameter name {name:?}")));
        }
        tensor.set_requires_grad(true);
        self.entries.push((name, tensor));
        Ok(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.entries[i].1)
    }

    pub fn tensor(&self, index: usize) -> &Tensor {
        &self.entries[index].1
    }

    pub(crate) fn tensor_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn zero_grad(&mut self) {
        for (_, t) in &mut self.entries {
            t.zero_grad();
        }
    }

    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Overwrites values from `other`, which must carry the same names and shapes.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<()> {
        for (name, t) in &mut self.entries {
            let src = other
                .get(name)
                .ok_or_else(|| Error::MissingTensor(name.clone()))?;
            if src.shape() != t.shape() {
                return Err(Error::shape(format!(
                    "parameter {name}: expected {:?}, found {:?}",
                    t.shape(),
                    src.shape()
                )));
            }
            t.data_mut().copy_from_slice(src.data());
            t.zero_grad();
        }
        Ok(())
    }

    /// Exponential moving average: `self = decay * self + (1 - decay) * src`,
    /// matched by position. Both sets must come from the same network.
    pub fn ema_update(&mut self, src: &ParamSet, decay: f32) -> Result<()> {
        if self.len() != src.len() {
            return Err(Error::shape("EMA source has a different parameter count"));
        }
        for ((name, t), (_, s)) in self.entries.iter_mut().zip(&src.entries) {
            if t.shape() != s.shape() {
                return Err(Error::shape(format!("EMA shape mismatch for {name}")));
            }
            for (a, &b) in t.data_mut().iter_mut().zip(s.data()) {
                *a = decay * *a + (1.0 - decay) * b;
            }
        }
        Ok(())
    }

    /// Raw little-endian bytes of every value, in order. Handy for equality checks.
    pub fn value_bytes(&self) -> Vec<u8> {
        self.entries
            .iter()
            .flat_map(|(_, t)| t.data().iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }
}
