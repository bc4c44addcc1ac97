use std::collections::HashMap;

use crate::error::{ensure_arg, Result, TensorError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Non-trainable state such as batch-norm running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BufferId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub tensor: Tensor<T>,
}

/// Owns every trainable parameter and persistent buffer of a model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<NamedTensor<T>>,
    buffers: Vec<NamedTensor<T>>,
}

/// Gradients produced by one backward pass.
#[derive(Debug, Clone, Default)]
pub struct Gradients<T> {
    pub(crate) params: Vec<(ParamId, Vec<T>)>,
    pub(crate) leaves: HashMap<usize, Vec<T>>,
}

impl<T> Gradients<T> {
    pub fn param(&self, id: ParamId) -> Option<&[T]> {
        self.params.iter().find(|(p, _)| *p == id).map(|(_, g)| g.as_slice())
    }

    /// Gradient with respect to a leaf created with [`Graph::input_with_grad`](crate::Graph::input_with_grad).
    pub fn wrt(&self, var: crate::Var) -> Option<&[T]> {
        self.leaves.get(&var.0).map(Vec::as_slice)
    }
}

/// New buffer contents computed by a forward pass (running statistics).
#[derive(Debug, Clone, Default)]
pub struct BufferUpdates<T>(pub(crate) Vec<(BufferId, Vec<T>)>);

impl<T> BufferUpdates<T> {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new(), buffers: Vec::new() }
    }

    pub fn add_param(&mut self, name: impl Into<String>, mut tensor: Tensor<T>) -> ParamId {
        tensor.set_requires_grad(true);
        self.params.push(NamedTensor { name: name.into(), tensor });
        ParamId(self.params.len() - 1)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> BufferId {
        self.buffers.push(NamedTensor { name: name.into(), tensor });
        BufferId(self.buffers.len() - 1)
    }

    pub fn param(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].tensor
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].tensor
    }

    pub fn param_name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn buffer(&self, id: BufferId) -> &Tensor<T> {
        &self.buffers[id.0].tensor
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn params(&self) -> &[NamedTensor<T>] {
        &self.params
    }

    pub fn buffers(&self) -> &[NamedTensor<T>] {
        &self.buffers
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Total count of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    pub fn find_param(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Adds the gradients of one backward pass into the parameters' grad buffers.
    pub fn accumulate(&mut self, grads: &Gradients<T>) -> Result<()> {
        for (id, g) in &grads.params {
            self.params[id.0].tensor.accumulate_grad(g)?;
        }
        Ok(())
    }

    pub fn apply_buffer_updates(&mut self, updates: BufferUpdates<T>) {
        for (id, data) in updates.0 {
            let buf = &mut self.buffers[id.0].tensor;
            debug_assert_eq!(buf.len(), data.len());
            buf.data_mut().copy_from_slice(&data);
        }
    }

    pub fn clear_grads(&mut self) {
        for p in &mut self.params {
            p.tensor.clear_grad();
        }
    }

    pub(crate) fn params_mut(&mut self) -> &mut [NamedTensor<T>] {
        &mut self.params
    }

    /// Parameters followed by buffers, in registration order.
    pub fn named_tensors(&self) -> impl Iterator<Item = &NamedTensor<T>> {
        self.params.iter().chain(self.buffers.iter())
    }

    /// Overwrites the value of a parameter or buffer by name.
    pub fn load_named(&mut self, name: &str, shape: &[usize], data: &[T]) -> Result<()> {
        let slot = self
            .params
            .iter_mut()
            .chain(self.buffers.iter_mut())
            .find(|t| t.name == name)
            .ok_or_else(|| TensorError::InvalidArgument(format!("unknown tensor `{name}`")))?;
        ensure_arg!(
            slot.tensor.shape() == shape,
            "tensor `{name}` has shape {:?}, payload has {shape:?}",
            slot.tensor.shape()
        );
        slot.tensor.data_mut().copy_from_slice(data);
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let conv = |v: &Vec<NamedTensor<T>>| {
            v.iter()
                .map(|t| NamedTensor { name: t.name.clone(), tensor: t.tensor.cast() })
                .collect()
        };
        ParamStore { params: conv(&self.params), buffers: conv(&self.buffers) }
    }
}
