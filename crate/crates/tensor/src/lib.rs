//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`ParamStore`] owns a model's parameters and running statistics. Each
//! forward pass records onto a fresh [`Graph`] that borrows the store;
//! [`Graph::backward`] returns [`Gradients`] which the store accumulates
//! before an [`Optimizer`] step.
//!
//! ```
//! use lidf_tensor::{Adam, Graph, Optimizer, ParamStore, Tensor};
//!
//! let mut store = ParamStore::<f32>::new();
//! let w = store.add_param("w", Tensor::ones(vec![2, 1]));
//! let grads = {
//!     let mut g = Graph::new(&store);
//!     let x = g.input(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
//!     let wv = g.param(w);
//!     let y = g.linear(x, wv).unwrap();
//!     let loss = g.sum(y);
//!     g.backward(loss).unwrap()
//! };
//! store.accumulate(&grads).unwrap();
//! Adam::default().step(&mut store).unwrap();
//! ```

mod error;
pub mod gradcheck;
mod graph;
pub mod init;
pub mod ops;
mod optim;
mod scalar;
mod store;
mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::{grad_check, grad_check_all, relative_error, GradCheckReport};
pub use graph::{Graph, Mode, Var};
pub use ops::elementwise::softmax_rows;
pub use ops::{conv_out_len, GruWeights, RunningStats};
pub use optim::{Adam, Optimizer, Sgd};
pub use scalar::Scalar;
pub use store::{BufferId, BufferUpdates, Gradients, NamedTensor, ParamId, ParamStore};
pub use tensor::{numel, Tensor};
