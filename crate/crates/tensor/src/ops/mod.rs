pub mod conv;
pub mod elementwise;
pub mod gru;
pub mod norm;
pub mod pool;
pub mod shape;

pub use conv::{conv_out_len, Conv1dGeom, Conv2dGeom};
pub use gru::GruWeights;
pub use norm::{RunningStats, BN_EPSILON, BN_MOMENTUM};
pub use pool::Pool2dGeom;
