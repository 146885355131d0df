//! Graph U-Nets: gPool / gUnpool layers and an encoder-decoder graph network
//! built on a small define-by-run autodiff core over dense `f64` matrices.

pub mod autodiff;
pub mod dataset;
pub mod demo;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod model;
pub mod optim;
pub mod readout;
pub mod verify;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use autodiff::{Gradients, Tape, Var};
pub use dataset::{Dataset, LoadOptions, SplitSizes};
pub use error::{Error, Result};
pub use graph::{AdjacencyMatrix, PowerMode};
pub use layers::{Activation, GPoolLayer, GUnpoolLayer, GcnLayer, KSpec, PoolRecord};
pub use model::{Dropout, GraphUNet, GraphUNetConfig, SkipMode};
pub use optim::Adam;
pub use tensor::Tensor;
pub use training::{RunResult, TrainConfig};
