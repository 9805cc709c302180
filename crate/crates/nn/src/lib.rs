//! Neural network kernels for the control stack, written directly against
//! flat `f64` parameter vectors: dense and recurrent layers with hand-derived
//! backward passes, an Adam optimizer, inverted dropout, bit-exact parameter
//! checkpoints, finite-difference gradient checking, and the recurrent plant
//! surrogate built from those pieces.
//!
//! Keeping every parameter in one contiguous vector means the optimizer,
//! checkpoint format, and gradient checks never need to know the network
//! structure; layers are shape descriptors that borrow slices.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod dropout;
pub mod error;
pub mod flat;
pub mod gradcheck;
pub mod lstm;
pub mod mat;
pub mod surrogate;

pub use adam::Adam;
pub use dense::{Act, Mlp, MlpCache};
pub use error::NnError;
pub use flat::{FlatParams, Layout, TensorSpec};
pub use lstm::{Lstm, LstmCache};
pub use mat::Mat;
pub use surrogate::{
    free_run, load_surrogate, predict_next, roll_step, save_surrogate, train_surrogate,
    FreeRunStep, Normalizer, SurrogateNet, SurrogateTrainConfig, TrainReport, WindowDataset,
};
