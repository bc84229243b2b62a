//! Small dense/convolutional network kernel with reverse-mode gradients.

mod adam;
pub mod checkpoint;
mod encoding;
pub mod gradcheck;
mod layers;
mod loss;
mod scalar;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use encoding::{sinusoidal_encode, sinusoidal_encode_into, DEFAULT_LEVELS};
pub use layers::{Conv2d, Dense, Layer, LayerSpec, LayerStack, ParamSlot, Parameterized};
pub use loss::{logistic_loss, mse_loss, sigmoid};
pub use scalar::Real;
pub use tensor::Tensor;
