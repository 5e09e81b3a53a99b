//! Minimal dense-network engine: seeded RNG, dense layers with exact
//! reverse-mode gradients, ADAM, and the cosine learning-rate schedule.
//! Everything runs in f64.

mod adam;
mod dense;
mod rng;
mod schedule;

pub use adam::AdamState;
pub use dense::{Activation, DenseLayer, LayerBackward};
pub use rng::SeededRng;
pub use schedule::LrSchedule;
