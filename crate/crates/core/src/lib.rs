//! Reduced-order surrogates for parametric field data.
//!
//! The pipeline: generate snapshot sets from cheap synthetic problems
//! ([`datagen`]), train a twin-view autoencoder column on them ([`column`]),
//! chain new columns onto frozen parents through lateral gates
//! ([`progressive`]), interpolate latents over (time, parameter) queries
//! ([`latent`]), and score predictions ([`metrics`]). Artifact formats live
//! in [`io`].

pub mod augment;
pub mod column;
pub mod datagen;
pub mod error;
pub mod io;
pub mod latent;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod progressive;
pub mod train;

pub use error::{Error, Result};
