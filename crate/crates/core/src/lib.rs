//! Forward simulation, surrogate modelling and learned inversion of espresso
//! extraction.
//!
//! The crate is organised along the pipeline: [`percolation`] simulates a pod,
//! [`forward`] wraps it as a map from [`Recipe`] to [`Chemistry`], [`datagen`]
//! and [`augment`] build datasets, [`nn`] provides the network framework used by
//! [`surrogate`] and [`inverse`], and [`diagnostics`] checks the rank
//! hypotheses behind local invertibility.

pub mod augment;
pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod forward;
pub mod inverse;
pub mod metrics;
pub mod nn;
pub mod percolation;
pub mod rng;
pub mod scaling;
pub mod surrogate;
pub mod tsv;
pub mod types;

pub use error::{Error, Result};
pub use scaling::MinMaxScaler;
pub use types::*;
