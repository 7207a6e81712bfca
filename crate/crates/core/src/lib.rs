//! Regularized graph neural diffusion with rotational charges.

pub mod attention;
pub mod charges;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graph_model;
pub mod integrators;

pub use error::{Error, Result};
