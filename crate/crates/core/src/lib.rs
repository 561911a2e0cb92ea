pub mod collection;
pub mod commutator;
pub mod error;
pub mod exact;
pub mod filtration;
pub mod geometry;
pub mod group;
pub mod lattice;
pub mod walker;
pub mod weights;

pub use error::{Error, Result};
