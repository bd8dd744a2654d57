pub mod ap;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod library;
pub mod recon;

pub use error::{Error, Result};
