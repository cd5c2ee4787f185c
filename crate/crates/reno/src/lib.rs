//! Frame-theoretic continuous-discrete equivalence toolkit for operator
//! learning: finite frame algebra, bandlimited periodic function spaces,
//! aliasing-error operators, representation-equivalence checks, a small
//! model zoo (CNN / FNO / SNO / DeepONet-lite), a minimal reverse-mode
//! autodiff engine, and training / multi-resolution evaluation sweeps.

pub mod autodiff;
pub mod container;
pub mod error;
pub mod frames;
pub mod models;
pub mod operators;
pub mod spaces;
pub mod svg;
pub mod train;

pub use error::{Error, Result};
