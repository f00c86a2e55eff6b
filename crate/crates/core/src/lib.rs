//! Numerical lab for the Ricci–DeTurck flow of rough metrics on flat tori.

pub mod analysis;
pub mod container;
pub mod error;
pub mod field;
pub mod fit;
pub mod flow;
pub mod gauge;
pub mod geometry;
pub mod grid;
pub mod heat;
pub mod norms;
pub mod report;
pub mod rough;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{MetricField, Slot, SymTensorField, TensorField};
pub use grid::TorusGrid;
