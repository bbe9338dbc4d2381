//! Alternating least squares fitting of categorical PCA.

mod config;
mod engine;
mod model;

pub use config::{CatpcaConfig, InitMethod, IterationRecord, StopReason};
pub use engine::{fit, AlsState};
pub use model::{cronbach_alpha, eigenvalue_summary, CatpcaModel, DimensionSummary, VariableInfo, VariableQuantification};
