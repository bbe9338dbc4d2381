//! Mixed-type tables: schema, CSV ingestion, obesity classes, train/test split.

mod dataset;
mod obesity;
mod schema;
mod split;

pub use dataset::{load_dataset, Column, Dataset};
pub use obesity::{
    derive_obesity_class, filter_obese, summarize_classes, ClassFrequency, ClassSummary, ObesityClass,
    OBESITY_THRESHOLD,
};
pub use schema::{MeasurementLevel, MissingPolicy, Schema, VariableSpec};
pub use split::{split_dataset, train_size, write_split, SplitPair};
