pub mod als;
pub mod cli;
pub mod data;
pub mod error;
pub mod extraction;
pub mod io;
pub mod linalg;
pub mod profile;
pub mod scaling;
pub mod validation;

pub use error::{Error, Result};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/optimal-scaling.md")]
    mod optimal_scaling {}
    #[doc = include_str!("../../../book/src/als.md")]
    mod als {}
    #[doc = include_str!("../../../book/src/extraction.md")]
    mod extraction {}
    #[doc = include_str!("../../../book/src/validation-profiling.md")]
    mod validation_profiling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
