use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Starting configuration for the object scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// Linear PCA of the variables with codes read as numbers.
    #[default]
    NumericSolution,
    /// Random centered orthonormal scores drawn from the seed.
    SeededRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatpcaConfig {
    pub dimensions: usize,
    pub max_iterations: usize,
    /// Stop once the VAF increase of an iteration falls below this.
    pub epsilon: f64,
    pub seed: u64,
    pub init: InitMethod,
}

impl Default for CatpcaConfig {
    fn default() -> Self {
        CatpcaConfig {
            dimensions: 2,
            max_iterations: 100,
            epsilon: 1e-5,
            seed: 0,
            init: InitMethod::NumericSolution,
        }
    }
}

impl CatpcaConfig {
    pub fn with_dimensions(dimensions: usize) -> Self {
        CatpcaConfig {
            dimensions,
            ..Default::default()
        }
    }

    /// Checks the configuration against a problem with `n` objects and `m`
    /// analysed variables.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.dimensions == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.dimensions > m {
            return Err(Error::Config(format!(
                "dimensions ({}) exceed the number of analysed variables ({m})",
                self.dimensions
            )));
        }
        if self.dimensions + 1 > n {
            return Err(Error::Config(format!(
                "dimensions ({}) need at least {} objects, got {n}",
                self.dimensions,
                self.dimensions + 1
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub vaf_total: f64,
    pub vaf_increase: f64,
    pub loss_total: f64,
    /// Distance of the object scores to the category centroids.
    pub loss_centroid: f64,
    /// Distance of the centroids to their rank-one (vector) restriction.
    pub loss_restriction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = CatpcaConfig::default();
        assert_eq!(c.max_iterations, 100);
        assert_eq!(c.epsilon, 1e-5);
        assert_eq!(c.init, InitMethod::NumericSolution);
    }

    #[test]
    fn validation() {
        assert!(CatpcaConfig::with_dimensions(2).validate(10, 3).is_ok());
        assert!(CatpcaConfig::with_dimensions(0).validate(10, 3).is_err());
        assert!(CatpcaConfig::with_dimensions(4).validate(10, 3).is_err());
        assert!(CatpcaConfig::with_dimensions(3).validate(3, 3).is_err());
        let c = CatpcaConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(c.validate(10, 3).is_err());
    }
}
