use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::als::config::{CatpcaConfig, IterationRecord, StopReason};
use crate::data::MeasurementLevel;
use crate::error::{Error, Result};
use crate::scaling::{AffineMap, CategoryQuantification};

/// How a fitted variable maps observed values to real numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableQuantification {
    /// Standardized observed values; `values` are the distinct raw values.
    Numeric {
        variable: String,
        affine: AffineMap,
        values: Vec<f64>,
        frequencies: Vec<usize>,
    },
    /// Ordinal and single nominal variables.
    Category(CategoryQuantification),
    /// One centroid per category and dimension.
    Multiple {
        variable: String,
        categories: Vec<i64>,
        frequencies: Vec<usize>,
        centroids: Vec<Option<Vec<f64>>>,
    },
}

impl VariableQuantification {
    pub fn variable(&self) -> &str {
        match self {
            VariableQuantification::Numeric { variable, .. } => variable,
            VariableQuantification::Category(q) => &q.variable,
            VariableQuantification::Multiple { variable, .. } => variable,
        }
    }

    /// Category-level view for single-quantification variables. Numeric
    /// variables are reported with their distinct values as categories
    /// (rounded to integers only when they are integral).
    pub fn as_category(&self) -> Option<CategoryQuantification> {
        match self {
            VariableQuantification::Category(q) => Some(q.clone()),
            VariableQuantification::Numeric {
                variable,
                affine,
                values,
                frequencies,
            } if values.iter().all(|v| v.fract() == 0.0) => Some(CategoryQuantification {
                variable: variable.clone(),
                level: MeasurementLevel::Numeric,
                categories: values.iter().map(|&v| v as i64).collect(),
                frequencies: frequencies.clone(),
                values: values.iter().map(|&v| Some(affine.apply(v))).collect(),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableInfo {
    pub name: String,
    pub level: MeasurementLevel,
}

/// A fitted categorical PCA solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatpcaModel {
    pub variables: Vec<VariableInfo>,
    pub row_ids: Vec<usize>,
    /// n × p, centered, `XᵀX = n·I`.
    #[serde(with = "matrix_rows")]
    pub object_scores: DMatrix<f64>,
    /// Per variable; `None` for multiple nominal variables.
    pub loadings: Vec<Option<Vec<f64>>>,
    pub quantifications: Vec<VariableQuantification>,
    pub eigenvalues: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub config: CatpcaConfig,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CatpcaModel {
    pub fn n_objects(&self) -> usize {
        self.object_scores.nrows()
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn dimensions(&self) -> usize {
        self.object_scores.ncols()
    }

    pub fn vaf_total(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Per-dimension eigenvalue, percent of variance, cumulative percent and
    /// Cronbach's alpha.
    pub fn summary(&self) -> Vec<DimensionSummary> {
        eigenvalue_summary(&self.eigenvalues, self.n_variables())
    }

    /// Names and loading rows of the variables that carry loadings.
    pub fn loading_rows(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        self.variables
            .iter()
            .zip(&self.loadings)
            .filter_map(|(v, a)| a.as_ref().map(|a| (v.name.clone(), a.clone())))
            .unzip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub dimension: usize,
    pub eigenvalue: f64,
    pub percent: f64,
    pub cumulative_percent: f64,
    /// `None` where the eigenvalue is not positive.
    pub cronbach_alpha: Option<f64>,
}

/// Reliability of a dimension: `α = m/(m−1) · (1 − 1/λ)`.
pub fn cronbach_alpha(eigenvalue: f64, n_variables: usize) -> Result<f64> {
    if n_variables < 2 {
        return Err(Error::Config(format!(
            "Cronbach's alpha needs at least 2 variables, got {n_variables}"
        )));
    }
    if !(eigenvalue > 0.0) {
        return Err(Error::Config(format!("eigenvalue must be positive, got {eigenvalue}")));
    }
    let m = n_variables as f64;
    Ok(m / (m - 1.0) * (1.0 - 1.0 / eigenvalue))
}

/// Percent of variance is `100·λ/m`; cumulative percents are not clamped,
/// so multiple nominal variables can push them past 100.
pub fn eigenvalue_summary(eigenvalues: &[f64], n_variables: usize) -> Vec<DimensionSummary> {
    let m = n_variables as f64;
    let mut cumulative = 0.0;
    eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &eigenvalue)| {
            let percent = 100.0 * eigenvalue / m;
            cumulative += percent;
            DimensionSummary {
                dimension: i + 1,
                eigenvalue,
                percent,
                cumulative_percent: cumulative,
                cronbach_alpha: cronbach_alpha(eigenvalue, n_variables).ok(),
            }
        })
        .collect()
}

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Rows {
        nrows: usize,
        ncols: usize,
        rows: Vec<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        Rows {
            nrows: m.nrows(),
            ncols: m.ncols(),
            rows: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Rows::deserialize(d)?;
        if rows.rows.len() != rows.nrows || rows.rows.iter().any(|r| r.len() != rows.ncols) {
            return Err(serde::de::Error::custom("ragged object score matrix"));
        }
        Ok(DMatrix::from_fn(rows.nrows, rows.ncols, |r, c| rows.rows[r][c]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_matches_reported_reliabilities() {
        let rows = [(8.372, 0.891), (3.756, 0.742), (3.261, 0.702), (3.034, 0.678), (2.866, 0.659)];
        for (lambda, printed) in rows {
            let a = cronbach_alpha(lambda, 86).unwrap();
            assert!((a - printed).abs() <= 0.001, "{lambda}: {a} vs {printed}");
        }
    }

    #[test]
    fn alpha_zero_point_and_sign() {
        assert_eq!(cronbach_alpha(1.0, 5).unwrap(), 0.0);
        assert_eq!(cronbach_alpha(1.0, 86).unwrap(), 0.0);
        assert!(cronbach_alpha(0.5, 10).unwrap() < 0.0);
        assert!(cronbach_alpha(2.0, 1).is_err());
    }

    #[test]
    fn percent_of_variance() {
        let s = eigenvalue_summary(&[8.372], 86);
        assert!((s[0].percent - 837.2 / 86.0).abs() < 1e-12);
        let s = eigenvalue_summary(&[4.901], 10);
        assert_eq!(format!("{:.2}", s[0].percent), "49.01");
    }

    #[test]
    fn uniform_spectrum() {
        let s = eigenvalue_summary(&[1.0; 4], 4);
        for (i, d) in s.iter().enumerate() {
            assert!((d.percent - 25.0).abs() < 1e-12);
            assert!((d.cumulative_percent - 25.0 * (i + 1) as f64).abs() < 1e-12);
            assert_eq!(d.cronbach_alpha, Some(0.0));
        }
    }

    #[test]
    fn cumulative_not_clamped() {
        let s = eigenvalue_summary(&[3.0, 2.0], 4);
        assert!((s[1].cumulative_percent - 125.0).abs() < 1e-12);
    }
}
