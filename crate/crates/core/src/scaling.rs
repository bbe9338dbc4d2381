//! Optimal scaling: turning category codes into standardized real values
//! under a measurement-level restriction.
//!
//! Conventions used throughout the crate:
//!
//! * moments are frequency weighted and use the population divisor, so a
//!   standardized column `v` satisfies `v·v = n`;
//! * categories that never occur carry no quantification (`None`) and do
//!   not take part in any fit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::MeasurementLevel;
use crate::error::{Error, Result};

/// Relative variance below which a column counts as constant.
const DEGENERATE_VARIANCE: f64 = 1e-20;

/// `z = (x - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub shift: f64,
    pub scale: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }
}

/// Centers and scales to mean 0, population variance 1.
pub fn standardize_numeric(column: &[f64]) -> Result<(Vec<f64>, AffineMap)> {
    standardize_named("column", column)
}

pub(crate) fn standardize_named(name: &str, column: &[f64]) -> Result<(Vec<f64>, AffineMap)> {
    let n = column.len();
    if n < 2 {
        return Err(Error::degenerate(name, format!("{n} values, at least 2 required")));
    }
    let mean = column.iter().sum::<f64>() / n as f64;
    let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let scale_ref = column.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    if !(var > DEGENERATE_VARIANCE * scale_ref * scale_ref) {
        return Err(Error::degenerate(name, "zero variance (constant column)"));
    }
    let map = AffineMap {
        shift: mean,
        scale: var.sqrt(),
    };
    Ok((column.iter().map(|&x| map.apply(x)).collect(), map))
}

/// Per-category means of the rows of a target matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    pub frequencies: Vec<usize>,
    /// `None` for categories with zero frequency.
    pub coordinates: Vec<Option<Vec<f64>>>,
}

/// `codes[i]` is the category index (0-based, `< n_categories`) of row `i`.
pub fn centroid_quantify(codes: &[usize], n_categories: usize, targets: &DMatrix<f64>) -> Result<Centroids> {
    if n_categories == 0 {
        return Err(Error::EmptyCategories("centroid target".into()));
    }
    assert_eq!(codes.len(), targets.nrows(), "one code per target row");
    let p = targets.ncols();
    let mut sums = vec![vec![0.0; p]; n_categories];
    let mut freq = vec![0usize; n_categories];
    for (i, &c) in codes.iter().enumerate() {
        freq[c] += 1;
        for s in 0..p {
            sums[c][s] += targets[(i, s)];
        }
    }
    let coordinates = sums
        .into_iter()
        .zip(&freq)
        .map(|(sum, &f)| (f > 0).then(|| sum.into_iter().map(|x| x / f as f64).collect()))
        .collect();
    Ok(Centroids {
        frequencies: freq,
        coordinates,
    })
}

/// Weighted least-squares non-decreasing fit (pool-adjacent-violators).
///
/// Adjacent blocks are merged only when strictly decreasing; equal
/// neighbours are left as separate blocks. All weights must be positive.
pub fn monotone_regression(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // (weighted sum, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        debug_assert!(w > 0.0, "PAVA weights must be positive");
        blocks.push((w * y, w, 1));
        while blocks.len() > 1 {
            let (s1, w1, _) = blocks[blocks.len() - 1];
            let (s0, w0, _) = blocks[blocks.len() - 2];
            if s0 / w0 > s1 / w1 {
                let (_, _, l1) = blocks.pop().unwrap();
                let last = blocks.last_mut().unwrap();
                last.0 += s1;
                last.1 += w1;
                last.2 += l1;
            } else {
                break;
            }
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, w, len)| std::iter::repeat_n(s / w, len))
        .collect()
}

/// Ordinal quantification: frequency-weighted monotone regression of the
/// per-category projections (in category order), then standardization.
/// Zero-frequency categories come back as `None`.
pub fn monotone_quantify(projections: &[f64], frequencies: &[usize]) -> Result<Vec<Option<f64>>> {
    if projections.is_empty() {
        return Err(Error::EmptyCategories("ordinal variable".into()));
    }
    let observed: Vec<usize> = (0..projections.len()).filter(|&c| frequencies[c] > 0).collect();
    let values: Vec<f64> = observed.iter().map(|&c| projections[c]).collect();
    let weights: Vec<f64> = observed.iter().map(|&c| frequencies[c] as f64).collect();
    let fitted = monotone_regression(&values, &weights);
    let mut mapping = vec![None; projections.len()];
    for (&c, v) in observed.iter().zip(fitted) {
        mapping[c] = Some(v);
    }
    normalize_quantification(&mapping, frequencies)
}

/// Rescales a category mapping to frequency-weighted mean 0 and variance 1.
pub fn normalize_quantification(mapping: &[Option<f64>], frequencies: &[usize]) -> Result<Vec<Option<f64>>> {
    let pairs = || {
        mapping
            .iter()
            .zip(frequencies)
            .filter_map(|(v, &f)| v.filter(|_| f > 0).map(|v| (v, f as f64)))
    };
    if pairs().count() < 2 {
        return Err(Error::degenerate(
            "quantification",
            "fewer than two categories with nonzero frequency",
        ));
    }
    let total: f64 = pairs().map(|(_, f)| f).sum();
    let mean = pairs().map(|(v, f)| v * f).sum::<f64>() / total;
    let var = pairs().map(|(v, f)| f * (v - mean).powi(2)).sum::<f64>() / total;
    let scale_ref = pairs().fold(0.0f64, |m, (v, _)| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if !(var > DEGENERATE_VARIANCE * scale_ref * scale_ref) {
        return Err(Error::degenerate("quantification", "all categories share one value"));
    }
    let sd = var.sqrt();
    Ok(mapping
        .iter()
        .zip(frequencies)
        .map(|(v, &f)| v.filter(|_| f > 0).map(|v| (v - mean) / sd))
        .collect())
}

/// Fitted category values of one single-quantification variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryQuantification {
    pub variable: String,
    pub level: MeasurementLevel,
    pub categories: Vec<i64>,
    pub frequencies: Vec<usize>,
    pub values: Vec<Option<f64>>,
}

impl CategoryQuantification {
    pub fn value_of(&self, code: i64) -> Option<f64> {
        let i = self.categories.iter().position(|&c| c == code)?;
        self.values[i]
    }

    fn weighted(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.frequencies)
            .filter_map(|(v, &f)| v.filter(|_| f > 0).map(|v| (v, f as f64)))
    }

    pub fn weighted_mean(&self) -> f64 {
        let total: f64 = self.weighted().map(|(_, f)| f).sum();
        self.weighted().map(|(v, f)| v * f).sum::<f64>() / total
    }

    pub fn weighted_variance(&self) -> f64 {
        let mean = self.weighted_mean();
        let total: f64 = self.weighted().map(|(_, f)| f).sum();
        self.weighted().map(|(v, f)| f * (v - mean).powi(2)).sum::<f64>() / total
    }

    /// Non-decreasing over observed categories in declared order.
    pub fn is_monotone(&self) -> bool {
        let vals: Vec<f64> = self.values.iter().flatten().copied().collect();
        vals.windows(2).all(|w| w[0] <= w[1] + 1e-12)
    }

    /// Categories listed with zero frequency.
    pub fn empty_categories(&self) -> Vec<i64> {
        self.categories
            .iter()
            .zip(&self.frequencies)
            .filter(|(_, &f)| f == 0)
            .map(|(&c, _)| c)
            .collect()
    }
}
