//! Split-sample validation: the same retention rule is applied to the train
//! and test fits and the two outcomes are compared.

use serde::{Deserialize, Serialize};

use crate::als::CatpcaModel;
use crate::error::{Error, Result};
use crate::extraction::{
    eigenvalue_criterion, scree_knee, variance_explained_criterion, Criterion, DimensionRule, KneeRule, Spectrum,
    EIGENVALUE_THRESHOLD, NEAR_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest allowed difference in retained dimension counts.
    pub dimensions: usize,
    /// Largest allowed difference in cumulative VAF, in percentage points.
    pub vaf_percent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dimensions: 5,
            vaf_percent: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "Valid",
            Verdict::Invalid => "Invalid",
        })
    }
}

/// One criterion's outcome on one side; `note` explains a missing count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSummary {
    pub criterion: Criterion,
    pub dimensions: Option<usize>,
    pub cumulative_percent: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSummary {
    pub label: String,
    pub n_objects: Option<usize>,
    pub n_variables: usize,
    pub leading_eigenvalues: Vec<f64>,
    /// Outcome of the compared rule.
    pub dimensions: usize,
    pub cumulative_percent: f64,
    /// Every criterion at its default parameters, for context.
    pub criteria: Vec<CriterionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub train: SideSummary,
    pub test: SideSummary,
    pub train_rule: DimensionRule,
    pub test_rule: DimensionRule,
    /// Train minus test.
    pub dimension_count_delta: i64,
    /// Train minus test, percentage points.
    pub vaf_percent_delta: f64,
    pub verdict: Verdict,
    pub tolerances: Tolerances,
}

fn summarize(label: &str, spectrum: &Spectrum, rule: &DimensionRule, n_objects: Option<usize>) -> Result<SideSummary> {
    let chosen = rule.apply(spectrum)?;
    let to_summary = |criterion, r: Result<crate::extraction::CriterionResult>| match r {
        Ok(r) => CriterionSummary {
            criterion,
            dimensions: Some(r.count()),
            cumulative_percent: Some(r.cumulative_vaf_percent),
            note: r.warnings.first().cloned(),
        },
        Err(e) => CriterionSummary {
            criterion,
            dimensions: None,
            cumulative_percent: None,
            note: Some(e.to_string()),
        },
    };
    let criteria = vec![
        to_summary(
            Criterion::Eigenvalue,
            eigenvalue_criterion(spectrum, EIGENVALUE_THRESHOLD, NEAR_THRESHOLD),
        ),
        to_summary(Criterion::VarianceExplained, variance_explained_criterion(spectrum, 0.85)),
        to_summary(Criterion::ScreeKnee, scree_knee(spectrum, KneeRule::default())),
    ];
    Ok(SideSummary {
        label: label.to_string(),
        n_objects,
        n_variables: spectrum.n_variables(),
        leading_eigenvalues: spectrum.eigenvalues().iter().take(5).copied().collect(),
        dimensions: chosen.count(),
        cumulative_percent: chosen.cumulative_vaf_percent,
        criteria,
    })
}

/// Compares two spectra, each under its own rule. Valid when both the
/// dimension-count and the cumulative-VAF differences are within tolerance.
pub fn validate_spectra(
    train: &Spectrum,
    test: &Spectrum,
    train_rule: &DimensionRule,
    test_rule: &DimensionRule,
    tolerances: Tolerances,
) -> Result<ValidationReport> {
    report(
        summarize("train", train, train_rule, None)?,
        summarize("test", test, test_rule, None)?,
        *train_rule,
        *test_rule,
        tolerances,
    )
}

fn report(
    train: SideSummary,
    test: SideSummary,
    train_rule: DimensionRule,
    test_rule: DimensionRule,
    tolerances: Tolerances,
) -> Result<ValidationReport> {
    let dimension_count_delta = train.dimensions as i64 - test.dimensions as i64;
    let vaf_percent_delta = train.cumulative_percent - test.cumulative_percent;
    let valid = dimension_count_delta.unsigned_abs() <= tolerances.dimensions as u64
        && vaf_percent_delta.abs() <= tolerances.vaf_percent;
    Ok(ValidationReport {
        train,
        test,
        train_rule,
        test_rule,
        dimension_count_delta,
        vaf_percent_delta,
        verdict: if valid { Verdict::Valid } else { Verdict::Invalid },
        tolerances,
    })
}

/// Compares two fitted models under the same rule. The models must analyse
/// the same variables at the same levels.
pub fn validate_split(
    train: &CatpcaModel,
    test: &CatpcaModel,
    rule: &DimensionRule,
    tolerances: Tolerances,
) -> Result<ValidationReport> {
    if train.variables != test.variables {
        return Err(Error::SchemaMismatch);
    }
    report(
        summarize("train", &Spectrum::from_model(train)?, rule, Some(train.n_objects()))?,
        summarize("test", &Spectrum::from_model(test)?, rule, Some(test.n_objects()))?,
        *rule,
        *rule,
        tolerances,
    )
}
